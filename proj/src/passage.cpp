#include "dialogkit/passage.hpp"

#include "dialogkit/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

using nlohmann::json;

namespace dialogkit {

Passage Passage::from_text(std::string id, std::string title, std::string text,
                           const SentenceSplitter& splitter, int max_sentences) {
    Passage p;
    p.id = std::move(id);
    p.title = std::move(title);
    p.text = std::move(text);
    p.sentences = truncate_sentences(splitter.split(p.text), max_sentences);
    return p;
}

std::string render_prompt(const std::string& prompt_template,
                          const std::string& title) {
    std::string out = prompt_template;
    const std::string placeholder = "{title}";
    std::size_t pos = 0;
    while ((pos = out.find(placeholder, pos)) != std::string::npos) {
        out.replace(pos, placeholder.size(), title);
        pos += title.size();
    }
    return out;
}

Dialog build_partial_dialog(const Passage& p, const std::string& prompt_template,
                            const std::string& mask_literal) {
    if (p.sentences.empty())
        throw DataError("passage '" + p.id + "' has no sentences");
    Dialog d;
    d.id = p.id;
    d.title = p.title;
    d.passage_id = p.id;
    d.utterances.reserve(2 * p.sentences.size() + 1);
    d.utterances.push_back({0, render_prompt(prompt_template, p.title), Source::Prompt});
    for (const auto& sentence : p.sentences) {
        d.utterances.push_back({1, mask_literal, Source::Masked});
        d.utterances.push_back({0, sentence, Source::Sentence});
    }
    return d;
}

std::string passage_to_json(const Passage& p) {
    json rec = {{"id", p.id}, {"title", p.title}, {"text", p.text}};
    return rec.dump();
}

std::vector<Passage> load_passages(const std::string& path,
                                   const SentenceSplitter& splitter,
                                   int max_sentences,
                                   const std::string& mask_literal) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open passages file: " + path);
    std::vector<Passage> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": bad passage record: " + e.what());
        }
        std::string id = rec.value("id", std::string{});
        std::string title = rec.value("title", std::string{});
        std::string text = rec.value("text", std::string{});
        if (id.empty())
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": passage record has no id");
        if (text.find(mask_literal) != std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": passage '" +
                            id + "' contains the mask literal");
        out.push_back(Passage::from_text(std::move(id), std::move(title),
                                         std::move(text), splitter, max_sentences));
    }
    return out;
}

void save_passages(const std::string& path, const std::vector<Passage>& passages) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write passages file: " + path);
    for (const auto& p : passages) out << passage_to_json(p) << '\n';
}

} // namespace dialogkit
