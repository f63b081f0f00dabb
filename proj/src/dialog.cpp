#include "dialogkit/dialog.hpp"

#include "dialogkit/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

using nlohmann::json;

namespace dialogkit {

const char* to_string(Source s) {
    switch (s) {
        case Source::Prompt: return "prompt";
        case Source::Sentence: return "sentence";
        case Source::Generated: return "generated";
        case Source::Masked: return "masked";
    }
    return "sentence";
}

Source source_from_string(const std::string& s) {
    if (s == "prompt") return Source::Prompt;
    if (s == "sentence") return Source::Sentence;
    if (s == "generated") return Source::Generated;
    if (s == "masked") return Source::Masked;
    throw DataError("unknown utterance source: " + s);
}

Dialog mask_utterances(const Dialog& d, const MaskSpec& spec,
                       const std::string& mask_literal) {
    if (spec.indices.empty()) throw DataError("mask spec is empty");
    Dialog out = d;
    for (int t : spec.indices) {
        if (t < 1 || t > d.turn_count())
            throw DataError("mask index " + std::to_string(t) +
                            " out of range for dialog '" + d.id + "' with " +
                            std::to_string(d.turn_count()) + " turns");
        out.utterances[t - 1].text = mask_literal;
        out.utterances[t - 1].source = Source::Masked;
    }
    return out;
}

std::string serialize(const Dialog& d, const std::string& mask_literal) {
    std::string out;
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
        const auto& u = d.utterances[i];
        if (i > 0) out += ' ';
        out += std::to_string(u.speaker);
        out += ':';
        out += (u.source == Source::Masked) ? mask_literal : u.text;
    }
    return out;
}

std::vector<Violation> validate(const Dialog& d, const std::string& mask_literal) {
    std::vector<Violation> v;
    if (d.utterances.empty()) {
        v.push_back({0, "dialog has no utterances"});
        return v;
    }
    for (int t = 1; t <= d.turn_count(); ++t) {
        const auto& u = d.utterances[t - 1];
        if (u.speaker != 0 && u.speaker != 1)
            v.push_back({t, "speaker must be 0 or 1"});
        if (u.source == Source::Masked && u.text != mask_literal)
            v.push_back({t, "masked turn text is not the mask literal"});
        if (u.source != Source::Masked && u.text == mask_literal)
            v.push_back({t, "unmasked turn carries the mask literal"});
        if (u.source == Source::Prompt && u.speaker != 0)
            v.push_back({t, "prompt turn must be spoken by the writer (speaker 0)"});
        if (u.source != Source::Masked && u.text.empty())
            v.push_back({t, "unmasked turn text is empty"});
    }
    return v;
}

std::string dialog_to_json(const Dialog& d) {
    json turns = json::array();
    for (const auto& u : d.utterances)
        turns.push_back({{"speaker", u.speaker},
                         {"text", u.text},
                         {"source", to_string(u.source)}});
    json rec = {{"id", d.id},
                {"title", d.title},
                {"passage_id", d.passage_id ? json(*d.passage_id) : json(nullptr)},
                {"utterances", std::move(turns)}};
    return rec.dump();
}

Dialog dialog_from_json(const std::string& line) {
    json rec;
    try {
        rec = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(std::string("bad dialog record: ") + e.what());
    }
    Dialog d;
    try {
        d.id = rec.at("id").get<std::string>();
        d.title = rec.value("title", std::string{});
        if (rec.contains("passage_id") && !rec["passage_id"].is_null())
            d.passage_id = rec["passage_id"].get<std::string>();
        for (const auto& t : rec.at("utterances")) {
            Utterance u;
            u.speaker = t.at("speaker").get<int>();
            u.text = t.at("text").get<std::string>();
            u.source = source_from_string(t.at("source").get<std::string>());
            d.utterances.push_back(std::move(u));
        }
    } catch (const json::exception& e) {
        throw DataError("bad dialog record '" + d.id + "': " + e.what());
    }
    return d;
}

std::vector<Dialog> load_dialogs(const std::string& path,
                                 const std::string& mask_literal) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dialogs file: " + path);
    std::vector<Dialog> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        Dialog d = dialog_from_json(line);
        // No escaping in the serialized form, so reject stray mask glyphs.
        for (int t = 1; t <= d.turn_count(); ++t) {
            const auto& u = d.utterances[t - 1];
            if (u.source != Source::Masked &&
                u.text.find(mask_literal) != std::string::npos)
                throw DataError(path + ":" + std::to_string(lineno) +
                                ": turn " + std::to_string(t) +
                                " contains the mask literal");
        }
        out.push_back(std::move(d));
    }
    return out;
}

void save_dialogs(const std::string& path, const std::vector<Dialog>& dialogs) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dialogs file: " + path);
    for (const auto& d : dialogs) out << dialog_to_json(d) << '\n';
}

} // namespace dialogkit
