#include "dialogkit/retrieval_examples.hpp"

#include "dialogkit/error.hpp"

#include <cctype>

namespace dialogkit {

namespace {

/// Expects the inpainted dialog shape: prompt, then alternating
/// generated/sentence turns. Returns (questions, sentences).
std::pair<std::vector<std::string>, std::vector<std::string>>
split_turns(const Dialog& d) {
    if (d.utterances.empty() || d.utterances.front().source != Source::Prompt)
        throw DataError("dialog '" + d.id + "' does not start with a prompt turn");
    if (d.turn_count() % 2 == 0 || d.turn_count() < 3)
        throw DataError("dialog '" + d.id + "' does not have 2m+1 turns");
    std::vector<std::string> questions, sentences;
    for (int t = 2; t <= d.turn_count(); ++t) {
        const auto& u = d.utterances[t - 1];
        if (t % 2 == 0) {
            if (u.source != Source::Generated || u.speaker != 1)
                throw DataError("dialog '" + d.id + "' turn " + std::to_string(t) +
                                " is not a generated reader turn");
            questions.push_back(u.text);
        } else {
            if (u.source != Source::Sentence || u.speaker != 0)
                throw DataError("dialog '" + d.id + "' turn " + std::to_string(t) +
                                " is not a passage sentence");
            sentences.push_back(u.text);
        }
    }
    return {std::move(questions), std::move(sentences)};
}

} // namespace

std::vector<RetrievalExample> build_examples(const Dialog& d, bool include_answers) {
    auto [questions, sentences] = split_turns(d);
    const int m = static_cast<int>(questions.size());
    const std::string passage_id = d.passage_id ? *d.passage_id : d.id;

    std::vector<RetrievalExample> out;
    for (int i = 1; i < m; ++i) {
        RetrievalExample ex;
        ex.passage_id = passage_id;
        ex.prefix_index = i;
        for (int j = 0; j < i; ++j) {
            ex.query_turns.push_back(questions[static_cast<std::size_t>(j)]);
            if (include_answers && j < i - 1)
                ex.query_turns.push_back(sentences[static_cast<std::size_t>(j)]);
        }
        for (int j = i; j < m; ++j) {
            if (j > i) ex.positive_text += ' ';
            ex.positive_text += sentences[static_cast<std::size_t>(j)];
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::string format_query(const std::vector<std::string>& turns, bool lowercase,
                         int max_chars, const std::string& separator) {
    std::string joined;
    for (std::size_t i = 0; i < turns.size(); ++i) {
        if (i > 0) {
            joined += ' ';
            joined += separator;
            joined += ' ';
        }
        joined += turns[i];
    }
    if (lowercase)
        for (char& c : joined)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (max_chars >= 0 && static_cast<int>(joined.size()) > max_chars) {
        std::size_t cut = joined.size() - static_cast<std::size_t>(max_chars);
        // Do not cut inside a multi-byte code point.
        while (cut < joined.size() &&
               (static_cast<unsigned char>(joined[cut]) & 0xc0) == 0x80)
            ++cut;
        joined.erase(0, cut);
    }
    return joined;
}

} // namespace dialogkit
