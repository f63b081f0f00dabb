#pragma once

#include "dialogkit/dialog.hpp"

#include <string>
#include <vector>

namespace dialogkit {

/// A retriever training example: a dialog-history query that ends with a
/// question, paired with a positive passage built only from the source
/// sentences the history has not seen yet. The disjointness keeps the
/// retriever from learning to string-match.
struct RetrievalExample {
    std::vector<std::string> query_turns;
    std::string positive_text;
    std::string passage_id;
    int prefix_index = 0; // i: number of questions in the query
};

/// From a completed dialog (prompt, q_1, s_1, ..., q_m, s_m): one example
/// per prefix i = 1..m-1. The prompt never enters the query; the i = m
/// prefix is skipped because its positive would be empty. With
/// include_answers the query is (q_1, s_1, ..., q_i), otherwise
/// (q_1, ..., q_i). Throws DataError if the dialog does not have the
/// inpainted shape.
std::vector<RetrievalExample> build_examples(const Dialog& d, bool include_answers);

inline constexpr int kMaxQueryCharsWithAnswers = 512;
inline constexpr int kMaxQueryCharsQuestionsOnly = 128;

/// Flatten history turns into one query string: turns joined by the
/// separator token (" | " by default), optionally lowercased, then
/// truncated from the left to max_chars so the newest turns survive. The
/// cut is nudged forward to the next UTF-8 boundary.
std::string format_query(const std::vector<std::string>& turns, bool lowercase,
                         int max_chars, const std::string& separator = "|");

} // namespace dialogkit
