#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace dialogkit {

/// Collapse every run of whitespace to a single space and trim the ends.
std::string normalize_whitespace(std::string_view text);

/// Rule-based sentence boundary detector.
///
/// A boundary is a terminal . ! or ? (plus any adjacent closing quotes or
/// brackets) followed by a space and an uppercase letter, digit, or opening
/// quote. Periods are kept with their sentence. Exceptions that never end a
/// sentence: listed abbreviations ("Dr.", "etc.", ...), single-letter
/// initials ("V."), and dotted acronyms ("U.S.").
///
/// Input is whitespace-normalized first; every output segment is non-empty
/// and joining segments with single spaces reproduces the normalized input.
class SentenceSplitter {
public:
    /// Built-in abbreviation list.
    SentenceSplitter();

    explicit SentenceSplitter(std::vector<std::string> abbreviations);

    /// One abbreviation per line; '#' starts a comment. Throws DataError if
    /// the file cannot be read.
    static SentenceSplitter from_file(const std::string& path);

    std::vector<std::string> split(std::string_view text) const;

private:
    bool is_abbreviation(std::string_view token) const;

    std::unordered_set<std::string> abbreviations_;
};

/// First max_sentences sentences (the rest are dropped).
std::vector<std::string> truncate_sentences(std::vector<std::string> sentences,
                                            int max_sentences);

} // namespace dialogkit
