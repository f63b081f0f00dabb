#include "dialogkit/sentence_split.hpp"

#include "dialogkit/error.hpp"

#include <cctype>
#include <fstream>

namespace dialogkit {

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_ws = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out += ' ';
        in_ws = false;
        out += c;
    }
    return out;
}

namespace {

const char* const kDefaultAbbreviations[] = {
    "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Rev.", "Hon.", "St.", "Gen.",
    "Col.", "Sgt.", "Capt.", "Lt.", "Cmdr.", "Jr.", "Sr.", "vs.", "etc.",
    "e.g.", "i.e.", "cf.", "al.", "Inc.", "Ltd.", "Co.", "Corp.", "Mt.",
    "Fig.", "No.", "Nos.", "Vol.", "pp.", "approx.", "dept.", "est.",
    "Jan.", "Feb.", "Mar.", "Apr.", "Jun.", "Jul.", "Aug.", "Sep.",
    "Sept.", "Oct.", "Nov.", "Dec.",
};

bool is_closing_mark(std::string_view s, std::size_t i, std::size_t* len) {
    const char c = s[i];
    if (c == '"' || c == '\'' || c == ')' || c == ']') {
        *len = 1;
        return true;
    }
    // U+201D, U+2019, U+00BB
    if (s.compare(i, 3, "”") == 0 || s.compare(i, 3, "’") == 0) {
        *len = 3;
        return true;
    }
    if (s.compare(i, 2, "»") == 0) {
        *len = 2;
        return true;
    }
    return false;
}

bool starts_sentence(std::string_view s, std::size_t i) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isupper(c) || std::isdigit(c)) return true;
    if (c == '"' || c == '\'') return true;
    // U+201C, U+2018, U+00AB
    return s.compare(i, 3, "“") == 0 || s.compare(i, 3, "‘") == 0 ||
           s.compare(i, 2, "«") == 0;
}

} // namespace

SentenceSplitter::SentenceSplitter() {
    for (const char* a : kDefaultAbbreviations) abbreviations_.insert(a);
}

SentenceSplitter::SentenceSplitter(std::vector<std::string> abbreviations) {
    for (auto& a : abbreviations) abbreviations_.insert(std::move(a));
}

SentenceSplitter SentenceSplitter::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open abbreviation file: " + path);
    std::vector<std::string> entries;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = normalize_whitespace(line);
        if (!line.empty()) entries.push_back(line);
    }
    return SentenceSplitter(std::move(entries));
}

bool SentenceSplitter::is_abbreviation(std::string_view token) const {
    if (abbreviations_.count(std::string(token))) return true;
    // Single-letter initials: "V." in "Edwin V. Sumner".
    if (token.size() == 2 &&
        std::isupper(static_cast<unsigned char>(token[0])))
        return true;
    // Dotted acronyms ("U.S.") and ellipses keep their final period too.
    if (token.size() > 2 &&
        token.find('.') < token.size() - 1)
        return true;
    return false;
}

std::vector<std::string> SentenceSplitter::split(std::string_view text) const {
    const std::string s = normalize_whitespace(text);
    std::vector<std::string> out;
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (c != '.' && c != '!' && c != '?') {
            ++i;
            continue;
        }
        if (c == '.') {
            // Token that ends at this period, including the period itself.
            std::size_t tok_begin = s.rfind(' ', i);
            tok_begin = (tok_begin == std::string::npos) ? start : tok_begin + 1;
            if (is_abbreviation(std::string_view(s).substr(tok_begin, i - tok_begin + 1))) {
                ++i;
                continue;
            }
        }
        // Absorb trailing terminal punctuation ("?!") and closing marks.
        std::size_t end = i + 1;
        while (end < s.size()) {
            if (s[end] == '.' || s[end] == '!' || s[end] == '?') {
                ++end;
                continue;
            }
            std::size_t mark_len = 0;
            if (is_closing_mark(s, end, &mark_len)) {
                end += mark_len;
                continue;
            }
            break;
        }
        if (end < s.size() && s[end] == ' ' && end + 1 < s.size() &&
            starts_sentence(s, end + 1)) {
            out.emplace_back(s.substr(start, end - start));
            start = end + 1;
            i = start;
        } else {
            i = end;
        }
    }
    if (start < s.size()) out.emplace_back(s.substr(start));
    return out;
}

std::vector<std::string> truncate_sentences(std::vector<std::string> sentences,
                                            int max_sentences) {
    if (max_sentences < 1) throw DataError("max_sentences must be >= 1");
    if (static_cast<int>(sentences.size()) > max_sentences)
        sentences.resize(static_cast<std::size_t>(max_sentences));
    return sentences;
}

} // namespace dialogkit
