#include "dialogkit/analysis.hpp"

#include "dialogkit/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

using nlohmann::json;

namespace dialogkit {

namespace {

std::string strip_punct(const std::string& token) {
    std::size_t b = 0, e = token.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(token[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(token[e - 1]))) --e;
    return token.substr(b, e - b);
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

} // namespace

std::string question_type(const std::string& text) {
    std::string lower = text;
    for (char& c : lower)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::vector<std::string> words;
    for (const auto& tok : whitespace_tokens(lower)) {
        std::string w = strip_punct(tok);
        if (!w.empty()) words.push_back(w);
        if (words.size() == 2) break;
    }
    if (words.empty()) return "";
    if (words.size() == 1) return words[0];
    return words[0] + " " + words[1];
}

QuestionDistribution question_distribution(const std::vector<Dialog>& dialogs) {
    QuestionDistribution dist;
    for (const auto& d : dialogs) {
        int turn = 0;
        for (const auto& u : d.utterances)
            if (u.source == Source::Generated)
                ++dist[{++turn, question_type(u.text)}];
    }
    return dist;
}

void save_distribution_csv(const std::string& path,
                           const QuestionDistribution& dist) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write distribution: " + path);
    out << "turn,bucket,count\n";
    for (const auto& [key, count] : dist)
        out << key.first << ',' << key.second << ',' << count << '\n';
}

RatingMatrix load_ratings_csv(const std::string& path, AgreementScale scale) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open ratings file: " + path);
    RatingMatrix m;
    m.scale = scale;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::optional<int>> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cell = normalize_whitespace(cell);
            if (cell.empty()) {
                row.push_back(std::nullopt);
            } else {
                try {
                    row.push_back(std::stoi(cell));
                } catch (const std::exception&) {
                    throw DataError("ratings cell is not an integer: '" + cell + "'");
                }
            }
        }
        m.labels.push_back(std::move(row));
    }
    return m;
}

double krippendorff_alpha(const RatingMatrix& m) {
    // Coincidence counts: within each item with n >= 2 ratings, every
    // ordered pair of ratings contributes 1 / (n - 1).
    std::map<std::pair<int, int>, double> coincidence;
    std::map<int, double> marginal;
    double n_total = 0.0;

    for (const auto& item : m.labels) {
        std::vector<int> values;
        for (const auto& cell : item)
            if (cell) values.push_back(*cell);
        if (values.size() < 2) continue;
        const double weight = 1.0 / static_cast<double>(values.size() - 1);
        for (std::size_t i = 0; i < values.size(); ++i)
            for (std::size_t j = 0; j < values.size(); ++j) {
                if (i == j) continue;
                coincidence[{values[i], values[j]}] += weight;
            }
        for (int v : values) marginal[v] += 1.0;
        n_total += static_cast<double>(values.size());
    }

    if (n_total < 2.0) throw DataError("agreement is undefined: not enough pairable ratings");

    // Squared distance between categories under the configured scale.
    auto distance_sq = [&](int c, int k) -> double {
        if (c == k) return 0.0;
        if (m.scale == AgreementScale::Nominal) return 1.0;
        const int lo = std::min(c, k), hi = std::max(c, k);
        double sum = 0.0;
        for (const auto& [cat, count] : marginal)
            if (cat >= lo && cat <= hi) sum += count;
        sum -= (marginal.at(lo) + marginal.at(hi)) / 2.0;
        return sum * sum;
    };

    double observed = 0.0;
    for (const auto& [pair, count] : coincidence)
        observed += count * distance_sq(pair.first, pair.second);
    observed /= n_total;

    double expected = 0.0;
    for (const auto& [c, nc] : marginal)
        for (const auto& [k, nk] : marginal)
            expected += nc * nk * distance_sq(c, k);
    expected /= n_total * (n_total - 1.0);

    if (expected == 0.0)
        throw DataError("agreement is undefined: zero expected disagreement");
    return 1.0 - observed / expected;
}

SensitiveLexicon SensitiveLexicon::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lexicon file: " + path);
    json rec;
    try {
        in >> rec;
    } catch (const json::exception& e) {
        throw DataError("bad lexicon file " + path + ": " + e.what());
    }
    SensitiveLexicon lex;
    try {
        for (const auto& [category, terms] : rec.at("identity").items())
            lex.identity[category] = terms.get<std::vector<std::string>>();
        for (const auto& [cls, terms] : rec.at("adjectives").items())
            lex.adjectives[cls] = terms.get<std::vector<std::string>>();
        for (const auto& pair : rec.at("interactions")) {
            const auto category = pair.at(0).get<std::string>();
            const auto cls = pair.at(1).get<std::string>();
            if (!lex.identity.count(category))
                throw DataError("interaction references unknown identity category '" +
                                category + "'");
            if (!lex.adjectives.count(cls))
                throw DataError("interaction references unknown adjective class '" +
                                cls + "'");
            lex.interactions.emplace_back(category, cls);
        }
    } catch (const json::exception& e) {
        throw DataError("bad lexicon file " + path + ": " + e.what());
    }
    for (auto& [category, terms] : lex.identity)
        for (auto& t : terms)
            for (char& c : t)
                c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (auto& [cls, terms] : lex.adjectives)
        for (auto& t : terms)
            for (char& c : t)
                c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return lex;
}

namespace {

/// Lowercased alphanumeric token runs; punctuation and hyphens are
/// boundaries, so "African-American" yields ("african", "american").
std::vector<std::string> match_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

/// Does `term` (itself tokenized) occur as a contiguous token run?
bool contains_term(const std::vector<std::string>& tokens, const std::string& term) {
    const auto needle = match_tokens(term);
    if (needle.empty() || needle.size() > tokens.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= tokens.size(); ++i) {
        bool all = true;
        for (std::size_t j = 0; j < needle.size(); ++j)
            if (tokens[i + j] != needle[j]) {
                all = false;
                break;
            }
        if (all) return true;
    }
    return false;
}

} // namespace

ScanReport scan_sensitive(const std::vector<Dialog>& dialogs,
                          const SensitiveLexicon& lexicon,
                          const std::vector<Passage>* passages, ScanMode mode) {
    if (mode == ScanMode::NotInPassage && passages == nullptr)
        throw DataError("not-in-passage scanning needs the source passages");

    std::unordered_map<std::string, std::vector<std::string>> passage_tokens;
    if (passages)
        for (const auto& p : *passages)
            passage_tokens[p.id] = match_tokens(p.text);

    std::set<std::pair<std::string, std::string>> enabled(
        lexicon.interactions.begin(), lexicon.interactions.end());

    ScanReport report;
    for (const auto& d : dialogs) {
        ++report.total_dialogs;
        bool dialog_flagged = false;
        int question = 0;
        for (const auto& u : d.utterances) {
            if (u.source != Source::Generated) continue;
            ++question;
            ++report.total_questions;
            const auto tokens = match_tokens(u.text);
            bool question_flagged = false;

            for (const auto& [category, terms] : lexicon.identity) {
                for (const auto& identity_term : terms) {
                    if (!contains_term(tokens, identity_term)) continue;
                    if (mode == ScanMode::NotInPassage) {
                        const std::string pid = d.passage_id ? *d.passage_id : d.id;
                        auto it = passage_tokens.find(pid);
                        if (it == passage_tokens.end())
                            throw DataError("dialog '" + d.id +
                                            "' has no passage '" + pid +
                                            "' for not-in-passage scanning");
                        if (contains_term(it->second, identity_term)) continue;
                    }
                    for (const auto& [cls, adjective_terms] : lexicon.adjectives) {
                        if (!enabled.count({category, cls})) continue;
                        for (const auto& adjective : adjective_terms) {
                            if (!contains_term(tokens, adjective)) continue;
                            report.flags.push_back({d.id, question, identity_term,
                                                    category, adjective, cls});
                            question_flagged = true;
                        }
                    }
                }
            }
            if (question_flagged) {
                ++report.flagged_questions;
                dialog_flagged = true;
            }
        }
        if (dialog_flagged) ++report.flagged_dialogs;
    }
    return report;
}

void save_flags(const std::string& path, const ScanReport& report) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write flags file: " + path);
    for (const auto& f : report.flags) {
        json rec = {{"dialog_id", f.dialog_id},
                    {"question", f.question_index},
                    {"identity_term", f.identity_term},
                    {"identity_category", f.identity_category},
                    {"adjective_term", f.adjective_term},
                    {"adjective_class", f.adjective_class}};
        out << rec.dump() << '\n';
    }
}

} // namespace dialogkit
