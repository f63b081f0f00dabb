#include "dialogkit/metrics.hpp"

#include "dialogkit/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace dialogkit {

int Qrels::grade(const std::string& qid, const std::string& docid) const {
    auto q = grades.find(qid);
    if (q == grades.end()) return 0;
    auto d = q->second.find(docid);
    return d == q->second.end() ? 0 : d->second;
}

const RunRow* RunRanking::find(const std::string& qid) const {
    for (const auto& row : rows)
        if (row.query_id == qid) return &row;
    return nullptr;
}

RunRow& RunRanking::row_for(const std::string& qid) {
    for (auto& row : rows)
        if (row.query_id == qid) return row;
    rows.push_back({qid, {}});
    return rows.back();
}

Qrels load_qrels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open qrels file: " + path);
    Qrels qrels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string qid, iteration, docid;
        int grade;
        if (!(ss >> qid >> iteration >> docid >> grade))
            throw DataError(path + ":" + std::to_string(lineno) + ": bad qrels line");
        if (grade < 0)
            throw DataError(path + ":" + std::to_string(lineno) + ": negative grade");
        auto [it, inserted] = qrels.grades[qid].emplace(docid, grade);
        if (!inserted)
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": duplicate judgment for (" + qid + ", " + docid + ")");
    }
    return qrels;
}

RunRanking load_run(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open run file: " + path);

    struct Entry {
        std::string docid;
        int rank;
        double score;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<Entry>> by_query;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string qid, q0, docid, tag;
        int rank;
        double score;
        if (!(ss >> qid >> q0 >> docid >> rank >> score >> tag))
            throw DataError(path + ":" + std::to_string(lineno) + ": bad run line");
        if (by_query.find(qid) == by_query.end()) order.push_back(qid);
        by_query[qid].push_back({docid, rank, score});
    }

    RunRanking run;
    for (const auto& qid : order) {
        auto& entries = by_query[qid];
        // The rank field is authoritative; scores are carried through as-is.
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.rank < b.rank; });
        RunRow row{qid, {}};
        std::unordered_set<std::string> seen;
        for (const auto& e : entries) {
            if (!seen.insert(e.docid).second)
                throw DataError("duplicate doc '" + e.docid + "' for query '" +
                                qid + "' in " + path);
            row.ranking.emplace_back(e.docid, e.score);
        }
        run.rows.push_back(std::move(row));
    }
    return run;
}

void save_run(const std::string& path, const RunRanking& run,
              const std::string& tag) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write run file: " + path);
    out.precision(9);
    for (const auto& row : run.rows) {
        int rank = 0;
        for (const auto& [docid, score] : row.ranking)
            out << row.query_id << " Q0 " << docid << ' ' << ++rank << ' '
                << std::fixed << score << ' ' << tag << '\n';
    }
}

double reciprocal_rank(const RunRow& row, const std::set<std::string>& positives,
                       int cutoff) {
    int rank = 0;
    for (const auto& [docid, score] : row.ranking) {
        ++rank;
        if (cutoff != kNoCutoff && rank > cutoff) break;
        if (positives.count(docid)) return 1.0 / rank;
    }
    return 0.0;
}

namespace {

std::set<std::string> positives_for(const Qrels& qrels, const std::string& qid,
                                    int min_grade) {
    std::set<std::string> out;
    auto q = qrels.grades.find(qid);
    if (q == qrels.grades.end()) return out;
    for (const auto& [docid, grade] : q->second)
        if (grade >= min_grade) out.insert(docid);
    return out;
}

double gain_of(int grade, Gain gain) {
    return gain == Gain::Exponential ? std::pow(2.0, grade) - 1.0
                                     : static_cast<double>(grade);
}

} // namespace

double mrr(const RunRanking& run, const Qrels& qrels, int min_grade, int cutoff) {
    double total = 0.0;
    int evaluated = 0;
    for (const auto& row : run.rows) {
        if (!qrels.has_query(row.query_id)) continue; // skipped with warning upstream
        total += reciprocal_rank(row, positives_for(qrels, row.query_id, min_grade),
                                 cutoff);
        ++evaluated;
    }
    if (evaluated == 0)
        throw DataError("no run query appears in the qrels");
    return total / evaluated;
}

double recall_at_k(const RunRanking& run, const Qrels& qrels, int k, int min_grade) {
    double total = 0.0;
    int evaluated = 0;
    for (const auto& row : run.rows) {
        const auto positives = positives_for(qrels, row.query_id, min_grade);
        if (positives.empty()) continue;
        int found = 0;
        int rank = 0;
        for (const auto& [docid, score] : row.ranking) {
            if (++rank > k) break;
            if (positives.count(docid)) ++found;
        }
        total += static_cast<double>(found) / static_cast<double>(positives.size());
        ++evaluated;
    }
    return evaluated == 0 ? 0.0 : total / evaluated;
}

double ndcg_at_k(const RunRanking& run, const Qrels& qrels, int k, Gain gain) {
    double total = 0.0;
    int evaluated = 0;
    for (const auto& row : run.rows) {
        auto q = qrels.grades.find(row.query_id);
        if (q == qrels.grades.end()) continue;

        std::vector<int> judged_grades;
        for (const auto& [docid, grade] : q->second) judged_grades.push_back(grade);
        std::sort(judged_grades.rbegin(), judged_grades.rend());

        double ideal = 0.0;
        for (std::size_t r = 0; r < judged_grades.size() &&
                                r < static_cast<std::size_t>(k);
             ++r)
            ideal += gain_of(judged_grades[r], gain) /
                     std::log2(static_cast<double>(r) + 2.0);
        if (ideal == 0.0) continue; // nothing gainful judged for this query

        double dcg = 0.0;
        int rank = 0;
        for (const auto& [docid, score] : row.ranking) {
            if (++rank > k) break;
            dcg += gain_of(qrels.grade(row.query_id, docid), gain) /
                   std::log2(static_cast<double>(rank) + 1.0);
        }
        total += dcg / ideal;
        ++evaluated;
    }
    return evaluated == 0 ? 0.0 : total / evaluated;
}

std::string MetricSpec::label() const {
    std::string base = name == "recall" ? "r" : name;
    if (cutoff != kNoCutoff) base += "@" + std::to_string(cutoff);
    if (name == "ndcg" && gain == Gain::Linear) base += "-linear";
    return base;
}

std::vector<MetricSpec> parse_metric_specs(const std::string& specs, int min_grade,
                                           Gain gain) {
    std::vector<MetricSpec> out;
    std::stringstream ss(specs);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        MetricSpec spec;
        spec.min_grade = min_grade;
        spec.gain = gain;
        std::string head = item;
        auto at = item.find('@');
        if (at != std::string::npos) {
            head = item.substr(0, at);
            try {
                spec.cutoff = std::stoi(item.substr(at + 1));
            } catch (const std::exception&) {
                throw DataError("bad metric cutoff in '" + item + "'");
            }
            if (spec.cutoff < 1) throw DataError("metric cutoff must be >= 1");
        }
        if (head == "mrr") {
            spec.name = "mrr";
        } else if (head == "r" || head == "recall") {
            spec.name = "recall";
            if (spec.cutoff == kNoCutoff)
                throw DataError("recall needs a cutoff, e.g. r@10");
        } else if (head == "ndcg") {
            spec.name = "ndcg";
            if (spec.cutoff == kNoCutoff) spec.cutoff = 3;
        } else {
            throw DataError("unknown metric '" + item + "'");
        }
        out.push_back(spec);
    }
    if (out.empty()) throw DataError("empty metric list");
    return out;
}

EvalReport evaluate_run(const RunRanking& run, const Qrels& qrels,
                        const std::vector<MetricSpec>& metrics) {
    EvalReport report;
    report.metrics = metrics;
    for (const auto& spec : metrics) {
        std::vector<std::pair<std::string, double>> per_query;
        double total = 0.0;
        for (const auto& row : run.rows) {
            if (!qrels.has_query(row.query_id)) continue;
            if (spec.name == "mrr") {
                const double rr = reciprocal_rank(
                    row, positives_for(qrels, row.query_id, spec.min_grade),
                    spec.cutoff);
                per_query.emplace_back(row.query_id, rr);
                total += rr;
            } else if (spec.name == "recall") {
                RunRanking single;
                single.rows.push_back(row);
                const auto positives =
                    positives_for(qrels, row.query_id, spec.min_grade);
                if (positives.empty()) continue;
                const double r = recall_at_k(single, qrels, spec.cutoff,
                                             spec.min_grade);
                per_query.emplace_back(row.query_id, r);
                total += r;
            } else {
                RunRanking single;
                single.rows.push_back(row);
                // Reuse the aggregate path; a zero-gain query evaluates to
                // "excluded", which we detect via the ideal gain.
                auto q = qrels.grades.find(row.query_id);
                double ideal = 0.0;
                std::vector<int> judged;
                for (const auto& [docid, grade] : q->second) judged.push_back(grade);
                std::sort(judged.rbegin(), judged.rend());
                for (std::size_t r = 0; r < judged.size() &&
                                        r < static_cast<std::size_t>(spec.cutoff);
                     ++r)
                    ideal += gain_of(judged[r], spec.gain) /
                             std::log2(static_cast<double>(r) + 2.0);
                if (ideal == 0.0) continue;
                const double v = ndcg_at_k(single, qrels, spec.cutoff, spec.gain);
                per_query.emplace_back(row.query_id, v);
                total += v;
            }
        }
        if (per_query.empty() && spec.name == "mrr")
            throw DataError("no run query appears in the qrels");
        report.per_query.push_back(per_query);
        report.aggregates.push_back(
            per_query.empty() ? 0.0 : total / static_cast<double>(per_query.size()));
    }
    return report;
}

void save_report_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report: " + path);
    out.precision(17);
    out << "metric,query,value\n";
    for (std::size_t m = 0; m < report.metrics.size(); ++m) {
        for (const auto& [qid, value] : report.per_query[m])
            out << report.metrics[m].label() << ',' << qid << ',' << value << '\n';
        out << report.metrics[m].label() << ",all," << report.aggregates[m] << '\n';
    }
}

void save_report_json(const std::string& path, const EvalReport& report) {
    nlohmann::json rec;
    for (std::size_t m = 0; m < report.metrics.size(); ++m) {
        nlohmann::json entry;
        entry["aggregate"] = report.aggregates[m];
        for (const auto& [qid, value] : report.per_query[m])
            entry["per_query"][qid] = value;
        rec[report.metrics[m].label()] = std::move(entry);
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report: " + path);
    out << rec.dump(2) << '\n';
}

} // namespace dialogkit
