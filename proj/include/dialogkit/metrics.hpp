#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace dialogkit {

/// Graded relevance judgments: query id -> doc id -> grade >= 0.
struct Qrels {
    std::map<std::string, std::map<std::string, int>> grades;

    int grade(const std::string& qid, const std::string& docid) const;
    bool has_query(const std::string& qid) const { return grades.count(qid) > 0; }
};

struct RunRow {
    std::string query_id;
    std::vector<std::pair<std::string, double>> ranking; // (doc id, score)
};

/// Ranked output in query order of first appearance. The stored order is
/// authoritative; scores are informational.
struct RunRanking {
    std::vector<RunRow> rows;

    const RunRow* find(const std::string& qid) const;
    RunRow& row_for(const std::string& qid);
};

// Text interchange formats:
//   qrels: "qid 0 docid grade"               (whitespace-separated)
//   run:   "qid Q0 docid rank score tag"
// Run rows are ordered by their rank field; duplicate docs per query are
// rejected.
Qrels load_qrels(const std::string& path);
RunRanking load_run(const std::string& path);
void save_run(const std::string& path, const RunRanking& run,
              const std::string& tag);

inline constexpr int kNoCutoff = 0; // "no rank cutoff" marker

/// 1/r for the first doc in `positives` at rank r <= cutoff, else 0.
/// cutoff = kNoCutoff means unlimited.
double reciprocal_rank(const RunRow& row, const std::set<std::string>& positives,
                       int cutoff);

/// Mean reciprocal rank over the run's queries that appear in the qrels
/// (missing ones are skipped; an empty intersection is an error). Docs with
/// grade >= min_grade count as positive.
double mrr(const RunRanking& run, const Qrels& qrels, int min_grade,
           int cutoff = kNoCutoff);

/// Per query: |positives in top-k| / |positives|, averaged over queries
/// with at least one positive.
double recall_at_k(const RunRanking& run, const Qrels& qrels, int k, int min_grade);

enum class Gain { Exponential, Linear }; // 2^grade - 1 vs grade

/// Normalized DCG at k with log2(rank+1) discounts. Queries with zero total
/// gain are excluded from the mean.
double ndcg_at_k(const RunRanking& run, const Qrels& qrels, int k,
                 Gain gain = Gain::Exponential);

/// One requested metric, parsed from specs like "mrr", "mrr@5", "r@10",
/// "ndcg@3".
struct MetricSpec {
    std::string name; // mrr | recall | ndcg
    int cutoff = kNoCutoff;
    int min_grade = 1;
    Gain gain = Gain::Exponential;

    std::string label() const;
};

/// Parse a comma-separated metric list. min_grade and gain apply to every
/// parsed metric. Unknown names throw DataError.
std::vector<MetricSpec> parse_metric_specs(const std::string& specs,
                                           int min_grade, Gain gain);

struct EvalReport {
    std::vector<MetricSpec> metrics;
    std::vector<double> aggregates;
    // per metric: (query id, value) for every evaluated query
    std::vector<std::vector<std::pair<std::string, double>>> per_query;
};

EvalReport evaluate_run(const RunRanking& run, const Qrels& qrels,
                        const std::vector<MetricSpec>& metrics);

void save_report_csv(const std::string& path, const EvalReport& report);
void save_report_json(const std::string& path, const EvalReport& report);

} // namespace dialogkit
