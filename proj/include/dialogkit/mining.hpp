#pragma once

#include "dialogkit/encoder.hpp"
#include "dialogkit/metrics.hpp"
#include "dialogkit/passage.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dialogkit {

/// Hard negatives sampled from a retriever's own rankings.
struct MinedNegatives {
    std::map<std::string, std::vector<std::string>> by_query;
    int stage = 0;
    int top_k = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> missing_queries; // requested but absent from the run
};

/// For each query: drop its judged positives (grade >= min_grade) from the
/// run's top-K, then sample up to n of the remainder uniformly without
/// replacement. Per-query draws are seeded from (seed, query id), so the
/// result does not depend on run ordering. With exclude_positives = false
/// the sampling is blind, accepting possible false negatives.
MinedNegatives mine_hard_negatives(const RunRanking& run, const Qrels& qrels,
                                   const std::vector<std::string>& query_ids,
                                   int n, int top_k, std::uint64_t seed,
                                   int min_grade = 1,
                                   bool exclude_positives = true);

void save_negatives(const std::string& path, const MinedNegatives& mined);
MinedNegatives load_negatives(const std::string& path);

/// A query with its training positive and the corpus passage the positive
/// was derived from (the gold doc for mining and evaluation).
struct MiningExample {
    std::string query_id;
    std::string query;
    std::string positive;
    std::string gold_passage_id;
};

struct MultistageConfig {
    int stages = 3; // 1: in-batch only, 2: + hard-negative retriever, 3: + reranker
    TrainConfig stage1;
    TrainConfig stage2;
    TrainConfig reranker;
    int embed_dim = 16;
    int output_dim = 16;
    int hash_buckets = 1024;
    std::size_t vocab_cap = 50000;
    std::uint64_t init_seed = 7;
    int mine_top_k = 100;
    int mine_n = 10;
    std::uint64_t mine_seed = 11;
    double holdout_fraction = 0.2;
    std::uint64_t split_seed = 13;
    int eval_cutoff = 5; // MRR@cutoff in stage reports
    bool exclude_positives = true;
};

struct StageReport {
    int stage = 0;
    std::string split; // held_in | held_out
    std::string metric;
    double value = 0.0;
};

struct MultistageResult {
    EncoderParams retriever1;
    std::optional<EncoderParams> retriever2;
    std::optional<RerankerParams> reranker;
    std::vector<MinedNegatives> mined; // stage 2 and stage 3 samples
    std::vector<StageReport> reports;
};

/// The staged training pipeline. Stage 1 trains a retriever with in-batch
/// negatives only; stage 2 mines negatives from its rankings and trains a
/// second retriever with them as extra in-batch candidates; stage 3 mines
/// again from the second retriever and trains a reranker. Every stage is
/// scored on the held-in and held-out query splits.
MultistageResult run_multistage(const std::vector<MiningExample>& examples,
                                const std::vector<Passage>& passages,
                                const MultistageConfig& config);

void save_stage_reports(const std::string& path,
                        const std::vector<StageReport>& reports);

/// Partition dialog ids into k folds whose sizes differ by at most one,
/// after a seeded shuffle. All turns of a dialog stay together because the
/// unit is the id.
std::vector<std::vector<std::string>> make_folds(std::vector<std::string> dialog_ids,
                                                 int k, std::uint64_t seed);

} // namespace dialogkit
