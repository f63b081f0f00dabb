#pragma once

#include "dialogkit/matrix.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dialogkit {

// Desk-scale trainable text embedders. The architecture is a bag-of-tokens
// mean pool over a token embedding table followed by a linear projection;
// every score and loss below is computed on top of that embedding, and all
// gradients are analytic and finite-difference checked in the tests.

/// Token table + projection. Rows of the table are vocabulary entries
/// first, then hash buckets for out-of-vocabulary tokens, then (for joint
/// query-passage encoders) one separator row.
struct EncoderParams {
    int embed_dim = 0;   // d_e: token embedding width
    int output_dim = 0;  // d: projected embedding width
    int hash_buckets = 1024;
    std::uint64_t seed = 0;
    bool with_separator = false;
    std::vector<std::string> vocab;
    Matrix token_table; // (|vocab| + hash_buckets + separator?) x embed_dim
    Matrix projection;  // embed_dim x output_dim

    /// Seeded Gaussian init, stddev 0.02.
    static EncoderParams random(std::vector<std::string> vocab, int embed_dim,
                                int output_dim, int hash_buckets,
                                std::uint64_t seed, bool with_separator = false);

    int table_rows() const;
    int separator_row() const; // only valid when with_separator
    /// Vocabulary id, or |vocab| + mult31(token) % hash_buckets.
    int token_row(const std::string& token) const;

    void rebuild_vocab_index();

private:
    std::unordered_map<std::string, int> vocab_index_;
};

struct RerankerParams {
    EncoderParams embedder; // built with_separator = true
    std::vector<double> w;  // length output_dim

    static RerankerParams random(std::vector<std::string> vocab, int embed_dim,
                                 int output_dim, int hash_buckets,
                                 std::uint64_t seed);
};

struct TrainConfig {
    double temperature = 0.01;
    int batch_size = 8;
    double learning_rate = 0.1;
    int epochs = 10;
    std::uint64_t seed = 1;
};

struct Embedding {
    std::vector<double> values;
    double norm = 0.0;
    bool degenerate = false; // zero-token input
};

/// Lowercased whitespace tokens.
std::vector<std::string> tokenize(const std::string& text);

/// Frequency-ranked vocabulary (ties broken by token), returned sorted.
std::vector<std::string> build_vocab(const std::vector<std::string>& texts,
                                     std::size_t max_size);

/// Mean-pool the token rows and project. Empty input yields a degenerate
/// zero embedding.
Embedding encode(const EncoderParams& params, const std::string& text);

/// dot(a, b) / (|a| |b|). Throws DataError on degenerate input.
double cosine_score(const Embedding& a, const Embedding& b);

struct ContrastiveResult {
    double loss = 0.0;              // mean over batch rows
    std::vector<double> row_losses; // -s(b, target)/tau + logsumexp_j s(b,j)/tau
    Matrix scores;                  // batch x passages cosine scores
};

/// In-batch softmax loss: every batch positive is a candidate for every
/// query; row b's target is its own positive. Batches with duplicated
/// positive texts are rejected (the softmax target would be ambiguous).
ContrastiveResult contrastive_loss(
    const EncoderParams& params,
    const std::vector<std::pair<std::string, std::string>>& batch,
    double temperature);

/// General form: candidate passages are the batch positives followed by any
/// extra (mined) negatives; target_col[b] names row b's positive column.
ContrastiveResult contrastive_loss_general(const EncoderParams& params,
                                           const std::vector<std::string>& queries,
                                           const std::vector<std::string>& passages,
                                           const std::vector<int>& target_col,
                                           double temperature);

struct EncoderGrad {
    Matrix token_table;
    Matrix projection;
};

EncoderGrad contrastive_grad(
    const EncoderParams& params,
    const std::vector<std::pair<std::string, std::string>>& batch,
    double temperature);

EncoderGrad contrastive_grad_general(const EncoderParams& params,
                                     const std::vector<std::string>& queries,
                                     const std::vector<std::string>& passages,
                                     const std::vector<int>& target_col,
                                     double temperature);

/// Joint encoding: query tokens, separator, passage tokens, pooled and
/// projected like encode(). Never degenerate (the separator is always
/// there).
Embedding encode_joint(const RerankerParams& params, const std::string& query,
                       const std::string& passage);

/// w . embed(query, passage); unbounded real.
double rerank_score(const RerankerParams& params, const std::string& query,
                    const std::string& passage);

struct RerankerLoss {
    double total = 0.0;
    double positive_term = 0.0; // -log sigmoid(s+)
    double negative_term = 0.0; // mean over negatives of -log(1 - sigmoid(s-))
};

/// Binary classification loss with the negative side averaged over the
/// negative set. Throws DataError when negatives is empty.
RerankerLoss reranker_loss(const RerankerParams& params, const std::string& query,
                           const std::string& positive,
                           const std::vector<std::string>& negatives);

struct RerankerGrad {
    Matrix token_table;
    Matrix projection;
    std::vector<double> w;
};

RerankerGrad reranker_grad(const RerankerParams& params, const std::string& query,
                           const std::string& positive,
                           const std::vector<std::string>& negatives);

/// A dual-encoder training pair, optionally with mined hard negatives that
/// join the in-batch candidate pool.
struct TrainPair {
    std::string query;
    std::string positive;
    std::string positive_id;
    std::vector<std::string> negatives;
};

struct TrainReport {
    std::vector<double> epoch_mean_loss;
    int skipped_batches = 0; // undersized or duplicate-positive batches
};

/// Plain gradient descent with seeded shuffling; bit-reproducible for a
/// fixed (seed, config, input order). Non-finite loss aborts with a
/// DataError naming the epoch and step.
std::pair<EncoderParams, TrainReport> train_dual_encoder(
    EncoderParams params, const std::vector<TrainPair>& examples,
    const TrainConfig& config);

struct RerankTriplet {
    std::string query;
    std::string positive;
    std::vector<std::string> negatives;
};

std::pair<RerankerParams, TrainReport> train_reranker(
    RerankerParams params, const std::vector<RerankTriplet>& triplets,
    const TrainConfig& config);

// Versioned JSON params files; see README for the schema.
void save_encoder_params(const std::string& path, const EncoderParams& params);
EncoderParams load_encoder_params(const std::string& path);
void save_reranker_params(const std::string& path, const RerankerParams& params);
RerankerParams load_reranker_params(const std::string& path);

/// Stable fingerprint of the full parameter state, used to stamp index
/// files.
std::uint64_t params_fingerprint(const EncoderParams& params);

void save_loss_curve(const std::string& path, const TrainReport& report);

} // namespace dialogkit
