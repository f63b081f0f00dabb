#include "dialogkit/encoder.hpp"

#include "dialogkit/error.hpp"
#include "dialogkit/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <unordered_set>

using nlohmann::json;

namespace dialogkit {

namespace {

std::string lowercase_ascii(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + e^x) without overflow; -log sigmoid(s) == softplus(-s).
double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

struct EncodedText {
    std::vector<int> ids;
    std::vector<double> weights; // normalized pooling weight per id
    std::vector<double> mean;    // embed_dim
    std::vector<double> out;     // output_dim
    double norm = 0.0;
    bool degenerate = false;
};

/// Pool token rows and project. Uniform weights give plain mean pooling
/// (the dual-encoder path); positional harmonic weights 1/(i+1) make the
/// joint reranker input sensitive to token order, in particular to which
/// side of the separator a token sits on.
EncodedText encode_ids(const EncoderParams& p, std::vector<int> ids,
                       bool positional = false) {
    EncodedText enc;
    enc.ids = std::move(ids);
    enc.mean.assign(static_cast<std::size_t>(p.embed_dim), 0.0);
    enc.out.assign(static_cast<std::size_t>(p.output_dim), 0.0);
    if (enc.ids.empty()) {
        enc.degenerate = true;
        return enc;
    }
    enc.weights.resize(enc.ids.size());
    double total = 0.0;
    for (std::size_t i = 0; i < enc.ids.size(); ++i) {
        enc.weights[i] = positional ? 1.0 / static_cast<double>(i + 1) : 1.0;
        total += enc.weights[i];
    }
    for (double& w : enc.weights) w /= total;
    for (std::size_t i = 0; i < enc.ids.size(); ++i) {
        const double* row =
            p.token_table.row(static_cast<std::size_t>(enc.ids[i]));
        for (int k = 0; k < p.embed_dim; ++k)
            enc.mean[static_cast<std::size_t>(k)] += row[k] * enc.weights[i];
    }
    for (int k = 0; k < p.embed_dim; ++k) {
        const double mk = enc.mean[static_cast<std::size_t>(k)];
        if (mk == 0.0) continue;
        const double* wrow = p.projection.row(static_cast<std::size_t>(k));
        for (int j = 0; j < p.output_dim; ++j)
            enc.out[static_cast<std::size_t>(j)] += mk * wrow[j];
    }
    double sq = 0.0;
    for (double v : enc.out) sq += v * v;
    enc.norm = std::sqrt(sq);
    return enc;
}

std::vector<int> text_token_rows(const EncoderParams& p, const std::string& text) {
    std::vector<int> ids;
    for (const auto& tok : tokenize(text)) ids.push_back(p.token_row(tok));
    return ids;
}

Embedding to_embedding(const EncodedText& enc) {
    Embedding e;
    e.values = enc.out;
    e.norm = enc.norm;
    e.degenerate = enc.degenerate;
    return e;
}

/// Scatter an output-space gradient g (w.r.t. the projected embedding of
/// one text) back onto the projection and the text's token rows.
void backprop_embedding(const EncoderParams& p, const EncodedText& enc,
                        const std::vector<double>& g, Matrix& g_table,
                        Matrix& g_proj) {
    if (enc.ids.empty()) return;
    // projection: dL/dW[k][j] += mean[k] * g[j]
    for (int k = 0; k < p.embed_dim; ++k) {
        const double mk = enc.mean[static_cast<std::size_t>(k)];
        if (mk == 0.0) continue;
        double* grow = g_proj.row(static_cast<std::size_t>(k));
        for (int j = 0; j < p.output_dim; ++j)
            grow[j] += mk * g[static_cast<std::size_t>(j)];
    }
    // pooled vector: dL/dmean[k] = sum_j W[k][j] * g[j], then scatter to the
    // token rows by each occurrence's pooling weight
    std::vector<double> g_mean(static_cast<std::size_t>(p.embed_dim), 0.0);
    for (int k = 0; k < p.embed_dim; ++k) {
        const double* wrow = p.projection.row(static_cast<std::size_t>(k));
        double acc = 0.0;
        for (int j = 0; j < p.output_dim; ++j)
            acc += wrow[j] * g[static_cast<std::size_t>(j)];
        g_mean[static_cast<std::size_t>(k)] = acc;
    }
    for (std::size_t i = 0; i < enc.ids.size(); ++i) {
        double* trow = g_table.row(static_cast<std::size_t>(enc.ids[i]));
        for (int k = 0; k < p.embed_dim; ++k)
            trow[k] += g_mean[static_cast<std::size_t>(k)] * enc.weights[i];
    }
}

/// Shared forward/backward for the softmax loss over candidate passages.
void contrastive_core(const EncoderParams& params,
                      const std::vector<std::string>& queries,
                      const std::vector<std::string>& passages,
                      const std::vector<int>& target_col, double temperature,
                      ContrastiveResult* result, EncoderGrad* grad) {
    const std::size_t B = queries.size();
    const std::size_t P = passages.size();
    if (B < 2) throw DataError("contrastive batch must have at least 2 rows");
    if (target_col.size() != B)
        throw DataError("target column list does not match the batch");
    if (temperature <= 0.0) throw DataError("temperature must be positive");

    {
        std::unordered_set<std::string> seen;
        for (std::size_t b = 0; b < B; ++b) {
            const int c = target_col[b];
            if (c < 0 || static_cast<std::size_t>(c) >= P)
                throw DataError("target column out of range");
            if (!seen.insert(passages[static_cast<std::size_t>(c)]).second)
                throw DataError("duplicate positive passage in batch");
        }
    }

    std::vector<EncodedText> eq(B), ep(P);
    for (std::size_t b = 0; b < B; ++b) {
        eq[b] = encode_ids(params, text_token_rows(params, queries[b]));
        if (eq[b].degenerate || eq[b].norm == 0.0)
            throw DataError("degenerate query embedding in batch: '" + queries[b] + "'");
    }
    for (std::size_t j = 0; j < P; ++j) {
        ep[j] = encode_ids(params, text_token_rows(params, passages[j]));
        if (ep[j].degenerate || ep[j].norm == 0.0)
            throw DataError("degenerate passage embedding in batch: '" + passages[j] + "'");
    }

    Matrix scores(B, P);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < P; ++j) {
            double dot = 0.0;
            for (int k = 0; k < params.output_dim; ++k)
                dot += eq[b].out[static_cast<std::size_t>(k)] *
                       ep[j].out[static_cast<std::size_t>(k)];
            scores.at(b, j) = dot / (eq[b].norm * ep[j].norm);
        }

    // Row-wise stable softmax over scores / tau.
    Matrix softmax(B, P);
    std::vector<double> row_losses(B, 0.0);
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        double mx = scores.at(b, 0) / temperature;
        for (std::size_t j = 1; j < P; ++j)
            mx = std::max(mx, scores.at(b, j) / temperature);
        double denom = 0.0;
        for (std::size_t j = 0; j < P; ++j) {
            const double z = std::exp(scores.at(b, j) / temperature - mx);
            softmax.at(b, j) = z;
            denom += z;
        }
        for (std::size_t j = 0; j < P; ++j) softmax.at(b, j) /= denom;
        const double lse = mx + std::log(denom);
        row_losses[b] =
            lse - scores.at(b, static_cast<std::size_t>(target_col[b])) / temperature;
        total += row_losses[b];
    }

    if (result) {
        result->loss = total / static_cast<double>(B);
        result->row_losses = std::move(row_losses);
        result->scores = scores;
    }
    if (!grad) return;

    grad->token_table = Matrix(params.token_table.rows, params.token_table.cols);
    grad->projection = Matrix(params.projection.rows, params.projection.cols);

    // dL/ds[b][j] then chain through the cosine into both embeddings.
    const double scale = 1.0 / (static_cast<double>(B) * temperature);
    std::vector<std::vector<double>> g_eq(B), g_ep(P);
    for (std::size_t b = 0; b < B; ++b)
        g_eq[b].assign(static_cast<std::size_t>(params.output_dim), 0.0);
    for (std::size_t j = 0; j < P; ++j)
        g_ep[j].assign(static_cast<std::size_t>(params.output_dim), 0.0);

    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t j = 0; j < P; ++j) {
            double gs = softmax.at(b, j) * scale;
            if (static_cast<int>(j) == target_col[b]) gs -= scale;
            if (gs == 0.0) continue;
            const double s = scores.at(b, j);
            for (int k = 0; k < params.output_dim; ++k) {
                const auto ku = static_cast<std::size_t>(k);
                const double qh = eq[b].out[ku] / eq[b].norm;
                const double ph = ep[j].out[ku] / ep[j].norm;
                g_eq[b][ku] += gs * (ph - s * qh) / eq[b].norm;
                g_ep[j][ku] += gs * (qh - s * ph) / ep[j].norm;
            }
        }
    }

    for (std::size_t b = 0; b < B; ++b)
        backprop_embedding(params, eq[b], g_eq[b], grad->token_table, grad->projection);
    for (std::size_t j = 0; j < P; ++j)
        backprop_embedding(params, ep[j], g_ep[j], grad->token_table, grad->projection);
}

} // namespace

EncoderParams EncoderParams::random(std::vector<std::string> vocab, int embed_dim,
                                    int output_dim, int hash_buckets,
                                    std::uint64_t seed, bool with_separator) {
    if (embed_dim < 1 || output_dim < 1)
        throw DataError("encoder dims must be positive");
    if (hash_buckets < 1) throw DataError("need at least one hash bucket");
    EncoderParams p;
    p.embed_dim = embed_dim;
    p.output_dim = output_dim;
    p.hash_buckets = hash_buckets;
    p.seed = seed;
    p.with_separator = with_separator;
    p.vocab = std::move(vocab);
    p.rebuild_vocab_index();

    Rng rng(seed);
    const double stddev = 0.02;
    p.token_table = Matrix(static_cast<std::size_t>(p.table_rows()),
                           static_cast<std::size_t>(embed_dim));
    for (double& v : p.token_table.data) v = rng.next_gaussian() * stddev;
    p.projection = Matrix(static_cast<std::size_t>(embed_dim),
                          static_cast<std::size_t>(output_dim));
    for (double& v : p.projection.data) v = rng.next_gaussian() * stddev;
    return p;
}

int EncoderParams::table_rows() const {
    return static_cast<int>(vocab.size()) + hash_buckets + (with_separator ? 1 : 0);
}

int EncoderParams::separator_row() const {
    return static_cast<int>(vocab.size()) + hash_buckets;
}

int EncoderParams::token_row(const std::string& token) const {
    auto it = vocab_index_.find(token);
    if (it != vocab_index_.end()) return it->second;
    return static_cast<int>(vocab.size()) +
           static_cast<int>(mult31(token) % static_cast<std::uint64_t>(hash_buckets));
}

void EncoderParams::rebuild_vocab_index() {
    vocab_index_.clear();
    for (std::size_t i = 0; i < vocab.size(); ++i)
        vocab_index_[vocab[i]] = static_cast<int>(i);
}

RerankerParams RerankerParams::random(std::vector<std::string> vocab, int embed_dim,
                                      int output_dim, int hash_buckets,
                                      std::uint64_t seed) {
    RerankerParams rp;
    rp.embedder = EncoderParams::random(std::move(vocab), embed_dim, output_dim,
                                        hash_buckets, seed, /*with_separator=*/true);
    Rng rng(splitmix64(seed ^ 0x77617665ULL));
    rp.w.assign(static_cast<std::size_t>(output_dim), 0.0);
    for (double& v : rp.w) v = rng.next_gaussian() * 0.02;
    return rp;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : lowercase_ascii(text)) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> build_vocab(const std::vector<std::string>& texts,
                                     std::size_t max_size) {
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& t : texts)
        for (auto& tok : tokenize(t)) ++freq[tok];
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > max_size) ranked.resize(max_size);
    std::vector<std::string> vocab;
    vocab.reserve(ranked.size());
    for (auto& r : ranked) vocab.push_back(std::move(r.first));
    std::sort(vocab.begin(), vocab.end());
    return vocab;
}

Embedding encode(const EncoderParams& params, const std::string& text) {
    return to_embedding(encode_ids(params, text_token_rows(params, text)));
}

double cosine_score(const Embedding& a, const Embedding& b) {
    if (a.degenerate || b.degenerate || a.norm == 0.0 || b.norm == 0.0)
        throw DataError("cosine score of a degenerate embedding is undefined");
    double dot = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) dot += a.values[k] * b.values[k];
    return dot / (a.norm * b.norm);
}

ContrastiveResult contrastive_loss(
    const EncoderParams& params,
    const std::vector<std::pair<std::string, std::string>>& batch,
    double temperature) {
    std::vector<std::string> queries, passages;
    std::vector<int> targets;
    for (const auto& [q, p] : batch) {
        targets.push_back(static_cast<int>(passages.size()));
        queries.push_back(q);
        passages.push_back(p);
    }
    ContrastiveResult result;
    contrastive_core(params, queries, passages, targets, temperature, &result,
                     nullptr);
    return result;
}

ContrastiveResult contrastive_loss_general(const EncoderParams& params,
                                           const std::vector<std::string>& queries,
                                           const std::vector<std::string>& passages,
                                           const std::vector<int>& target_col,
                                           double temperature) {
    ContrastiveResult result;
    contrastive_core(params, queries, passages, target_col, temperature, &result,
                     nullptr);
    return result;
}

EncoderGrad contrastive_grad(
    const EncoderParams& params,
    const std::vector<std::pair<std::string, std::string>>& batch,
    double temperature) {
    std::vector<std::string> queries, passages;
    std::vector<int> targets;
    for (const auto& [q, p] : batch) {
        targets.push_back(static_cast<int>(passages.size()));
        queries.push_back(q);
        passages.push_back(p);
    }
    EncoderGrad grad;
    contrastive_core(params, queries, passages, targets, temperature, nullptr,
                     &grad);
    return grad;
}

EncoderGrad contrastive_grad_general(const EncoderParams& params,
                                     const std::vector<std::string>& queries,
                                     const std::vector<std::string>& passages,
                                     const std::vector<int>& target_col,
                                     double temperature) {
    EncoderGrad grad;
    contrastive_core(params, queries, passages, target_col, temperature, nullptr,
                     &grad);
    return grad;
}

namespace {

std::vector<int> joint_token_rows(const RerankerParams& rp, const std::string& query,
                                  const std::string& passage) {
    std::vector<int> ids = text_token_rows(rp.embedder, query);
    ids.push_back(rp.embedder.separator_row());
    for (int id : text_token_rows(rp.embedder, passage)) ids.push_back(id);
    return ids;
}

double score_encoded(const RerankerParams& rp, const EncodedText& enc) {
    double s = 0.0;
    for (int j = 0; j < rp.embedder.output_dim; ++j)
        s += rp.w[static_cast<std::size_t>(j)] * enc.out[static_cast<std::size_t>(j)];
    return s;
}

} // namespace

Embedding encode_joint(const RerankerParams& params, const std::string& query,
                       const std::string& passage) {
    return to_embedding(
        encode_ids(params.embedder, joint_token_rows(params, query, passage), true));
}

double rerank_score(const RerankerParams& params, const std::string& query,
                    const std::string& passage) {
    return score_encoded(
        params, encode_ids(params.embedder, joint_token_rows(params, query, passage), true));
}

RerankerLoss reranker_loss(const RerankerParams& params, const std::string& query,
                           const std::string& positive,
                           const std::vector<std::string>& negatives) {
    if (negatives.empty()) throw DataError("reranker loss needs at least one negative");
    RerankerLoss loss;
    loss.positive_term = softplus(-rerank_score(params, query, positive));
    double acc = 0.0;
    for (const auto& n : negatives) acc += softplus(rerank_score(params, query, n));
    loss.negative_term = acc / static_cast<double>(negatives.size());
    loss.total = loss.positive_term + loss.negative_term;
    return loss;
}

RerankerGrad reranker_grad(const RerankerParams& params, const std::string& query,
                           const std::string& positive,
                           const std::vector<std::string>& negatives) {
    if (negatives.empty()) throw DataError("reranker grad needs at least one negative");
    const EncoderParams& ep = params.embedder;
    RerankerGrad grad;
    grad.token_table = Matrix(ep.token_table.rows, ep.token_table.cols);
    grad.projection = Matrix(ep.projection.rows, ep.projection.cols);
    grad.w.assign(static_cast<std::size_t>(ep.output_dim), 0.0);

    auto accumulate = [&](const std::string& passage, bool is_positive) {
        EncodedText enc = encode_ids(ep, joint_token_rows(params, query, passage), true);
        const double s = score_encoded(params, enc);
        // d/ds of -log sigmoid(s) is sigmoid(s) - 1; for a negative,
        // d/ds of -log(1 - sigmoid(s)) is sigmoid(s), weighted by 1/|N|.
        const double gs = is_positive
                              ? stable_sigmoid(s) - 1.0
                              : stable_sigmoid(s) / static_cast<double>(negatives.size());
        std::vector<double> g_e(static_cast<std::size_t>(ep.output_dim));
        for (int j = 0; j < ep.output_dim; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            grad.w[ju] += gs * enc.out[ju];
            g_e[ju] = gs * params.w[ju];
        }
        backprop_embedding(ep, enc, g_e, grad.token_table, grad.projection);
    };

    accumulate(positive, true);
    for (const auto& n : negatives) accumulate(n, false);
    return grad;
}

std::pair<EncoderParams, TrainReport> train_dual_encoder(
    EncoderParams params, const std::vector<TrainPair>& examples,
    const TrainConfig& config) {
    if (examples.empty()) throw DataError("no training examples");
    if (config.batch_size < 2) throw DataError("batch size must be >= 2");

    TrainReport report;
    Rng rng(splitmix64(config.seed));
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int steps = 0;
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(
                order.size(), begin + static_cast<std::size_t>(config.batch_size));
            if (end - begin < 2) {
                ++report.skipped_batches;
                continue;
            }

            std::vector<std::string> queries, passages;
            std::vector<int> targets;
            bool duplicate = false;
            {
                std::unordered_set<std::string> seen;
                for (std::size_t i = begin; i < end; ++i)
                    if (!seen.insert(examples[order[i]].positive).second)
                        duplicate = true;
            }
            if (duplicate) {
                ++report.skipped_batches;
                continue;
            }
            for (std::size_t i = begin; i < end; ++i) {
                const TrainPair& ex = examples[order[i]];
                targets.push_back(static_cast<int>(passages.size()));
                queries.push_back(ex.query);
                passages.push_back(ex.positive);
            }
            for (std::size_t i = begin; i < end; ++i)
                for (const auto& neg : examples[order[i]].negatives)
                    passages.push_back(neg);

            ContrastiveResult result;
            EncoderGrad grad;
            contrastive_core(params, queries, passages, targets,
                             config.temperature, &result, &grad);
            if (!std::isfinite(result.loss))
                throw DataError("non-finite loss at epoch " + std::to_string(epoch) +
                                " step " + std::to_string(steps));
            epoch_loss += result.loss;
            ++steps;

            for (std::size_t i = 0; i < params.token_table.data.size(); ++i)
                params.token_table.data[i] -=
                    config.learning_rate * grad.token_table.data[i];
            for (std::size_t i = 0; i < params.projection.data.size(); ++i)
                params.projection.data[i] -=
                    config.learning_rate * grad.projection.data[i];
        }
        report.epoch_mean_loss.push_back(steps > 0 ? epoch_loss / steps : 0.0);
    }
    return {std::move(params), std::move(report)};
}

std::pair<RerankerParams, TrainReport> train_reranker(
    RerankerParams params, const std::vector<RerankTriplet>& triplets,
    const TrainConfig& config) {
    if (triplets.empty()) throw DataError("no training triplets");
    for (const auto& t : triplets)
        if (t.negatives.empty())
            throw DataError("training triplet without negatives");

    TrainReport report;
    Rng rng(splitmix64(config.seed));
    std::vector<std::size_t> order(triplets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t idx : order) {
            const RerankTriplet& t = triplets[idx];
            const RerankerLoss loss =
                reranker_loss(params, t.query, t.positive, t.negatives);
            if (!std::isfinite(loss.total))
                throw DataError("non-finite reranker loss at epoch " +
                                std::to_string(epoch));
            epoch_loss += loss.total;
            const RerankerGrad grad =
                reranker_grad(params, t.query, t.positive, t.negatives);
            for (std::size_t i = 0; i < params.embedder.token_table.data.size(); ++i)
                params.embedder.token_table.data[i] -=
                    config.learning_rate * grad.token_table.data[i];
            for (std::size_t i = 0; i < params.embedder.projection.data.size(); ++i)
                params.embedder.projection.data[i] -=
                    config.learning_rate * grad.projection.data[i];
            for (std::size_t i = 0; i < params.w.size(); ++i)
                params.w[i] -= config.learning_rate * grad.w[i];
        }
        report.epoch_mean_loss.push_back(epoch_loss /
                                         static_cast<double>(triplets.size()));
    }
    return {std::move(params), std::move(report)};
}

namespace {

json encoder_to_json(const EncoderParams& p, const char* kind) {
    return json{{"format", "dialogkit.params.v1"},
                {"kind", kind},
                {"embed_dim", p.embed_dim},
                {"output_dim", p.output_dim},
                {"hash_buckets", p.hash_buckets},
                {"seed", p.seed},
                {"with_separator", p.with_separator},
                {"vocab", p.vocab},
                {"token_table", p.token_table.data},
                {"projection", p.projection.data}};
}

EncoderParams encoder_from_json(const json& rec, const char* kind) {
    if (rec.value("format", std::string{}) != "dialogkit.params.v1")
        throw DataError("unsupported params file format");
    if (rec.value("kind", std::string{}) != kind)
        throw DataError("params file kind mismatch: expected " + std::string(kind));
    EncoderParams p;
    p.embed_dim = rec.at("embed_dim").get<int>();
    p.output_dim = rec.at("output_dim").get<int>();
    p.hash_buckets = rec.at("hash_buckets").get<int>();
    p.seed = rec.at("seed").get<std::uint64_t>();
    p.with_separator = rec.at("with_separator").get<bool>();
    p.vocab = rec.at("vocab").get<std::vector<std::string>>();
    p.rebuild_vocab_index();
    p.token_table = Matrix(static_cast<std::size_t>(p.table_rows()),
                           static_cast<std::size_t>(p.embed_dim));
    p.token_table.data = rec.at("token_table").get<std::vector<double>>();
    p.projection = Matrix(static_cast<std::size_t>(p.embed_dim),
                          static_cast<std::size_t>(p.output_dim));
    p.projection.data = rec.at("projection").get<std::vector<double>>();
    if (p.token_table.data.size() != p.token_table.rows * p.token_table.cols ||
        p.projection.data.size() != p.projection.rows * p.projection.cols)
        throw DataError("params file has inconsistent matrix shapes");
    for (double v : p.token_table.data)
        if (!std::isfinite(v)) throw DataError("non-finite token table entry");
    for (double v : p.projection.data)
        if (!std::isfinite(v)) throw DataError("non-finite projection entry");
    return p;
}

void write_json_file(const std::string& path, const json& rec) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write params file: " + path);
    out << rec.dump() << '\n';
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open params file: " + path);
    try {
        json rec;
        in >> rec;
        return rec;
    } catch (const json::exception& e) {
        throw DataError("bad params file " + path + ": " + e.what());
    }
}

} // namespace

void save_encoder_params(const std::string& path, const EncoderParams& params) {
    write_json_file(path, encoder_to_json(params, "dual_encoder"));
}

EncoderParams load_encoder_params(const std::string& path) {
    return encoder_from_json(read_json_file(path), "dual_encoder");
}

void save_reranker_params(const std::string& path, const RerankerParams& params) {
    json rec = encoder_to_json(params.embedder, "reranker");
    rec["w"] = params.w;
    write_json_file(path, rec);
}

RerankerParams load_reranker_params(const std::string& path) {
    const json rec = read_json_file(path);
    RerankerParams rp;
    rp.embedder = encoder_from_json(rec, "reranker");
    rp.w = rec.at("w").get<std::vector<double>>();
    if (rp.w.size() != static_cast<std::size_t>(rp.embedder.output_dim))
        throw DataError("reranker weight vector has the wrong length");
    return rp;
}

std::uint64_t params_fingerprint(const EncoderParams& params) {
    return fnv1a64(encoder_to_json(params, "dual_encoder").dump());
}

void save_loss_curve(const std::string& path, const TrainReport& report) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write loss curve: " + path);
    out << "epoch,mean_loss\n";
    out.precision(17);
    for (std::size_t e = 0; e < report.epoch_mean_loss.size(); ++e)
        out << e + 1 << ',' << report.epoch_mean_loss[e] << '\n';
}

} // namespace dialogkit
