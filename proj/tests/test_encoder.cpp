#include "dialogkit/encoder.hpp"

#include "dialogkit/error.hpp"
#include "dialogkit/rng.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdio>

using namespace dialogkit;

namespace {

const std::vector<std::string> kVocab = {"alpha", "beta",  "gamma", "delta",
                                         "eps",   "zeta",  "eta",   "theta"};

EncoderParams small_params(std::uint64_t seed) {
    return EncoderParams::random(kVocab, 8, 8, 4, seed);
}

/// Two-token orthonormal setup: "a" -> (1,0), "b" -> (0,1), identity
/// projection. Cosine scores become exact 0/1.
EncoderParams crafted_params() {
    EncoderParams p = EncoderParams::random({"a", "b"}, 2, 2, 1, 1);
    for (double& v : p.token_table.data) v = 0.0;
    p.token_table.at(0, 0) = 1.0; // "a"
    p.token_table.at(1, 1) = 1.0; // "b"
    for (double& v : p.projection.data) v = 0.0;
    p.projection.at(0, 0) = 1.0;
    p.projection.at(1, 1) = 1.0;
    return p;
}

std::string random_text(Rng& rng, int min_tokens, int max_tokens) {
    const int n = min_tokens + static_cast<int>(rng.below(
                      static_cast<std::uint64_t>(max_tokens - min_tokens + 1)));
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += kVocab[rng.below(kVocab.size())];
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> random_batch(Rng& rng, int size) {
    std::vector<std::pair<std::string, std::string>> batch;
    for (int b = 0; b < size; ++b) {
        // a unique token pins each positive apart from the others
        batch.emplace_back(random_text(rng, 1, 3),
                           random_text(rng, 1, 4) + " uniq" + std::to_string(b));
    }
    return batch;
}

double relative_error(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-6});
    return std::fabs(a - b) / scale;
}

/// Max relative error between an analytic gradient buffer and central
/// finite differences of `loss` over the same parameter buffer.
template <typename LossFn>
double max_fd_error(std::vector<double>& buffer, const std::vector<double>& analytic,
                    LossFn loss, double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        const double orig = buffer[i];
        buffer[i] = orig + h;
        const double up = loss();
        buffer[i] = orig - h;
        const double down = loss();
        buffer[i] = orig;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, relative_error(analytic[i], fd));
    }
    return worst;
}

} // namespace

TEST_CASE("mean pooling collapses repeated tokens") {
    const EncoderParams p = small_params(3);
    const Embedding one = encode(p, "alpha");
    const Embedding three = encode(p, "alpha alpha alpha");
    REQUIRE(one.values.size() == three.values.size());
    for (std::size_t i = 0; i < one.values.size(); ++i)
        CHECK(one.values[i] == doctest::Approx(three.values[i]).epsilon(1e-12));
}

TEST_CASE("empty text encodes to a degenerate zero vector") {
    const EncoderParams p = small_params(3);
    const Embedding e = encode(p, "");
    CHECK(e.degenerate);
    CHECK(e.norm == 0.0);
    for (double v : e.values) CHECK(v == 0.0);
    CHECK_THROWS_AS(cosine_score(e, encode(p, "alpha")), DataError);
}

TEST_CASE("different seeds give different embeddings") {
    const Embedding a = encode(small_params(3), "alpha beta");
    const Embedding b = encode(small_params(4), "alpha beta");
    bool any_different = false;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        if (a.values[i] != b.values[i]) any_different = true;
    CHECK(any_different);
}

TEST_CASE("cosine score basics") {
    const EncoderParams p = crafted_params();
    const Embedding ea = encode(p, "a");
    const Embedding eb = encode(p, "b");
    CHECK(cosine_score(ea, ea) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_score(ea, eb) == doctest::Approx(0.0).epsilon(1e-12));

    Embedding scaled = ea;
    for (double& v : scaled.values) v *= 7.5;
    scaled.norm *= 7.5;
    CHECK(cosine_score(scaled, eb) ==
          doctest::Approx(cosine_score(ea, eb)).epsilon(1e-12));
}

TEST_CASE("score-constant batches hit ln B exactly") {
    // one hash bucket and no vocabulary: every token shares one embedding,
    // so all cosine scores are equal while the positive texts stay distinct
    EncoderParams p = EncoderParams::random({}, 8, 8, 1, 5);
    for (int B : {2, 4, 8}) {
        std::vector<std::pair<std::string, std::string>> batch;
        for (int b = 0; b < B; ++b)
            batch.emplace_back("query " + std::to_string(b),
                               "passage " + std::to_string(b));
        for (double tau : {1.0, 0.01}) {
            const auto result = contrastive_loss(p, batch, tau);
            CHECK(std::fabs(result.loss - std::log(static_cast<double>(B))) < 1e-9);
        }
    }
}

TEST_CASE("closed-form two-row batch") {
    const EncoderParams p = crafted_params();
    const auto result =
        contrastive_loss(p, {{"a", "a"}, {"b", "b"}}, /*temperature=*/1.0);
    REQUIRE(result.row_losses.size() == 2);
    const double expected = std::log(1.0 + std::exp(-1.0));
    CHECK(result.row_losses[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(result.scores.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(result.scores.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("batch order does not change the loss") {
    const EncoderParams p = small_params(6);
    Rng rng(17);
    auto batch = random_batch(rng, 4);
    const double base = contrastive_loss(p, batch, 0.5).loss;
    std::swap(batch[0], batch[3]);
    std::swap(batch[1], batch[2]);
    CHECK(contrastive_loss(p, batch, 0.5).loss ==
          doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("degenerate rows and duplicate positives are rejected") {
    const EncoderParams p = small_params(6);
    CHECK_THROWS_AS(contrastive_loss(p, {{"", "alpha x"}, {"beta", "beta y"}}, 1.0),
                    DataError);
    CHECK_THROWS_AS(contrastive_loss(p, {{"alpha", "same"}, {"beta", "same"}}, 1.0),
                    DataError);
    CHECK_THROWS_AS(contrastive_loss(p, {{"alpha", "beta"}}, 1.0), DataError);
}

TEST_CASE("contrastive gradient matches central finite differences") {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (int batch_size : {2, 4}) {
            EncoderParams p = small_params(seed);
            Rng rng(seed * 977);
            const auto batch = random_batch(rng, batch_size);
            const double tau = seed % 2 ? 1.0 : 0.05;
            const EncoderGrad grad = contrastive_grad(p, batch, tau);
            auto loss = [&] { return contrastive_loss(p, batch, tau).loss; };
            worst = std::max(worst, max_fd_error(p.token_table.data,
                                                 grad.token_table.data, loss));
            worst = std::max(worst, max_fd_error(p.projection.data,
                                                 grad.projection.data, loss));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("cosine makes the loss invariant to scaling the projection") {
    EncoderParams p = small_params(9);
    Rng rng(41);
    const auto batch = random_batch(rng, 3);
    const double base = contrastive_loss(p, batch, 1.0).loss;

    EncoderParams scaled = p;
    for (double& v : scaled.projection.data) v *= 3.0;
    CHECK(contrastive_loss(scaled, batch, 1.0).loss ==
          doctest::Approx(base).epsilon(1e-9));

    // so the gradient has no component along the scaling direction
    const EncoderGrad grad = contrastive_grad(p, batch, 1.0);
    double along = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < p.projection.data.size(); ++i) {
        along += grad.projection.data[i] * p.projection.data[i];
        norm += std::fabs(grad.projection.data[i]);
    }
    CHECK(std::fabs(along) < 1e-12 * std::max(1.0, norm));
    CHECK(norm > 0.0); // not because the gradient vanished
}

TEST_CASE("mined negatives join the candidate pool") {
    const EncoderParams p = small_params(12);
    const std::vector<std::string> queries = {"alpha", "beta"};
    const std::vector<std::string> positives = {"alpha pos", "beta pos"};
    const auto base =
        contrastive_loss_general(p, queries, positives, {0, 1}, 1.0);
    CHECK(base.scores.cols == 2);

    std::vector<std::string> with_negs = positives;
    with_negs.push_back("gamma hard negative");
    const auto extended =
        contrastive_loss_general(p, queries, with_negs, {0, 1}, 1.0);
    CHECK(extended.scores.cols == 3);
    CHECK(extended.loss > base.loss - 1e-12); // denominator only grows
}

TEST_CASE("dual-encoder training learns a separable toy corpus") {
    // disjoint vocabularies per passage make the task separable
    std::vector<TrainPair> examples;
    for (int i = 0; i < 8; ++i) {
        const std::string topic = "topic" + std::to_string(i);
        examples.push_back({"what about " + topic + "?",
                            topic + " fact one. " + topic + " fact two.",
                            "p" + std::to_string(i),
                            {}});
    }
    std::vector<std::string> texts;
    for (const auto& ex : examples) {
        texts.push_back(ex.query);
        texts.push_back(ex.positive);
    }
    EncoderParams init = EncoderParams::random(build_vocab(texts, 1000), 8, 8,
                                               16, 21);
    TrainConfig config;
    config.temperature = 0.05;
    config.batch_size = 4;
    config.learning_rate = 0.5;
    config.epochs = 30;
    config.seed = 2;

    const auto [trained, report] = train_dual_encoder(init, examples, config);
    REQUIRE(report.epoch_mean_loss.size() == 30);
    CHECK(report.epoch_mean_loss.back() < report.epoch_mean_loss.front());

    SUBCASE("zero learning rate is a no-op") {
        TrainConfig frozen = config;
        frozen.learning_rate = 0.0;
        const auto [same, unused] = train_dual_encoder(init, examples, frozen);
        CHECK(same.token_table.data == init.token_table.data);
        CHECK(same.projection.data == init.projection.data);
    }
    SUBCASE("training is seed-deterministic") {
        const auto [again, unused] = train_dual_encoder(init, examples, config);
        CHECK(again.token_table.data == trained.token_table.data);
        CHECK(again.projection.data == trained.projection.data);
    }
}

TEST_CASE("rerank score is linear in w and order-sensitive") {
    RerankerParams rp = RerankerParams::random(kVocab, 8, 8, 4, 31);
    const double s = rerank_score(rp, "alpha beta", "gamma");

    RerankerParams zero = rp;
    for (double& v : zero.w) v = 0.0;
    CHECK(rerank_score(zero, "alpha beta", "gamma") == 0.0);

    RerankerParams doubled = rp;
    for (double& v : doubled.w) v *= 2.0;
    CHECK(rerank_score(doubled, "alpha beta", "gamma") ==
          doctest::Approx(2.0 * s).epsilon(1e-12));

    // joint encoding sees which side of the separator a token is on
    bool any_asymmetric = false;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RerankerParams r = RerankerParams::random(kVocab, 8, 8, 4, seed);
        if (std::fabs(rerank_score(r, "alpha", "beta gamma") -
                      rerank_score(r, "beta gamma", "alpha")) > 1e-12)
            any_asymmetric = true;
    }
    CHECK(any_asymmetric);
}

TEST_CASE("reranker loss anchors") {
    RerankerParams rp = RerankerParams::random(kVocab, 8, 8, 4, 33);
    for (double& v : rp.w) v = 0.0; // all scores exactly zero

    const auto one = reranker_loss(rp, "alpha", "beta", {"gamma"});
    CHECK(std::fabs(one.total - 2.0 * std::log(2.0)) < 1e-12);

    const auto four = reranker_loss(rp, "alpha", "beta",
                                    {"gamma", "delta", "eps", "zeta"});
    CHECK(std::fabs(four.negative_term - std::log(2.0)) < 1e-12);
    CHECK(std::fabs(four.total - 2.0 * std::log(2.0)) < 1e-12);

    CHECK_THROWS_AS(reranker_loss(rp, "alpha", "beta", {}), DataError);
}

TEST_CASE("saturated scores drive the loss to zero") {
    // one-token texts with hand-set rows: the positive projects along +w,
    // the negative along -w, both far out
    RerankerParams rp = RerankerParams::random({"p", "n"}, 2, 2, 1, 7);
    for (double& v : rp.embedder.token_table.data) v = 0.0;
    rp.embedder.token_table.at(0, 0) = 100.0;  // "p"
    rp.embedder.token_table.at(1, 0) = -100.0; // "n"
    for (double& v : rp.embedder.projection.data) v = 0.0;
    rp.embedder.projection.at(0, 0) = 1.0;
    rp.embedder.projection.at(1, 1) = 1.0;
    rp.w = {1.0, 0.0};
    const auto loss = reranker_loss(rp, "", "p", {"n"});
    CHECK(loss.total < 1e-12);
}

TEST_CASE("reranker gradient matches central finite differences") {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        RerankerParams rp = RerankerParams::random(kVocab, 8, 8, 4, seed);
        Rng rng(seed * 1319);
        const std::string query = random_text(rng, 1, 3);
        const std::string positive = random_text(rng, 1, 4);
        std::vector<std::string> negatives;
        for (int i = 0; i < 1 + static_cast<int>(seed % 3); ++i)
            negatives.push_back(random_text(rng, 1, 4));

        const RerankerGrad grad = reranker_grad(rp, query, positive, negatives);
        auto loss = [&] {
            return reranker_loss(rp, query, positive, negatives).total;
        };
        worst = std::max(worst, max_fd_error(rp.embedder.token_table.data,
                                             grad.token_table.data, loss));
        worst = std::max(worst, max_fd_error(rp.embedder.projection.data,
                                             grad.projection.data, loss));
        worst = std::max(worst, max_fd_error(rp.w, grad.w, loss));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("w-gradient matches the hand formula on a one-token vocabulary") {
    RerankerParams rp = RerankerParams::random({"x"}, 2, 2, 1, 13);
    const std::string query = ""; // separator plus passage tokens only
    const std::string positive = "x";
    const std::vector<std::string> negatives = {"x x"};

    const auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const Embedding ep = encode_joint(rp, query, positive);
    const Embedding en = encode_joint(rp, query, negatives[0]);
    const double sp = rerank_score(rp, query, positive);
    const double sn = rerank_score(rp, query, negatives[0]);

    const RerankerGrad grad = reranker_grad(rp, query, positive, negatives);
    for (std::size_t j = 0; j < rp.w.size(); ++j) {
        const double expected =
            (sigmoid(sp) - 1.0) * ep.values[j] + sigmoid(sn) * en.values[j];
        CHECK(grad.w[j] == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("reranker training mirrors the dual-encoder properties") {
    std::vector<RerankTriplet> triplets;
    for (int i = 0; i < 6; ++i) {
        const std::string topic = "topic" + std::to_string(i);
        triplets.push_back({"about " + topic, topic + " body text",
                            {"unrelated filler " + std::to_string(i + 1)}});
    }
    std::vector<std::string> texts;
    for (const auto& t : triplets) {
        texts.push_back(t.query);
        texts.push_back(t.positive);
        texts.push_back(t.negatives[0]);
    }
    RerankerParams init =
        RerankerParams::random(build_vocab(texts, 1000), 8, 8, 8, 3);
    TrainConfig config;
    config.learning_rate = 0.5;
    config.epochs = 25;
    config.seed = 5;

    const auto [trained, report] = train_reranker(init, triplets, config);
    CHECK(report.epoch_mean_loss.back() < report.epoch_mean_loss.front());

    TrainConfig frozen = config;
    frozen.learning_rate = 0.0;
    const auto [same, unused1] = train_reranker(init, triplets, frozen);
    CHECK(same.embedder.token_table.data == init.embedder.token_table.data);
    CHECK(same.w == init.w);

    const auto [again, unused2] = train_reranker(init, triplets, config);
    CHECK(again.embedder.token_table.data == trained.embedder.token_table.data);
    CHECK(again.w == trained.w);
}

TEST_CASE("params survive a save/load round trip") {
    const EncoderParams p = small_params(77);
    save_encoder_params("test_params.json", p);
    const EncoderParams back = load_encoder_params("test_params.json");
    CHECK(back.token_table.data == p.token_table.data);
    CHECK(back.projection.data == p.projection.data);
    CHECK(back.vocab == p.vocab);
    CHECK(params_fingerprint(back) == params_fingerprint(p));
    CHECK(back.token_row("alpha") == p.token_row("alpha"));
    CHECK(back.token_row("never-seen-token") == p.token_row("never-seen-token"));

    RerankerParams rp = RerankerParams::random(kVocab, 8, 8, 4, 78);
    save_reranker_params("test_rparams.json", rp);
    const RerankerParams rback = load_reranker_params("test_rparams.json");
    CHECK(rback.w == rp.w);
    CHECK(rback.embedder.token_table.data == rp.embedder.token_table.data);
    CHECK_THROWS_AS(load_encoder_params("test_rparams.json"), DataError);

    std::remove("test_params.json");
    std::remove("test_rparams.json");
}
