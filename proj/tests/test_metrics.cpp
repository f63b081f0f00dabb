#include "dialogkit/metrics.hpp"

#include "dialogkit/error.hpp"
#include "naive_metrics.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

using namespace dialogkit;

namespace {

RunRow row(const std::string& qid, const std::vector<std::string>& docs) {
    RunRow r{qid, {}};
    for (std::size_t i = 0; i < docs.size(); ++i)
        r.ranking.emplace_back(docs[i], 1.0 / (static_cast<double>(i) + 1.0));
    return r;
}

} // namespace

TEST_CASE("reciprocal rank with and without a cutoff") {
    const RunRow r = row("q", {"d1", "d2", "d3", "d4", "d5", "d6", "d7"});
    CHECK(reciprocal_rank(r, {"d1"}, kNoCutoff) == 1.0);
    CHECK(reciprocal_rank(r, {"d3"}, 5) == doctest::Approx(1.0 / 3.0));
    CHECK(reciprocal_rank(r, {"d7"}, 5) == 0.0);
    CHECK(reciprocal_rank(r, {"d7"}, kNoCutoff) == doctest::Approx(1.0 / 7.0));
    CHECK(reciprocal_rank(r, {}, kNoCutoff) == 0.0);
}

TEST_CASE("mrr averages per-query reciprocal ranks") {
    RunRanking run;
    run.rows.push_back(row("q1", {"good", "x"}));
    run.rows.push_back(row("q2", {"x", "good"}));
    Qrels qrels;
    qrels.grades["q1"]["good"] = 1;
    qrels.grades["q2"]["good"] = 1;
    CHECK(mrr(run, qrels, 1) == doctest::Approx(0.75));

    SUBCASE("grade cutoff ignores weak judgments") {
        qrels.grades["q1"]["good"] = 2;
        qrels.grades["q2"]["x"] = 1;
        qrels.grades["q2"]["good"] = 2;
        CHECK(mrr(run, qrels, 2) == doctest::Approx(0.75));
        CHECK(mrr(run, qrels, 1) == doctest::Approx(1.0)); // x now counts for q2
    }
    SUBCASE("no judged positives anywhere") {
        Qrels empty;
        empty.grades["q1"]; // judged query, no positive docs
        empty.grades["q2"];
        CHECK(mrr(run, empty, 1) == 0.0);
    }
    SUBCASE("queries absent from the qrels are skipped") {
        run.rows.push_back(row("mystery", {"good"}));
        CHECK(mrr(run, qrels, 1) == doctest::Approx(0.75));
    }
    SUBCASE("empty intersection is an error") {
        RunRanking stranger;
        stranger.rows.push_back(row("unknown", {"d"}));
        CHECK_THROWS_AS(mrr(stranger, qrels, 1), DataError);
    }
}

TEST_CASE("recall at k") {
    RunRanking run;
    run.rows.push_back(row("q", {"a", "b", "c"}));
    Qrels qrels;
    qrels.grades["q"]["a"] = 1;
    qrels.grades["q"]["far"] = 1; // judged positive, never retrieved
    CHECK(recall_at_k(run, qrels, 10, 1) == doctest::Approx(0.5));

    qrels.grades["q"].erase("far");
    CHECK(recall_at_k(run, qrels, 10, 1) == doctest::Approx(1.0));

    // a zero-positive query drops out of the mean entirely
    run.rows.push_back(row("empty", {"a"}));
    Qrels with_empty = qrels;
    with_empty.grades["empty"]["a"] = 0;
    CHECK(recall_at_k(run, with_empty, 10, 1) == doctest::Approx(1.0));
}

TEST_CASE("ndcg closed-form cases") {
    RunRanking run;
    run.rows.push_back(row("q", {"low", "high"}));
    Qrels qrels;
    qrels.grades["q"]["low"] = 0;
    qrels.grades["q"]["high"] = 3;

    // exponential gain: DCG = 7/log2(3), ideal = 7, so 1/log2(3)
    const double expected = 1.0 / std::log2(3.0);
    CHECK(ndcg_at_k(run, qrels, 3, Gain::Exponential) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(ndcg_at_k(run, qrels, 3, Gain::Linear) ==
          doctest::Approx(expected).epsilon(1e-12)); // single gainful doc

    // already grade-sorted ranking is ideal; any inversion of distinct
    // gains scores strictly below one
    RunRanking sorted;
    sorted.rows.push_back(row("q", {"high", "low"}));
    CHECK(ndcg_at_k(sorted, qrels, 3, Gain::Exponential) == doctest::Approx(1.0));
    CHECK(ndcg_at_k(run, qrels, 3, Gain::Exponential) < 1.0);

    // k beyond the ranking length uses what exists
    CHECK(ndcg_at_k(run, qrels, 100, Gain::Exponential) ==
          doctest::Approx((7.0 / std::log2(3.0)) / 7.0));
}

TEST_CASE("metric spec parsing") {
    const auto specs = parse_metric_specs("mrr@5,r@10,ndcg@3", 1, Gain::Exponential);
    REQUIRE(specs.size() == 3);
    CHECK(specs[0].name == "mrr");
    CHECK(specs[0].cutoff == 5);
    CHECK(specs[1].name == "recall");
    CHECK(specs[1].cutoff == 10);
    CHECK(specs[2].name == "ndcg");
    CHECK(specs[2].label() == "ndcg@3");
    CHECK(parse_metric_specs("mrr", 1, Gain::Exponential)[0].cutoff == kNoCutoff);
    CHECK_THROWS_AS(parse_metric_specs("f1@5", 1, Gain::Exponential), DataError);
    CHECK_THROWS_AS(parse_metric_specs("", 1, Gain::Exponential), DataError);
}

TEST_CASE("evaluate_run aggregates are the mean of per-query values") {
    Rng rng(2029);
    const auto instance = naive::random_instance(rng, 20, 60);
    const RunRanking run = naive::to_run(instance);
    const Qrels qrels = naive::to_qrels(instance);
    const auto report = evaluate_run(
        run, qrels, parse_metric_specs("mrr,mrr@5,r@10,ndcg@3", 1, Gain::Exponential));
    for (std::size_t m = 0; m < report.metrics.size(); ++m) {
        double sum = 0.0;
        for (const auto& [qid, v] : report.per_query[m]) sum += v;
        const double mean =
            report.per_query[m].empty()
                ? 0.0
                : sum / static_cast<double>(report.per_query[m].size());
        CHECK(std::fabs(mean - report.aggregates[m]) < 1e-12);
    }
}

TEST_CASE("library metrics equal the plain-loop reference") {
    Rng rng(4096);
    for (int trial = 0; trial < 25; ++trial) {
        const auto instance = naive::random_instance(rng, 20, 80);
        const RunRanking run = naive::to_run(instance);
        const Qrels qrels = naive::to_qrels(instance);
        for (int min_grade : {1, 2}) {
            CHECK(std::fabs(mrr(run, qrels, min_grade) -
                            naive::mrr(instance, min_grade, 0)) < 1e-12);
            CHECK(std::fabs(mrr(run, qrels, min_grade, 5) -
                            naive::mrr(instance, min_grade, 5)) < 1e-12);
            CHECK(std::fabs(recall_at_k(run, qrels, 10, min_grade) -
                            naive::recall(instance, 10, min_grade)) < 1e-12);
        }
        CHECK(std::fabs(ndcg_at_k(run, qrels, 3, Gain::Exponential) -
                        naive::ndcg(instance, 3, true)) < 1e-12);
        CHECK(std::fabs(ndcg_at_k(run, qrels, 3, Gain::Linear) -
                        naive::ndcg(instance, 3, false)) < 1e-12);
    }
}

TEST_CASE("a rank cutoff can only remove credit and values stay in [0,1]") {
    Rng rng(777);
    for (int trial = 0; trial < 20; ++trial) {
        const auto instance = naive::random_instance(rng, 15, 50);
        const RunRanking run = naive::to_run(instance);
        const Qrels qrels = naive::to_qrels(instance);
        const double full = mrr(run, qrels, 1);
        const double cut = mrr(run, qrels, 1, 5);
        CHECK(cut <= full + 1e-15);
        for (double v : {full, cut, recall_at_k(run, qrels, 10, 1),
                         ndcg_at_k(run, qrels, 3)}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("metrics are invariant under doc id relabeling") {
    Rng rng(31337);
    const auto instance = naive::random_instance(rng, 10, 40);
    RunRanking run = naive::to_run(instance);
    Qrels qrels = naive::to_qrels(instance);
    const double base_mrr = mrr(run, qrels, 1);
    const double base_ndcg = ndcg_at_k(run, qrels, 3);

    auto relabel = [](const std::string& doc) { return "XX-" + doc + "-YY"; };
    for (auto& r : run.rows)
        for (auto& [doc, score] : r.ranking) doc = relabel(doc);
    Qrels relabeled;
    for (const auto& [qid, judged] : qrels.grades)
        for (const auto& [doc, grade] : judged)
            relabeled.grades[qid][relabel(doc)] = grade;

    CHECK(mrr(run, relabeled, 1) == doctest::Approx(base_mrr).epsilon(1e-15));
    CHECK(ndcg_at_k(run, relabeled, 3) == doctest::Approx(base_ndcg).epsilon(1e-15));
}

TEST_CASE("qrels and run files parse and honor the rank field") {
    {
        std::ofstream out("test_qrels.txt");
        out << "q1 0 docA 2\nq1 0 docB 0\nq2 0 docC 1\n";
    }
    const Qrels qrels = load_qrels("test_qrels.txt");
    CHECK(qrels.grade("q1", "docA") == 2);
    CHECK(qrels.grade("q1", "docB") == 0);
    CHECK(qrels.grade("q1", "missing") == 0);

    {
        // ranks deliberately out of file order
        std::ofstream out("test_run.txt");
        out << "q1 Q0 docB 2 0.5 tag\n";
        out << "q1 Q0 docA 1 0.9 tag\n";
        out << "q1 Q0 docC 3 0.1 tag\n";
    }
    const RunRanking run = load_run("test_run.txt");
    REQUIRE(run.rows.size() == 1);
    REQUIRE(run.rows[0].ranking.size() == 3);
    CHECK(run.rows[0].ranking[0].first == "docA");
    CHECK(run.rows[0].ranking[1].first == "docB");
    CHECK(run.rows[0].ranking[2].first == "docC");

    {
        std::ofstream out("test_run.txt");
        out << "q1 Q0 docA 1 0.9 tag\nq1 Q0 docA 2 0.5 tag\n";
    }
    CHECK_THROWS_AS(load_run("test_run.txt"), DataError);

    // save/load round trip preserves order
    RunRanking out_run;
    out_run.rows.push_back(row("qz", {"d2", "d1", "d3"}));
    save_run("test_run.txt", out_run, "unit");
    const RunRanking again = load_run("test_run.txt");
    REQUIRE(again.rows.size() == 1);
    CHECK(again.rows[0].ranking[0].first == "d2");

    std::remove("test_qrels.txt");
    std::remove("test_run.txt");
}
