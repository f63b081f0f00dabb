#include "dialogkit/mining.hpp"

#include "dialogkit/error.hpp"
#include "dialogkit/rng.hpp"
#include "dialogkit/vector_index.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

using nlohmann::json;

namespace dialogkit {

MinedNegatives mine_hard_negatives(const RunRanking& run, const Qrels& qrels,
                                   const std::vector<std::string>& query_ids,
                                   int n, int top_k, std::uint64_t seed,
                                   int min_grade, bool exclude_positives) {
    if (n < 1 || top_k < 1) throw DataError("mining needs n >= 1 and K >= 1");
    MinedNegatives mined;
    mined.top_k = top_k;
    mined.seed = seed;

    for (const auto& qid : query_ids) {
        const RunRow* row = run.find(qid);
        if (!row) {
            mined.missing_queries.push_back(qid);
            continue;
        }
        std::unordered_set<std::string> gold;
        if (exclude_positives) {
            auto q = qrels.grades.find(qid);
            if (q != qrels.grades.end())
                for (const auto& [docid, grade] : q->second)
                    if (grade >= min_grade) gold.insert(docid);
        }
        std::vector<std::string> candidates;
        for (std::size_t r = 0; r < row->ranking.size() &&
                                r < static_cast<std::size_t>(top_k);
             ++r) {
            const auto& docid = row->ranking[r].first;
            if (!gold.count(docid)) candidates.push_back(docid);
        }
        const std::size_t take =
            std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(n));
        Rng rng(splitmix64(seed ^ fnv1a64(qid)));
        std::vector<std::string> sample;
        for (std::size_t idx : rng.sample_indices(candidates.size(), take))
            sample.push_back(candidates[idx]);
        mined.by_query[qid] = std::move(sample);
    }
    return mined;
}

void save_negatives(const std::string& path, const MinedNegatives& mined) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write negatives file: " + path);
    for (const auto& [qid, negatives] : mined.by_query) {
        json rec = {{"query_id", qid},
                    {"negatives", negatives},
                    {"stage", mined.stage},
                    {"seed", mined.seed}};
        out << rec.dump() << '\n';
    }
}

MinedNegatives load_negatives(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open negatives file: " + path);
    MinedNegatives mined;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("bad negatives record: " + std::string(e.what()));
        }
        mined.by_query[rec.at("query_id").get<std::string>()] =
            rec.at("negatives").get<std::vector<std::string>>();
        mined.stage = rec.value("stage", 0);
        mined.seed = rec.value("seed", std::uint64_t{0});
    }
    return mined;
}

namespace {

Qrels qrels_from_examples(const std::vector<MiningExample>& examples) {
    Qrels qrels;
    for (const auto& ex : examples)
        qrels.grades[ex.query_id][ex.gold_passage_id] = 1;
    return qrels;
}

RunRanking retrieve_all(const EncoderParams& params, const VectorIndex& index,
                        const std::vector<MiningExample>& examples, int k) {
    RunRanking run;
    for (const auto& ex : examples) {
        RunRow row{ex.query_id, {}};
        for (const auto& hit : top_k(index, encode(params, ex.query), k))
            row.ranking.emplace_back(hit.passage_id, hit.score);
        run.rows.push_back(std::move(row));
    }
    return run;
}

double run_mrr_at(const RunRanking& run, const Qrels& qrels, int cutoff) {
    return mrr(run, qrels, /*min_grade=*/1, cutoff);
}

} // namespace

MultistageResult run_multistage(const std::vector<MiningExample>& examples,
                                const std::vector<Passage>& passages,
                                const MultistageConfig& config) {
    if (examples.empty()) throw DataError("no training examples");
    if (config.stages < 1 || config.stages > 3)
        throw DataError("stages must be 1, 2 or 3");

    // Seeded held-in / held-out split over queries.
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng(splitmix64(config.split_seed));
    split_rng.shuffle(order);
    const auto holdout = static_cast<std::size_t>(
        config.holdout_fraction * static_cast<double>(examples.size()));
    std::vector<MiningExample> held_in, held_out;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < holdout ? held_out : held_in).push_back(examples[order[i]]);
    if (held_in.size() < 2)
        throw DataError("not enough held-in examples to train on");

    std::unordered_map<std::string, const Passage*> passage_by_id;
    for (const auto& p : passages) passage_by_id[p.id] = &p;
    auto passage_text = [&](const std::string& id) -> const std::string& {
        auto it = passage_by_id.find(id);
        if (it == passage_by_id.end())
            throw DataError("mined negative '" + id + "' is not in the corpus");
        return it->second->text;
    };

    const Qrels qrels_in = qrels_from_examples(held_in);
    const Qrels qrels_out = qrels_from_examples(held_out);

    std::vector<std::string> vocab_texts;
    for (const auto& ex : examples) {
        vocab_texts.push_back(ex.query);
        vocab_texts.push_back(ex.positive);
    }
    for (const auto& p : passages) vocab_texts.push_back(p.text);
    const auto vocab = build_vocab(vocab_texts, config.vocab_cap);

    MultistageResult result;

    auto report_stage = [&](int stage, const EncoderParams& params,
                            const RerankerParams* reranker) {
        const std::string metric =
            "mrr@" + std::to_string(config.eval_cutoff);
        auto score_split = [&](const std::vector<MiningExample>& split,
                               const Qrels& qrels, const char* name) {
            if (split.empty()) return;
            const auto built = build_index(params, passages);
            RunRanking run = retrieve_all(params, built.index, split,
                                          config.mine_top_k);
            if (reranker) {
                std::unordered_map<std::string, const MiningExample*> by_id;
                for (const auto& e : split) by_id[e.query_id] = &e;
                for (auto& row : run.rows) {
                    const MiningExample* ex = by_id.at(row.query_id);
                    for (auto& [docid, score] : row.ranking)
                        score = rerank_score(*reranker, ex->query,
                                             passage_text(docid));
                    std::stable_sort(row.ranking.begin(), row.ranking.end(),
                                     [](const auto& a, const auto& b) {
                                         return a.second > b.second;
                                     });
                }
            }
            result.reports.push_back(
                {stage, name, metric, run_mrr_at(run, qrels, config.eval_cutoff)});
        };
        score_split(held_in, qrels_in, "held_in");
        score_split(held_out, qrels_out, "held_out");
    };

    // Stage 1: in-batch negatives only.
    std::vector<TrainPair> stage1_pairs;
    for (const auto& ex : held_in)
        stage1_pairs.push_back({ex.query, ex.positive, ex.gold_passage_id, {}});
    EncoderParams init = EncoderParams::random(vocab, config.embed_dim,
                                               config.output_dim,
                                               config.hash_buckets,
                                               config.init_seed);
    auto [retriever1, report1] =
        train_dual_encoder(init, stage1_pairs, config.stage1);
    result.retriever1 = std::move(retriever1);
    report_stage(1, result.retriever1, nullptr);
    if (config.stages == 1) return result;

    // Stage 2: mine from retriever 1, retrain with the mined passages as
    // extra in-batch candidates.
    std::vector<std::string> held_in_ids;
    for (const auto& ex : held_in) held_in_ids.push_back(ex.query_id);
    {
        const auto built = build_index(result.retriever1, passages);
        const RunRanking run = retrieve_all(result.retriever1, built.index,
                                            held_in, config.mine_top_k);
        MinedNegatives mined = mine_hard_negatives(
            run, qrels_in, held_in_ids, config.mine_n, config.mine_top_k,
            config.mine_seed, /*min_grade=*/1, config.exclude_positives);
        mined.stage = 2;

        std::vector<TrainPair> stage2_pairs;
        for (const auto& ex : held_in) {
            TrainPair pair{ex.query, ex.positive, ex.gold_passage_id, {}};
            for (const auto& neg : mined.by_query[ex.query_id])
                pair.negatives.push_back(passage_text(neg));
            stage2_pairs.push_back(std::move(pair));
        }
        result.mined.push_back(std::move(mined));

        EncoderParams init2 = EncoderParams::random(vocab, config.embed_dim,
                                                    config.output_dim,
                                                    config.hash_buckets,
                                                    config.init_seed);
        auto [retriever2, report2] =
            train_dual_encoder(init2, stage2_pairs, config.stage2);
        result.retriever2 = std::move(retriever2);
    }
    report_stage(2, *result.retriever2, nullptr);
    if (config.stages == 2) return result;

    // Stage 3: mine from retriever 2 and train the reranker. Positives the
    // second retriever actually surfaces stay positives.
    {
        const auto built = build_index(*result.retriever2, passages);
        const RunRanking run = retrieve_all(*result.retriever2, built.index,
                                            held_in, config.mine_top_k);
        MinedNegatives mined = mine_hard_negatives(
            run, qrels_in, held_in_ids, config.mine_n, config.mine_top_k,
            splitmix64(config.mine_seed ^ 3), /*min_grade=*/1,
            config.exclude_positives);
        mined.stage = 3;

        std::vector<RerankTriplet> triplets;
        for (const auto& ex : held_in) {
            const auto& negatives = mined.by_query[ex.query_id];
            if (negatives.empty()) continue;
            RerankTriplet t;
            t.query = ex.query;
            t.positive = passage_text(ex.gold_passage_id);
            for (const auto& neg : negatives)
                t.negatives.push_back(passage_text(neg));
            triplets.push_back(std::move(t));
        }
        result.mined.push_back(std::move(mined));
        if (triplets.empty())
            throw DataError("stage 3 produced no reranker triplets");

        RerankerParams init3 = RerankerParams::random(vocab, config.embed_dim,
                                                      config.output_dim,
                                                      config.hash_buckets,
                                                      config.init_seed);
        auto [reranker, report3] =
            train_reranker(init3, triplets, config.reranker);
        result.reranker = std::move(reranker);
    }
    report_stage(3, *result.retriever2, &*result.reranker);
    return result;
}

void save_stage_reports(const std::string& path,
                        const std::vector<StageReport>& reports) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write stage report: " + path);
    out.precision(17);
    out << "stage,split,metric,value\n";
    for (const auto& r : reports)
        out << r.stage << ',' << r.split << ',' << r.metric << ',' << r.value
            << '\n';
}

std::vector<std::vector<std::string>> make_folds(std::vector<std::string> dialog_ids,
                                                 int k, std::uint64_t seed) {
    if (k < 1 || static_cast<std::size_t>(k) > dialog_ids.size())
        throw DataError("fold count must be between 1 and the number of dialogs");
    Rng rng(splitmix64(seed));
    rng.shuffle(dialog_ids);
    std::vector<std::vector<std::string>> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < dialog_ids.size(); ++i)
        folds[i % static_cast<std::size_t>(k)].push_back(std::move(dialog_ids[i]));
    return folds;
}

} // namespace dialogkit
