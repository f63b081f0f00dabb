// dialogkit: turn documents into synthetic information-seeking dialogs and
// train/evaluate desk-scale conversational retrievers on them.

#include "dialogkit/analysis.hpp"
#include "dialogkit/dialog.hpp"
#include "dialogkit/encoder.hpp"
#include "dialogkit/error.hpp"
#include "dialogkit/inpainter.hpp"
#include "dialogkit/metrics.hpp"
#include "dialogkit/mining.hpp"
#include "dialogkit/passage.hpp"
#include "dialogkit/recon.hpp"
#include "dialogkit/retrieval_examples.hpp"
#include "dialogkit/rng.hpp"
#include "dialogkit/vector_index.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

using namespace dialogkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct GlobalFlags {
    std::uint64_t seed = 0;
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    bool verbose = false;
};

/// Bad flag values (unknown metric names, presets, backend kinds). Exits 1
/// like any other usage problem, unlike malformed input files (exit 2).
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

void log_resolved_config(const CLI::App& sub) {
    std::string flat;
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_name().empty()) continue;
        std::string value;
        if (!opt->results().empty()) {
            for (const auto& r : opt->results()) {
                if (!value.empty()) value += ',';
                value += r;
            }
        } else {
            value = opt->get_default_str();
        }
        if (value.empty() && opt->count() == 0) continue;
        if (!flat.empty()) flat += ' ';
        flat += opt->get_name() + "=" + value;
    }
    std::cerr << "[dialogkit] " << sub.get_name() << " config: " << flat << "\n";
}

SentenceSplitter make_splitter(const std::string& abbrev_path) {
    if (abbrev_path.empty()) return SentenceSplitter();
    return SentenceSplitter::from_file(abbrev_path);
}

std::unique_ptr<GeneratorBackend> make_backend(const std::string& kind,
                                               const std::string& stub_template,
                                               const std::string& oracle_file,
                                               const std::string& endpoint,
                                               double timeout) {
    if (kind == "stub") return std::make_unique<StubBackend>(stub_template);
    if (kind == "oracle") {
        if (oracle_file.empty())
            throw DataError("--oracle-file is required for the oracle backend");
        return std::make_unique<OracleBackend>(
            OracleBackend::from_dialogs(load_dialogs(oracle_file)));
    }
    if (kind == "http") {
        if (endpoint.empty())
            throw DataError("backend endpoint missing: pass --endpoint or set "
                            "INPAINT_LM_ENDPOINT");
        RemoteConfig config;
        config.endpoint = endpoint;
        config.timeout_seconds = timeout;
        return std::make_unique<RemoteBackend>(config);
    }
    throw UsageError("unknown backend '" + kind + "' (stub|oracle|http)");
}

std::string derive_query_id(const RetrievalExample& ex) {
    return ex.passage_id + "#" + std::to_string(ex.prefix_index);
}

struct LoadedExamples {
    std::vector<std::string> query_ids;
    std::vector<std::string> queries;
    std::vector<std::string> positives;
    std::vector<std::string> passage_ids;
};

LoadedExamples load_retrieval_examples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open examples file: " + path);
    LoadedExamples out;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": bad example record: " + e.what());
        }
        const std::string passage_id = rec.at("passage_id").get<std::string>();
        const std::string qid =
            passage_id + "#" + std::to_string(rec.at("i").get<int>());
        if (!seen.insert(qid).second)
            throw DataError("derived query id collides: " + qid);
        out.query_ids.push_back(qid);
        out.queries.push_back(rec.at("query").get<std::string>());
        out.positives.push_back(rec.at("positive").get<std::string>());
        out.passage_ids.push_back(passage_id);
    }
    if (out.queries.empty()) throw DataError("examples file is empty: " + path);
    return out;
}

/// Disjoint-vocabulary toy corpus: passage j only ever mentions tokens
/// derived from j, so retrieval is separable by construction. The two
/// sentences of a passage carry the same token bag (order permuted), which
/// keeps suffix positives and whole-passage negatives at the same
/// granularity under mean pooling.
std::vector<Passage> make_toy_corpus(int n) {
    std::vector<Passage> out;
    for (int j = 0; j < n; ++j) {
        Passage p;
        p.id = "toy-" + std::to_string(j);
        p.title = "topic" + std::to_string(j);
        const std::string a = "alpha" + std::to_string(j);
        const std::string b = "beta" + std::to_string(j);
        p.sentences = {p.title + " " + a + " " + b + ".",
                       a + " " + p.title + " " + b + "."};
        p.text = p.sentences[0] + " " + p.sentences[1];
        out.push_back(std::move(p));
    }
    return out;
}

void write_queries_file(const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write queries file: " + path);
    for (const auto& [qid, query] : rows) {
        json rec = {{"query_id", qid}, {"query", query}};
        out << rec.dump() << '\n';
    }
}

std::vector<std::pair<std::string, std::string>> load_queries_file(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open queries file: " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded()) throw DataError("bad query record in " + path);
        out.emplace_back(rec.at("query_id").get<std::string>(),
                         rec.at("query").get<std::string>());
    }
    return out;
}

void write_qrels_file(const std::string& path, const Qrels& qrels) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write qrels file: " + path);
    for (const auto& [qid, judged] : qrels.grades)
        for (const auto& [doc, grade] : judged)
            out << qid << " 0 " << doc << ' ' << grade << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"document-to-dialog generation and desk-scale conversational "
                 "retrieval"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML config overlay; command-line flags win");

    GlobalFlags global;
    app.add_option("--seed", global.seed, "global random seed")
        ->capture_default_str();
    app.add_option("--workers", global.workers, "worker thread bound")
        ->capture_default_str();
    app.add_flag("--verbose", global.verbose, "chatty progress output");

    // ---- inpaint ---------------------------------------------------------
    auto* inpaint =
        app.add_subcommand("inpaint", "turn passages into complete dialogs");
    std::string in_passages, in_out, in_backend = "stub";
    std::string in_template = "What about {title}?";
    std::string in_oracle_file, in_endpoint, in_prompt = kDefaultPromptTemplate;
    std::string in_reject_file, in_abbrev;
    int in_max_sentences = kDefaultMaxSentences;
    int in_max_new_tokens = 64;
    double in_timeout = 30.0;
    inpaint->add_option("--passages", in_passages, "passage JSONL input")
        ->required();
    inpaint->add_option("--out", in_out, "dialog JSONL output")->required();
    inpaint->add_option("--backend", in_backend, "stub|oracle|http")
        ->capture_default_str();
    inpaint->add_option("--template", in_template,
                        "stub backend utterance template");
    inpaint->add_option("--oracle-file", in_oracle_file,
                        "completed dialogs supplying oracle answers");
    inpaint->add_option("--endpoint", in_endpoint, "http backend base URL")
        ->envname("INPAINT_LM_ENDPOINT");
    inpaint->add_option("--timeout", in_timeout, "http timeout seconds");
    inpaint->add_option("--prompt-template", in_prompt, "writer prompt turn");
    inpaint->add_option("--max-sentences", in_max_sentences,
                        "sentence cap per passage")
        ->capture_default_str();
    inpaint->add_option("--max-new-tokens", in_max_new_tokens,
                        "generation budget per turn");
    inpaint->add_option("--reject-file", in_reject_file,
                        "JSONL file for failed passages");
    inpaint->add_option("--abbrev", in_abbrev, "abbreviation list file");

    // ---- make-recon ------------------------------------------------------
    auto* recon = app.add_subcommand("make-recon",
                                     "emit masked-turn reconstruction examples");
    std::string rc_dialogs, rc_out;
    int rc_per_dialog = 1;
    recon->add_option("--dialogs", rc_dialogs, "dialog JSONL input")->required();
    recon->add_option("--out", rc_out, "examples JSONL output")->required();
    recon->add_option("--per-dialog", rc_per_dialog, "examples per dialog")
        ->capture_default_str();

    // ---- make-retrieval --------------------------------------------------
    auto* retrieval = app.add_subcommand(
        "make-retrieval", "emit (query, positive passage) training examples");
    std::string rt_dialogs, rt_out, rt_queries_out, rt_qrels_out;
    std::string rt_separator = "|";
    bool rt_answers = false, rt_keep_case = false;
    int rt_max_chars = -1;
    retrieval->add_option("--dialogs", rt_dialogs, "dialog JSONL input")
        ->required();
    retrieval->add_option("--out", rt_out, "examples JSONL output")->required();
    retrieval->add_flag("--include-answers", rt_answers,
                        "keep writer turns in the query history");
    retrieval->add_flag("--keep-case", rt_keep_case, "skip lowercasing");
    retrieval->add_option("--max-chars", rt_max_chars,
                          "query char cap (default 512 with answers, 128 "
                          "questions-only)");
    retrieval->add_option("--separator", rt_separator, "history turn separator")
        ->capture_default_str();
    retrieval->add_option("--queries-out", rt_queries_out,
                          "also write {query_id, query} JSONL");
    retrieval->add_option("--qrels-out", rt_qrels_out,
                          "also write qrels marking each source passage");

    // ---- train-de --------------------------------------------------------
    auto* train_de = app.add_subcommand("train-de", "train the dual encoder");
    std::string de_examples, de_out, de_curve, de_negatives, de_neg_passages;
    int de_dim = 768, de_embed = 64, de_buckets = 1024;
    std::size_t de_vocab_cap = 50000;
    train_de->add_option("--examples", de_examples, "retrieval examples JSONL")
        ->required();
    train_de->add_option("--out", de_out, "params JSON output")->required();
    train_de->add_option("--negatives", de_negatives,
                         "mined negatives JSONL to mix in");
    train_de->add_option("--passages", de_neg_passages,
                         "passage corpus resolving mined negative ids");
    train_de->add_option("--dim", de_dim, "output embedding dim")
        ->capture_default_str();
    train_de->add_option("--embed-dim", de_embed, "token embedding dim")
        ->capture_default_str();
    train_de->add_option("--buckets", de_buckets, "OOV hash buckets")
        ->capture_default_str();
    train_de->add_option("--vocab-cap", de_vocab_cap, "max vocabulary size");
    train_de->add_option("--loss-curve", de_curve, "per-epoch loss CSV");
    TrainConfig de_config;
    train_de->add_option("--tau", de_config.temperature, "softmax temperature")
        ->capture_default_str();
    train_de->add_option("--batch", de_config.batch_size, "batch size")
        ->capture_default_str();
    train_de->add_option("--lr", de_config.learning_rate, "learning rate")
        ->capture_default_str();
    train_de->add_option("--epochs", de_config.epochs, "training epochs")
        ->capture_default_str();

    // ---- index -----------------------------------------------------------
    auto* index_cmd = app.add_subcommand("index", "embed passages into an index");
    std::string ix_params, ix_passages, ix_out, ix_abbrev;
    index_cmd->add_option("--params", ix_params, "dual encoder params")
        ->required();
    index_cmd->add_option("--passages", ix_passages, "passage JSONL")->required();
    index_cmd->add_option("--out", ix_out, "index file output")->required();
    index_cmd->add_option("--abbrev", ix_abbrev, "abbreviation list file");

    // ---- retrieve --------------------------------------------------------
    auto* retrieve_cmd = app.add_subcommand("retrieve", "exact top-K search");
    std::string rv_index, rv_params, rv_queries, rv_out, rv_tag = "dialogkit";
    int rv_k = 100;
    retrieve_cmd->add_option("--index", rv_index, "index file")->required();
    retrieve_cmd->add_option("--params", rv_params, "dual encoder params")
        ->required();
    retrieve_cmd->add_option("--queries", rv_queries, "{query_id, query} JSONL")
        ->required();
    retrieve_cmd->add_option("--out", rv_out, "run file output")->required();
    retrieve_cmd->add_option("--k", rv_k, "results per query")
        ->capture_default_str();
    retrieve_cmd->add_option("--tag", rv_tag, "run tag");

    // ---- mine ------------------------------------------------------------
    auto* mine_cmd = app.add_subcommand("mine", "sample hard negatives");
    std::string mn_run, mn_qrels, mn_out;
    int mn_n = 10, mn_k = 100, mn_min_grade = 1, mn_stage = 2;
    bool mn_allow_false = false;
    mine_cmd->add_option("--run", mn_run, "run file from a retriever")
        ->required();
    mine_cmd->add_option("--qrels", mn_qrels, "graded judgments")->required();
    mine_cmd->add_option("--out", mn_out, "negatives JSONL output")->required();
    mine_cmd->add_option("--n", mn_n, "negatives per query")
        ->capture_default_str();
    mine_cmd->add_option("--k", mn_k, "candidate pool depth")
        ->capture_default_str();
    mine_cmd->add_option("--min-grade", mn_min_grade, "positive grade cutoff");
    mine_cmd->add_option("--stage", mn_stage, "provenance stage number");
    mine_cmd->add_flag("--allow-false-negatives", mn_allow_false,
                       "sample blindly without removing judged positives");

    // ---- train-rr --------------------------------------------------------
    auto* train_rr = app.add_subcommand("train-rr", "train the reranker");
    std::string rr_examples, rr_negatives, rr_passages, rr_out, rr_abbrev;
    std::string rr_curve;
    int rr_dim = 768, rr_embed = 64, rr_buckets = 1024;
    std::size_t rr_vocab_cap = 50000;
    train_rr->add_option("--examples", rr_examples, "retrieval examples JSONL")
        ->required();
    train_rr->add_option("--negatives", rr_negatives, "mined negatives JSONL")
        ->required();
    train_rr->add_option("--passages", rr_passages, "passage corpus JSONL")
        ->required();
    train_rr->add_option("--out", rr_out, "reranker params output")->required();
    train_rr->add_option("--dim", rr_dim, "output embedding dim")
        ->capture_default_str();
    train_rr->add_option("--embed-dim", rr_embed, "token embedding dim")
        ->capture_default_str();
    train_rr->add_option("--buckets", rr_buckets, "OOV hash buckets");
    train_rr->add_option("--vocab-cap", rr_vocab_cap, "max vocabulary size");
    train_rr->add_option("--abbrev", rr_abbrev, "abbreviation list file");
    train_rr->add_option("--loss-curve", rr_curve, "per-epoch loss CSV");
    TrainConfig rr_config;
    rr_config.learning_rate = 0.3;
    train_rr->add_option("--batch", rr_config.batch_size, "unused; kept for "
                         "flag parity");
    train_rr->add_option("--lr", rr_config.learning_rate, "learning rate")
        ->capture_default_str();
    train_rr->add_option("--epochs", rr_config.epochs, "training epochs")
        ->capture_default_str();

    // ---- rerank ----------------------------------------------------------
    auto* rerank_cmd = app.add_subcommand("rerank", "rescore a run's top-K");
    std::string rk_params, rk_run, rk_queries, rk_passages, rk_out, rk_abbrev;
    std::string rk_tag = "dialogkit-rr";
    int rk_depth = 100;
    rerank_cmd->add_option("--params", rk_params, "reranker params")->required();
    rerank_cmd->add_option("--run", rk_run, "run file to rescore")->required();
    rerank_cmd->add_option("--queries", rk_queries, "{query_id, query} JSONL")
        ->required();
    rerank_cmd->add_option("--passages", rk_passages, "passage corpus JSONL")
        ->required();
    rerank_cmd->add_option("--out", rk_out, "reranked run output")->required();
    rerank_cmd->add_option("--depth", rk_depth, "rescoring depth")
        ->capture_default_str();
    rerank_cmd->add_option("--tag", rk_tag, "run tag");
    rerank_cmd->add_option("--abbrev", rk_abbrev, "abbreviation list file");

    // ---- eval ------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "score a run against qrels");
    std::string ev_run, ev_qrels, ev_metrics = "mrr", ev_preset, ev_gain = "exp";
    std::string ev_csv, ev_json;
    int ev_min_grade = 1;
    eval_cmd->add_option("--run", ev_run, "run file")->required();
    eval_cmd->add_option("--qrels", ev_qrels, "qrels file")->required();
    eval_cmd->add_option("--metrics", ev_metrics,
                         "comma list, e.g. mrr@5,r@10,ndcg@3")
        ->capture_default_str();
    eval_cmd->add_option("--preset", ev_preset,
                         "cast19 (min grade 1) or cast20 (min grade 2)");
    eval_cmd->add_option("--min-grade", ev_min_grade, "positive grade cutoff")
        ->capture_default_str();
    eval_cmd->add_option("--gain", ev_gain, "ndcg gain: exp|linear")
        ->capture_default_str();
    eval_cmd->add_option("--csv", ev_csv, "per-query report CSV");
    eval_cmd->add_option("--json", ev_json, "report JSON");

    // ---- folds -----------------------------------------------------------
    auto* folds_cmd = app.add_subcommand("folds", "split dialogs into k folds");
    std::string fd_dialogs, fd_out;
    int fd_k = 5;
    folds_cmd->add_option("--dialogs", fd_dialogs, "dialog JSONL input")
        ->required();
    folds_cmd->add_option("--out", fd_out, "fold CSV output")->required();
    folds_cmd->add_option("--k", fd_k, "fold count")->capture_default_str();

    // ---- analyze-questions -------------------------------------------------
    auto* aq_cmd = app.add_subcommand("analyze-questions",
                                      "per-turn question-type distribution");
    std::string aq_dialogs, aq_out;
    aq_cmd->add_option("--dialogs", aq_dialogs, "dialog JSONL input")->required();
    aq_cmd->add_option("--out", aq_out, "distribution CSV output")->required();

    // ---- alpha -----------------------------------------------------------
    auto* alpha_cmd = app.add_subcommand("alpha", "inter-rater agreement");
    std::string al_ratings, al_scale = "nominal";
    alpha_cmd->add_option("--ratings", al_ratings,
                          "CSV, one row per item, one column per rater")
        ->required();
    alpha_cmd->add_option("--scale", al_scale, "nominal|ordinal")
        ->capture_default_str();

    // ---- scan-sensitive ----------------------------------------------------
    auto* scan_cmd = app.add_subcommand("scan-sensitive",
                                        "sensitive term co-occurrence scan");
    std::string sc_dialogs, sc_lexicon, sc_passages, sc_out, sc_abbrev;
    bool sc_not_in_passage = false;
    scan_cmd->add_option("--dialogs", sc_dialogs, "dialog JSONL input")
        ->required();
    scan_cmd->add_option("--lexicon", sc_lexicon, "lexicon JSON")->required();
    scan_cmd->add_option("--passages", sc_passages, "source passages JSONL");
    scan_cmd->add_option("--out", sc_out, "flags JSONL output");
    scan_cmd->add_flag("--not-in-passage", sc_not_in_passage,
                       "only flag identity terms absent from the passage");
    scan_cmd->add_option("--abbrev", sc_abbrev, "abbreviation list file");

    // ---- pipeline ----------------------------------------------------------
    auto* pipe_cmd = app.add_subcommand(
        "pipeline", "toy end-to-end run: inpaint, train, mine, evaluate");
    std::string pl_passages, pl_workdir, pl_template = "What about {title}?";
    int pl_toy = 0, pl_stages = 3, pl_dim = 16, pl_embed = 16, pl_epochs = 200;
    int pl_batch = 16;
    double pl_tau = 0.01, pl_lr = 0.001;
    pipe_cmd->add_option("--passages", pl_passages, "passage JSONL input");
    pipe_cmd->add_option("--toy", pl_toy,
                         "synthesize N disjoint-vocabulary passages instead");
    pipe_cmd->add_option("--workdir", pl_workdir, "artifact directory")
        ->required();
    pipe_cmd->add_option("--stages", pl_stages, "training stages (1-3)")
        ->capture_default_str();
    pipe_cmd->add_option("--dim", pl_dim, "embedding dim")->capture_default_str();
    pipe_cmd->add_option("--embed-dim", pl_embed, "token dim")
        ->capture_default_str();
    pipe_cmd->add_option("--epochs", pl_epochs, "epochs per stage")
        ->capture_default_str();
    pipe_cmd->add_option("--tau", pl_tau, "softmax temperature")
        ->capture_default_str();
    pipe_cmd->add_option("--lr", pl_lr, "learning rate")->capture_default_str();
    pipe_cmd->add_option("--batch", pl_batch, "batch size")
        ->capture_default_str();
    pipe_cmd->add_option("--template", pl_template, "stub question template");

    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    CLI::App* active = app.get_subcommands().front();
    log_resolved_config(*active);

    try {
        if (*inpaint) {
            const auto splitter = make_splitter(in_abbrev);
            const auto passages =
                load_passages(in_passages, splitter, in_max_sentences);
            auto backend = make_backend(in_backend, in_template, in_oracle_file,
                                        in_endpoint, in_timeout);
            const InpaintResult result =
                inpaint_corpus(passages, *backend, std::max(1, global.workers),
                               in_prompt, in_max_new_tokens);
            save_dialogs(in_out, result.dialogs);
            if (!in_reject_file.empty())
                save_rejects(in_reject_file, result.rejects);
            std::cerr << "[dialogkit] inpainted " << result.dialogs.size()
                      << " dialogs, " << result.rejects.size() << " rejected\n";
            if (!result.rejects.empty() && in_reject_file.empty())
                for (const auto& r : result.rejects)
                    std::cerr << "[dialogkit] reject " << r.passage_id << " step "
                              << r.step << ": " << r.error << "\n";
            // every passage failing means the backend is down, not the data
            if (result.dialogs.empty() && !result.rejects.empty())
                throw BackendError(result.rejects.front().passage_id,
                                   result.rejects.front().step,
                                   "backend failed for every passage: " +
                                       result.rejects.front().error);
        } else if (*recon) {
            const auto dialogs = load_dialogs(rc_dialogs);
            save_recon(rc_out, make_corpus(dialogs, global.seed, rc_per_dialog));
        } else if (*retrieval) {
            const auto dialogs = load_dialogs(rt_dialogs);
            const int max_chars = rt_max_chars >= 0 ? rt_max_chars
                                  : rt_answers ? kMaxQueryCharsWithAnswers
                                               : kMaxQueryCharsQuestionsOnly;
            std::ofstream out(rt_out);
            if (!out) throw DataError("cannot write examples file: " + rt_out);
            std::vector<std::pair<std::string, std::string>> query_rows;
            Qrels qrels;
            std::unordered_set<std::string> seen;
            for (const auto& d : dialogs) {
                for (const auto& ex : build_examples(d, rt_answers)) {
                    const std::string query = format_query(
                        ex.query_turns, !rt_keep_case, max_chars, rt_separator);
                    json rec = {{"query", query},
                                {"positive", ex.positive_text},
                                {"passage_id", ex.passage_id},
                                {"i", ex.prefix_index}};
                    out << rec.dump() << '\n';
                    const std::string qid = derive_query_id(ex);
                    if (!seen.insert(qid).second)
                        throw DataError("derived query id collides: " + qid +
                                        " (two dialogs share passage " +
                                        ex.passage_id + ")");
                    query_rows.emplace_back(qid, query);
                    qrels.grades[qid][ex.passage_id] = 1;
                }
            }
            if (!rt_queries_out.empty())
                write_queries_file(rt_queries_out, query_rows);
            if (!rt_qrels_out.empty()) write_qrels_file(rt_qrels_out, qrels);
        } else if (*train_de) {
            const LoadedExamples data = load_retrieval_examples(de_examples);
            MinedNegatives mined;
            if (!de_negatives.empty()) mined = load_negatives(de_negatives);
            std::unordered_map<std::string, std::string> negative_texts;
            if (!de_neg_passages.empty())
                for (const auto& p :
                     load_passages(de_neg_passages, SentenceSplitter()))
                    negative_texts[p.id] = p.text;

            std::vector<std::string> texts = data.queries;
            texts.insert(texts.end(), data.positives.begin(),
                         data.positives.end());
            for (const auto& [id, text] : negative_texts) texts.push_back(text);
            const auto vocab = build_vocab(texts, de_vocab_cap);

            std::vector<TrainPair> pairs;
            for (std::size_t i = 0; i < data.queries.size(); ++i) {
                TrainPair pair{data.queries[i], data.positives[i],
                               data.query_ids[i], {}};
                auto it = mined.by_query.find(data.query_ids[i]);
                if (it != mined.by_query.end()) {
                    for (const auto& neg_id : it->second) {
                        auto text = negative_texts.find(neg_id);
                        if (text == negative_texts.end())
                            throw DataError(
                                "mined negative '" + neg_id +
                                "' needs --passages to resolve its text");
                        pair.negatives.push_back(text->second);
                    }
                }
                pairs.push_back(std::move(pair));
            }
            de_config.seed = global.seed;
            EncoderParams init = EncoderParams::random(vocab, de_embed, de_dim,
                                                       de_buckets, global.seed);
            auto [trained, report] = train_dual_encoder(init, pairs, de_config);
            save_encoder_params(de_out, trained);
            if (!de_curve.empty()) save_loss_curve(de_curve, report);
            std::cerr << "[dialogkit] trained " << report.epoch_mean_loss.size()
                      << " epochs, final mean loss "
                      << (report.epoch_mean_loss.empty()
                              ? 0.0
                              : report.epoch_mean_loss.back())
                      << ", skipped batches " << report.skipped_batches << "\n";
        } else if (*index_cmd) {
            const auto params = load_encoder_params(ix_params);
            const auto splitter = make_splitter(ix_abbrev);
            const auto passages = load_passages(ix_passages, splitter);
            const BuildResult built =
                build_index(params, passages, std::max(1, global.workers));
            for (const auto& w : built.warnings)
                std::cerr << "[dialogkit] excluded " << w.passage_id << ": "
                          << w.reason << "\n";
            save_index(ix_out, built.index);
            std::cerr << "[dialogkit] indexed " << built.index.size()
                      << " passages\n";
        } else if (*retrieve_cmd) {
            const auto params = load_encoder_params(rv_params);
            const VectorIndex index = load_index(rv_index);
            if (index.params_fingerprint != params_fingerprint(params))
                throw DataError("index was built with different params");
            RunRanking run;
            for (const auto& [qid, query] : load_queries_file(rv_queries)) {
                RunRow row{qid, {}};
                for (const auto& hit : top_k(index, encode(params, query), rv_k))
                    row.ranking.emplace_back(hit.passage_id, hit.score);
                run.rows.push_back(std::move(row));
            }
            save_run(rv_out, run, rv_tag);
        } else if (*mine_cmd) {
            const RunRanking run = load_run(mn_run);
            const Qrels qrels = load_qrels(mn_qrels);
            std::vector<std::string> qids;
            for (const auto& row : run.rows) qids.push_back(row.query_id);
            MinedNegatives mined =
                mine_hard_negatives(run, qrels, qids, mn_n, mn_k, global.seed,
                                    mn_min_grade, !mn_allow_false);
            mined.stage = mn_stage;
            save_negatives(mn_out, mined);
            for (const auto& missing : mined.missing_queries)
                std::cerr << "[dialogkit] no run entry for query " << missing
                          << "\n";
        } else if (*train_rr) {
            const LoadedExamples data = load_retrieval_examples(rr_examples);
            const MinedNegatives mined = load_negatives(rr_negatives);
            const auto splitter = make_splitter(rr_abbrev);
            const auto passages = load_passages(rr_passages, splitter);
            std::unordered_map<std::string, const Passage*> by_id;
            for (const auto& p : passages) by_id[p.id] = &p;
            auto passage_text = [&](const std::string& id) -> const std::string& {
                auto it = by_id.find(id);
                if (it == by_id.end())
                    throw DataError("negative '" + id + "' is not in the corpus");
                return it->second->text;
            };

            std::vector<std::string> texts = data.queries;
            for (const auto& p : passages) texts.push_back(p.text);
            const auto vocab = build_vocab(texts, rr_vocab_cap);

            std::vector<RerankTriplet> triplets;
            for (std::size_t i = 0; i < data.queries.size(); ++i) {
                auto it = mined.by_query.find(data.query_ids[i]);
                if (it == mined.by_query.end() || it->second.empty()) continue;
                RerankTriplet t;
                t.query = data.queries[i];
                t.positive = passage_text(data.passage_ids[i]);
                for (const auto& neg : it->second)
                    t.negatives.push_back(passage_text(neg));
                triplets.push_back(std::move(t));
            }
            rr_config.seed = global.seed;
            RerankerParams init = RerankerParams::random(
                vocab, rr_embed, rr_dim, rr_buckets, global.seed);
            auto [trained, report] = train_reranker(init, triplets, rr_config);
            save_reranker_params(rr_out, trained);
            if (!rr_curve.empty()) save_loss_curve(rr_curve, report);
        } else if (*rerank_cmd) {
            const RerankerParams params = load_reranker_params(rk_params);
            RunRanking run = load_run(rk_run);
            const auto splitter = make_splitter(rk_abbrev);
            const auto passages = load_passages(rk_passages, splitter);
            std::unordered_map<std::string, const Passage*> by_id;
            for (const auto& p : passages) by_id[p.id] = &p;
            std::unordered_map<std::string, std::string> queries;
            for (const auto& [qid, query] : load_queries_file(rk_queries))
                queries[qid] = query;

            for (auto& row : run.rows) {
                auto q = queries.find(row.query_id);
                if (q == queries.end())
                    throw DataError("no query text for run query " +
                                    row.query_id);
                const auto depth = std::min<std::size_t>(
                    static_cast<std::size_t>(rk_depth), row.ranking.size());
                for (std::size_t r = 0; r < depth; ++r) {
                    auto p = by_id.find(row.ranking[r].first);
                    if (p == by_id.end())
                        throw DataError("run doc missing from corpus: " +
                                        row.ranking[r].first);
                    row.ranking[r].second =
                        rerank_score(params, q->second, p->second->text);
                }
                std::stable_sort(
                    row.ranking.begin(),
                    row.ranking.begin() + static_cast<std::ptrdiff_t>(depth),
                    [](const auto& a, const auto& b) { return a.second > b.second; });
            }
            save_run(rk_out, run, rk_tag);
        } else if (*eval_cmd) {
            if (!ev_preset.empty()) {
                if (ev_preset == "cast19")
                    ev_min_grade = 1;
                else if (ev_preset == "cast20")
                    ev_min_grade = 2;
                else
                    throw UsageError("unknown preset '" + ev_preset + "'");
            }
            Gain gain;
            if (ev_gain == "exp")
                gain = Gain::Exponential;
            else if (ev_gain == "linear")
                gain = Gain::Linear;
            else
                throw UsageError("unknown gain '" + ev_gain + "'");
            const RunRanking run = load_run(ev_run);
            const Qrels qrels = load_qrels(ev_qrels);
            for (const auto& row : run.rows)
                if (!qrels.has_query(row.query_id))
                    std::cerr << "[dialogkit] run query " << row.query_id
                              << " missing from qrels, skipped\n";
            std::vector<MetricSpec> specs;
            try {
                specs = parse_metric_specs(ev_metrics, ev_min_grade, gain);
            } catch (const DataError& e) {
                throw UsageError(e.what());
            }
            const auto report = evaluate_run(run, qrels, specs);
            std::cout.precision(12);
            for (std::size_t m = 0; m < report.metrics.size(); ++m)
                std::cout << report.metrics[m].label() << "\t"
                          << report.aggregates[m] << "\n";
            if (!ev_csv.empty()) save_report_csv(ev_csv, report);
            if (!ev_json.empty()) save_report_json(ev_json, report);
        } else if (*folds_cmd) {
            const auto dialogs = load_dialogs(fd_dialogs);
            std::vector<std::string> ids;
            for (const auto& d : dialogs) ids.push_back(d.id);
            const auto folds = make_folds(ids, fd_k, global.seed);
            std::ofstream out(fd_out);
            if (!out) throw DataError("cannot write folds file: " + fd_out);
            out << "fold,dialog_id\n";
            for (std::size_t f = 0; f < folds.size(); ++f)
                for (const auto& id : folds[f]) out << f + 1 << ',' << id << '\n';
        } else if (*aq_cmd) {
            save_distribution_csv(
                aq_out, question_distribution(load_dialogs(aq_dialogs)));
        } else if (*alpha_cmd) {
            AgreementScale scale;
            if (al_scale == "nominal")
                scale = AgreementScale::Nominal;
            else if (al_scale == "ordinal")
                scale = AgreementScale::Ordinal;
            else
                throw UsageError("unknown scale '" + al_scale + "'");
            std::cout.precision(12);
            std::cout << krippendorff_alpha(load_ratings_csv(al_ratings, scale))
                      << "\n";
        } else if (*scan_cmd) {
            const auto dialogs = load_dialogs(sc_dialogs);
            const auto lexicon = SensitiveLexicon::from_file(sc_lexicon);
            std::vector<Passage> passages;
            if (!sc_passages.empty())
                passages = load_passages(sc_passages, make_splitter(sc_abbrev));
            const ScanReport report = scan_sensitive(
                dialogs, lexicon, sc_passages.empty() ? nullptr : &passages,
                sc_not_in_passage ? ScanMode::NotInPassage
                                  : ScanMode::CoOccurrence);
            if (!sc_out.empty()) save_flags(sc_out, report);
            std::cout << "flagged_dialogs\t" << report.flagged_dialogs << "/"
                      << report.total_dialogs << "\t" << report.dialog_rate()
                      << "\n";
            std::cout << "flagged_questions\t" << report.flagged_questions << "/"
                      << report.total_questions << "\t"
                      << report.question_rate() << "\n";
        } else if (*pipe_cmd) {
            if ((pl_toy > 0) == !pl_passages.empty())
                throw DataError("pipeline needs exactly one of --passages/--toy");
            fs::create_directories(pl_workdir);
            const auto dir = fs::path(pl_workdir);

            std::vector<Passage> passages;
            if (pl_toy > 0) {
                passages = make_toy_corpus(pl_toy);
                save_passages((dir / "passages.jsonl").string(), passages);
            } else {
                passages = load_passages(pl_passages, SentenceSplitter());
            }

            StubBackend backend(pl_template);
            const InpaintResult inpainted =
                inpaint_corpus(passages, backend, std::max(1, global.workers));
            save_dialogs((dir / "dialogs.jsonl").string(), inpainted.dialogs);

            std::vector<MiningExample> examples;
            std::ofstream exout(dir / "examples.jsonl");
            for (const auto& d : inpainted.dialogs)
                for (const auto& ex : build_examples(d, false)) {
                    const std::string query = format_query(
                        ex.query_turns, true, kMaxQueryCharsQuestionsOnly);
                    json rec = {{"query", query},
                                {"positive", ex.positive_text},
                                {"passage_id", ex.passage_id},
                                {"i", ex.prefix_index}};
                    exout << rec.dump() << '\n';
                    examples.push_back({derive_query_id(ex), query,
                                        ex.positive_text, ex.passage_id});
                }
            exout.close();

            MultistageConfig config;
            config.stages = pl_stages;
            config.embed_dim = pl_embed;
            config.output_dim = pl_dim;
            config.hash_buckets = 1024;
            config.init_seed = global.seed + 42;
            config.mine_seed = global.seed + 11;
            config.split_seed = global.seed + 13;
            config.stage1.temperature = pl_tau;
            config.stage1.learning_rate = pl_lr;
            config.stage1.epochs = pl_epochs;
            config.stage1.batch_size = pl_batch;
            config.stage1.seed = global.seed + 1;
            config.stage2 = config.stage1;
            config.stage2.seed = global.seed + 2;
            config.reranker = config.stage1;
            config.reranker.learning_rate = 0.3;
            config.reranker.epochs = std::min(30, pl_epochs);
            config.reranker.seed = global.seed + 3;
            config.mine_top_k =
                std::min<int>(100, static_cast<int>(passages.size()));
            config.mine_n = std::min<int>(
                10, std::max(1, static_cast<int>(passages.size()) / 4));

            const MultistageResult result =
                run_multistage(examples, passages, config);
            save_encoder_params((dir / "retriever1.json").string(),
                                result.retriever1);
            if (result.retriever2)
                save_encoder_params((dir / "retriever2.json").string(),
                                    *result.retriever2);
            if (result.reranker)
                save_reranker_params((dir / "reranker.json").string(),
                                     *result.reranker);
            for (std::size_t i = 0; i < result.mined.size(); ++i)
                save_negatives((dir / ("negatives-stage" +
                                       std::to_string(i + 2) + ".jsonl"))
                                   .string(),
                               result.mined[i]);
            save_stage_reports((dir / "stage_reports.csv").string(),
                               result.reports);
            std::cout.precision(6);
            for (const auto& r : result.reports)
                std::cout << "stage " << r.stage << " " << r.split << " "
                          << r.metric << " = " << r.value << "\n";
        }
    } catch (const UsageError& e) {
        std::cerr << "dialogkit: " << e.what() << "\n";
        return 1;
    } catch (const BackendError& e) {
        std::cerr << "dialogkit: backend error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "dialogkit: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "dialogkit: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
