#include "doctest.h"

#include "dialogkit/dialog.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kCli = DIALOGKIT_CLI_PATH;
const char* kFixturePassages = DIALOGKIT_DATA_DIR "/fixtures/passages.jsonl";
const char* kFixtureDialogs = DIALOGKIT_DATA_DIR "/fixtures/dialogs.jsonl";
const char* kLexicon = DIALOGKIT_DATA_DIR "/lexicon.json";

int run_cli(const std::string& args) {
    const std::string cmd = std::string(kCli) + " " + args + " 2>cli_stderr.log";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() /
                     ("dialogkit-cli-" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

} // namespace

TEST_CASE("usage errors exit 1, data errors exit 2, backend errors exit 3") {
    TempDir dir;
    CHECK(run_cli("no-such-command") == 1);
    CHECK(run_cli("inpaint") == 1); // missing required flags
    CHECK(run_cli("inpaint --passages /nonexistent.jsonl --out " +
                  dir.file("x.jsonl")) == 2);

    // unreachable endpoint: retried, then surfaced as a backend failure
    {
        std::ofstream out(dir.file("one.jsonl"));
        out << R"({"id":"p","title":"T","text":"Only sentence here."})" << '\n';
    }
    CHECK(run_cli("inpaint --passages " + dir.file("one.jsonl") + " --backend http "
                  "--endpoint http://127.0.0.1:9 --timeout 0.2 --out " +
                  dir.file("d.jsonl")) == 3);

    // the endpoint can also arrive through the environment
    ::setenv("INPAINT_LM_ENDPOINT", "http://127.0.0.1:9", 1);
    CHECK(run_cli("inpaint --passages " + dir.file("one.jsonl") +
                  " --backend http --timeout 0.2 --out " + dir.file("d.jsonl")) == 3);
    ::unsetenv("INPAINT_LM_ENDPOINT");
    CHECK(run_cli("inpaint --passages " + dir.file("one.jsonl") +
                  " --backend http --timeout 0.2 --out " + dir.file("d.jsonl")) == 2);
}

TEST_CASE("stub inpainting is rerunnable byte-for-byte") {
    TempDir dir;
    const std::string base = "inpaint --passages " +
                             std::string(kFixturePassages) +
                             " --backend stub --workers 4 --out ";
    REQUIRE(run_cli(base + dir.file("a.jsonl")) == 0);
    REQUIRE(run_cli(base + dir.file("b.jsonl")) == 0);
    CHECK(slurp(dir.file("a.jsonl")) == slurp(dir.file("b.jsonl")));

    const auto dialogs = dialogkit::load_dialogs(dir.file("a.jsonl"));
    CHECK(dialogs.size() == 12);
    for (const auto& d : dialogs) {
        CHECK(d.turn_count() % 2 == 1);
        CHECK(d.utterances[1].text == "What about " + d.title + "?");
    }
}

TEST_CASE("oracle backend reproduces the bundled dialogs through the CLI") {
    TempDir dir;
    // esm has clean sentence boundaries, so text round trips through the
    // splitter
    {
        std::ifstream in(kFixturePassages);
        std::ofstream out(dir.file("esm.jsonl"));
        std::string line;
        while (std::getline(in, line))
            if (line.find("\"esm-") != std::string::npos) out << line << '\n';
    }
    REQUIRE(run_cli("inpaint --passages " + dir.file("esm.jsonl") +
                    " --backend oracle --oracle-file " + kFixtureDialogs +
                    " --out " + dir.file("out.jsonl")) == 0);

    std::vector<std::string> want;
    {
        std::ifstream in(kFixtureDialogs);
        std::string line;
        while (std::getline(in, line))
            if (line.find("\"esm-") != std::string::npos) want.push_back(line);
    }
    const auto got = dialogkit::load_dialogs(dir.file("out.jsonl"));
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(dialogkit::dialog_to_json(got[i]) ==
              json::parse(want[i]).dump());
}

TEST_CASE("evaluation presets set the grade cutoff") {
    TempDir dir;
    {
        std::ofstream run(dir.file("run.txt"));
        run << "q1 Q0 weak 1 0.9 t\nq1 Q0 strong 2 0.8 t\n";
        std::ofstream qrels(dir.file("qrels.txt"));
        qrels << "q1 0 weak 1\nq1 0 strong 2\n";
    }
    REQUIRE(run_cli("eval --run " + dir.file("run.txt") + " --qrels " +
                    dir.file("qrels.txt") +
                    " --metrics mrr@5,ndcg@3 --preset cast20 > " +
                    dir.file("cast20.txt")) == 0);
    REQUIRE(run_cli("eval --run " + dir.file("run.txt") + " --qrels " +
                    dir.file("qrels.txt") +
                    " --metrics mrr@5 --preset cast19 > " +
                    dir.file("cast19.txt")) == 0);
    // grade-1 doc at rank 1 counts only under the lower cutoff
    CHECK(slurp(dir.file("cast20.txt")).find("mrr@5\t0.5") != std::string::npos);
    CHECK(slurp(dir.file("cast19.txt")).find("mrr@5\t1\n") != std::string::npos);
    CHECK(run_cli("eval --run " + dir.file("run.txt") + " --qrels " +
                  dir.file("qrels.txt") + " --metrics f1@5") == 1);
    CHECK(run_cli("eval --run " + dir.file("run.txt") + " --qrels " +
                  dir.file("qrels.txt") + " --preset castXX") == 1);
}

TEST_CASE("retrieval stack round trip: train, index, retrieve, mine, rerank") {
    TempDir dir;
    REQUIRE(run_cli("pipeline --toy 12 --workdir " + dir.file("work") +
                    " --stages 1 --epochs 100 --tau 1.0 --lr 0.2 --batch 4") == 0);

    const std::string examples = dir.file("work/examples.jsonl");
    REQUIRE(run_cli("make-retrieval --dialogs " + dir.file("work/dialogs.jsonl") +
                    " --out " + dir.file("ex.jsonl") + " --queries-out " +
                    dir.file("queries.jsonl") + " --qrels-out " +
                    dir.file("qrels.txt")) == 0);
    CHECK(slurp(dir.file("ex.jsonl")) == slurp(examples));

    REQUIRE(run_cli("train-de --examples " + dir.file("ex.jsonl") + " --out " +
                    dir.file("de.json") +
                    " --dim 16 --embed-dim 16 --buckets 64 --tau 1.0 "
                    "--batch 4 --lr 0.2 --epochs 100 --seed 5") == 0);
    REQUIRE(run_cli("index --params " + dir.file("de.json") + " --passages " +
                    dir.file("work/passages.jsonl") + " --out " +
                    dir.file("idx.bin")) == 0);
    REQUIRE(run_cli("retrieve --index " + dir.file("idx.bin") + " --params " +
                    dir.file("de.json") + " --queries " +
                    dir.file("queries.jsonl") + " --k 10 --out " +
                    dir.file("run.txt")) == 0);
    REQUIRE(run_cli("eval --run " + dir.file("run.txt") + " --qrels " +
                    dir.file("qrels.txt") + " --metrics mrr@5,r@5 > " +
                    dir.file("eval.txt")) == 0);
    CHECK(slurp(dir.file("eval.txt")).find("mrr@5\t1\n") != std::string::npos);

    REQUIRE(run_cli("mine --run " + dir.file("run.txt") + " --qrels " +
                    dir.file("qrels.txt") + " --n 3 --k 10 --seed 9 --out " +
                    dir.file("neg.jsonl")) == 0);
    REQUIRE(run_cli("train-rr --examples " + dir.file("ex.jsonl") +
                    " --negatives " + dir.file("neg.jsonl") + " --passages " +
                    dir.file("work/passages.jsonl") + " --out " +
                    dir.file("rr.json") +
                    " --dim 16 --embed-dim 16 --buckets 64 --lr 0.3 "
                    "--epochs 10 --seed 5") == 0);
    REQUIRE(run_cli("rerank --params " + dir.file("rr.json") + " --run " +
                    dir.file("run.txt") + " --queries " +
                    dir.file("queries.jsonl") + " --passages " +
                    dir.file("work/passages.jsonl") + " --out " +
                    dir.file("rerun.txt")) == 0);
    CHECK(!slurp(dir.file("rerun.txt")).empty());

    // retrain with the mined negatives resolved against the corpus
    REQUIRE(run_cli("train-de --examples " + dir.file("ex.jsonl") +
                    " --negatives " + dir.file("neg.jsonl") + " --passages " +
                    dir.file("work/passages.jsonl") + " --out " +
                    dir.file("de2.json") +
                    " --dim 16 --embed-dim 16 --buckets 64 --tau 1.0 "
                    "--batch 4 --lr 0.2 --epochs 100 --seed 5") == 0);

    // determinism of the whole train step
    REQUIRE(run_cli("train-de --examples " + dir.file("ex.jsonl") + " --out " +
                    dir.file("de_again.json") +
                    " --dim 16 --embed-dim 16 --buckets 64 --tau 1.0 "
                    "--batch 4 --lr 0.2 --epochs 100 --seed 5") == 0);
    CHECK(slurp(dir.file("de.json")) == slurp(dir.file("de_again.json")));

    // fingerprint guard: retrieving with mismatched params is a data error
    CHECK(run_cli("retrieve --index " + dir.file("idx.bin") + " --params " +
                  dir.file("de2.json") + " --queries " +
                  dir.file("queries.jsonl") + " --k 5 --out " +
                  dir.file("bad.txt")) == 2);
}

TEST_CASE("recon, folds, analysis and scanning subcommands") {
    TempDir dir;
    REQUIRE(run_cli("make-recon --dialogs " + std::string(kFixtureDialogs) +
                    " --out " + dir.file("recon.jsonl") +
                    " --per-dialog 2 --seed 3") == 0);
    REQUIRE(run_cli("make-recon --dialogs " + std::string(kFixtureDialogs) +
                    " --out " + dir.file("recon2.jsonl") +
                    " --per-dialog 2 --seed 3") == 0);
    CHECK(slurp(dir.file("recon.jsonl")) == slurp(dir.file("recon2.jsonl")));
    {
        std::ifstream in(dir.file("recon.jsonl"));
        std::string line;
        int rows = 0;
        while (std::getline(in, line)) {
            const auto rec = json::parse(line);
            CHECK(rec.at("input").get<std::string>().find("⋄") !=
                  std::string::npos);
            ++rows;
        }
        CHECK(rows == 24);
    }

    REQUIRE(run_cli("folds --dialogs " + std::string(kFixtureDialogs) +
                    " --k 4 --seed 1 --out " + dir.file("folds.csv")) == 0);
    {
        const std::string folds = slurp(dir.file("folds.csv"));
        int lines = 0;
        for (char c : folds)
            if (c == '\n') ++lines;
        CHECK(lines == 13); // header + 12 dialogs
    }

    REQUIRE(run_cli("analyze-questions --dialogs " +
                    std::string(kFixtureDialogs) + " --out " +
                    dir.file("dist.csv")) == 0);
    CHECK(slurp(dir.file("dist.csv")).find("1,what is,8") != std::string::npos);

    {
        std::ofstream ratings(dir.file("ratings.csv"));
        ratings << "1,1\n1,2\n2,2\n2,1\n";
    }
    REQUIRE(run_cli("alpha --ratings " + dir.file("ratings.csv") + " > " +
                    dir.file("alpha.txt")) == 0);
    CHECK(slurp(dir.file("alpha.txt")).substr(0, 5) == "0.125");

    {
        std::ofstream dialogs(dir.file("scan.jsonl"));
        dialogkit::Dialog d;
        d.id = "s1";
        d.passage_id = "p1";
        d.utterances = {
            {0, "prompt", dialogkit::Source::Prompt},
            {1, "Were African workers called lazy?", dialogkit::Source::Generated},
            {0, "No.", dialogkit::Source::Sentence}};
        dialogs << dialogkit::dialog_to_json(d) << '\n';
    }
    REQUIRE(run_cli("scan-sensitive --dialogs " + dir.file("scan.jsonl") +
                    " --lexicon " + kLexicon + " --out " + dir.file("flags.jsonl") +
                    " > " + dir.file("scan.txt")) == 0);
    CHECK(slurp(dir.file("scan.txt")).find("flagged_dialogs\t1/1") !=
          std::string::npos);
    CHECK(slurp(dir.file("flags.jsonl")).find("lazy") != std::string::npos);
    // not-in-passage mode requires passages
    CHECK(run_cli("scan-sensitive --dialogs " + dir.file("scan.jsonl") +
                  " --lexicon " + kLexicon + " --not-in-passage") == 2);
}
