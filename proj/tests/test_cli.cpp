#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "hetfeed/unify.hpp"
#include "test_support.hpp"

using namespace hetfeed;
using hetfeed::testing::fixture;
using hetfeed::testing::TempDir;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome cli(const TempDir& dir, const std::string& args) {
    const auto out = dir.path() / "stdout.txt";
    const auto err = dir.path() / "stderr.txt";
    const std::string cmd = std::string("'") + HETFEED_CLI + "' " + args + " >'" + out.string() +
                            "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(out), read_file(err)};
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

} // namespace

TEST(Cli, VersionAndHelp) {
    TempDir dir;
    const auto v = cli(dir, "--version");
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find(std::string(version)), std::string::npos);
    EXPECT_EQ(cli(dir, "--help").code, 0);
    EXPECT_EQ(cli(dir, "").code, 2);
    EXPECT_EQ(cli(dir, "frobnicate").code, 2);
}

TEST(Cli, StagesChainTogether) {
    TempDir dir;
    const auto unified = dir.path() / "unified.jsonl";
    auto r = cli(dir, "unify --multilabel " + q(fixture("oasst_sample.jsonl")) + " --choice " +
                          q(fixture("winogrande_sample.jsonl")) +
                          " --axis toxicity --polarity toxicity=lower_is_positive --out " + q(unified));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_preference_pairs(unified).size(), 30u);

    const auto selected = dir.path() / "selected.jsonl";
    r = cli(dir, "select --in " + q(unified) + " --out " + q(selected) +
                     " --quality 0.6 --diversity --diversity-fraction 0.5 --k 10 --seed 7 --embeddings " +
                     q(fixture("prompt_embeddings.jsonl")) + " --report " + q(dir.path() / "report.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_preference_pairs(selected).size(), 9u);
    const auto report = Json::parse(read_file(dir.path() / "report.json"));
    EXPECT_EQ(report["selected_count"], 9);

    r = cli(dir, "emit --in " + q(selected) + " --sft-out " + q(dir.path() / "sft.jsonl") +
                     " --preference-out " + q(dir.path() / "pref.jsonl"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_file(dir.path() / "pref.jsonl").find("\"rejected\"") != std::string::npos, true);

    r = cli(dir, "probe --pairs " + q(selected) + " --embeddings " +
                     q(fixture("response_embeddings.jsonl")) + " --out " + q(dir.path() / "probe.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(Json::parse(read_file(dir.path() / "probe.json"))["dim"], 8);

    r = cli(dir, "evaluate --bias " + q(fixture("bias_eval.jsonl")) + " --generative " +
                     q(fixture("generative_eval.jsonl")));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(Json::parse(r.out)["generative_accuracy"], 0.5);

    r = cli(dir, "ingest --multilabel " + q(fixture("oasst_sample.jsonl")));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NO_THROW(Json::parse(r.out));
}

TEST(Cli, ExitCodes) {
    TempDir dir;
    const auto pairs = dir.write("p.jsonl", "");
    auto r = cli(dir, "unify --choice " + q(fixture("winogrande_sample.jsonl")) + " --out " + q(pairs));
    ASSERT_EQ(r.code, 0) << r.err;
    // config error: diversity without embeddings
    r = cli(dir, "select --in " + q(pairs) + " --out " + q(dir.path() / "x.jsonl") + " --diversity");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("diversity requires embeddings"), std::string::npos) << r.err;
    // data error: malformed input line
    const auto bad = dir.write("bad.jsonl", "{\"id\":\"a\",\"role\":\"prompter\",\"text\":\"x\"}\nnot json\n");
    r = cli(dir, "ingest --multilabel " + q(bad));
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find(":2:"), std::string::npos) << r.err;
    // I/O error: missing file
    r = cli(dir, "ingest --multilabel " + q(dir.path() / "missing.jsonl"));
    EXPECT_EQ(r.code, 4);
    // remote error: nothing listening
    r = cli(dir, "select --in " + q(pairs) + " --out " + q(dir.path() / "s.jsonl") +
                     " --diversity --k 2 --embed-endpoint http://127.0.0.1:9/embed --embed-retries 0");
    EXPECT_EQ(r.code, 5) << r.err;
    EXPECT_TRUE(r.out.empty());
}

TEST(Cli, RunWritesArtifactsAndManifest) {
    TempDir dir;
    const auto r = cli(dir, "run --config " + q(fixture("run_config.json")) + " --out-dir " + q(dir.path() / "o"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = Json::parse(read_file(dir.path() / "o" / "manifest.json"));
    EXPECT_EQ(m["counts"]["selected"], 9);
    EXPECT_EQ(m["counts"]["sft"], m["counts"]["selected"]);
    const auto bad = dir.write("bad.json", "{\"select\": {\"quality_fraction\": 2}}");
    EXPECT_EQ(cli(dir, "run --config " + q(bad)).code, 2);
}
