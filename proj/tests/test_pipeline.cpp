#include <gtest/gtest.h>

#include <sstream>

#include "hetfeed/pipeline.hpp"
#include "test_support.hpp"

using namespace hetfeed;
using hetfeed::testing::fixture;
using hetfeed::testing::TempDir;

namespace {

Json base_config() {
    return Json{
        {"inputs",
         {{"multilabel", {fixture("oasst_sample.jsonl").string()}},
          {"choice", {fixture("winogrande_sample.jsonl").string()}}}},
        {"unify", {{"axis", "toxicity"}, {"polarity", {{"toxicity", "lower_is_positive"}}}}},
        {"select", {{"quality_fraction", 1.0}}},
        {"emit", {{"out_dir", "out"}}}};
}

std::filesystem::path write_config(const TempDir& dir, const Json& cfg) {
    return dir.write("config.json", cfg.dump(2));
}

std::size_t line_count(const std::filesystem::path& p) {
    const auto text = read_file(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::string config_error(const Json& cfg) {
    try {
        parse_pipeline_config(cfg.dump(), "/");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

Json without_timestamp(Json m) {
    m.erase("timestamp");
    return m;
}

} // namespace

TEST(Pipeline, MinimalConfigEmitsArtifacts) {
    TempDir dir;
    auto cfg = base_config();
    cfg["select"] = {{"quality_fraction", 0.2},
                     {"diversity", {{"k", 10}, {"seed", 1}, {"fraction", 1.0}}}};
    cfg["embed"] = {{"file", fixture("prompt_embeddings.jsonl").string()}};
    const auto result = run_pipeline(write_config(dir, cfg));
    const auto out = dir.path() / "out";
    for (const char* name : {"unified.jsonl", "selected.jsonl", "sft.jsonl", "preference.jsonl",
                             "manifest.json", "clusters.json", "selection_report.json"})
        EXPECT_TRUE(std::filesystem::exists(out / name)) << name;

    // 18 multilabel pairs from groups with >= 2 replies, 12 choice pairs.
    EXPECT_EQ(result.counts.unified, 30u);
    EXPECT_EQ(line_count(out / "unified.jsonl"), 30u);
    EXPECT_EQ(result.counts.quality_selected, 6u);
    EXPECT_EQ(result.counts.selected, 6u);
    EXPECT_EQ(line_count(out / "selected.jsonl"), 6u);
    EXPECT_EQ(line_count(out / "sft.jsonl"), 6u);
    EXPECT_EQ(line_count(out / "preference.jsonl"), 6u);
    EXPECT_EQ(result.counts.discarded_single_response, 12u);

    const auto m = Json::parse(read_file(out / "manifest.json"));
    EXPECT_EQ(m["counts"]["unified_per_source"]["multilabel"], 18);
    EXPECT_EQ(m["counts"]["unified_per_source"]["choice"], 12);
    EXPECT_EQ(m["seeds"]["kmeans"], 1);
    EXPECT_EQ(m["inputs"].size(), 3u);
    for (const auto& in : m["inputs"]) EXPECT_EQ(in["sha256"].get<std::string>().size(), 64u);
    EXPECT_EQ(m["config_sha256"], sha256_hex(read_file(dir.path() / "config.json")));
    const auto clusters = cluster_model_from_json(Json::parse(read_file(out / "clusters.json")));
    EXPECT_EQ(clusters.k, 10u);
    // every artifact hash in the manifest matches the file on disk
    for (const auto& a : m["artifacts"])
        EXPECT_EQ(a["sha256"], sha256_file(out / a["name"].get<std::string>()));
}

TEST(Pipeline, FullFractionWithoutClusteringIsIdentity) {
    TempDir dir;
    run_pipeline(write_config(dir, base_config()));
    EXPECT_EQ(read_file(dir.path() / "out" / "selected.jsonl"),
              read_file(dir.path() / "out" / "unified.jsonl"));
}

TEST(Pipeline, DiversityNeedsEmbeddings) {
    auto cfg = base_config();
    cfg["select"]["diversity"] = {{"k", 10}};
    EXPECT_NE(config_error(cfg).find("diversity requires embeddings"), std::string::npos);
}

TEST(Pipeline, SchemaViolationsNameTheField) {
    auto cfg = base_config();
    cfg["select"]["quality_fraction"] = 0.0;
    EXPECT_NE(config_error(cfg).find("select.quality_fraction"), std::string::npos);
    cfg = base_config();
    cfg["select"]["qualty_fraction"] = 0.5;
    EXPECT_NE(config_error(cfg).find("select.qualty_fraction"), std::string::npos);
    cfg = base_config();
    cfg["unify"]["polarity"] = Json::object();
    EXPECT_NE(config_error(cfg).find("unify.polarity.toxicity"), std::string::npos);
    cfg = base_config();
    cfg["unify"]["strategy"] = "mean";
    EXPECT_NE(config_error(cfg).find("unify.strategy"), std::string::npos);
    cfg = base_config();
    cfg["select"]["diversity"] = {{"k", "ten"}};
    cfg["embed"] = {{"file", "x"}};
    EXPECT_NE(config_error(cfg).find("select.diversity.k"), std::string::npos);
    try {
        parse_pipeline_config("{\n  \"inputs\": {\n  oops\n}", "/");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Pipeline, FixtureRunIsDeterministic) {
    TempDir a, b;
    const auto config = fixture("run_config.json");
    const auto ra = run_pipeline(config, a.path());
    const auto rb = run_pipeline(config, b.path());
    for (const char* name : {"unified.jsonl", "labeled.jsonl", "selected.jsonl", "sft.jsonl",
                             "preference.jsonl", "clusters.json", "selection_report.json",
                             "evaluation.json", "probe_model.json"})
        EXPECT_EQ(read_file(a.path() / name), read_file(b.path() / name)) << name;
    EXPECT_EQ(without_timestamp(Json::parse(read_file(a.path() / "manifest.json"))),
              without_timestamp(Json::parse(read_file(b.path() / "manifest.json"))));

    const auto& c = ra.counts;
    EXPECT_LE(c.selected, c.unified);
    EXPECT_EQ(c.sft, c.selected);
    EXPECT_EQ(c.preference, c.selected);
    EXPECT_EQ(c.unified, 30u);
    EXPECT_EQ(c.quality_selected, 18u);
    EXPECT_EQ(c.selected, 9u);
    EXPECT_GT(c.labeled, 0u);
    EXPECT_EQ(rb.counts.selected, c.selected);
    const auto m = ra.manifest;
    EXPECT_EQ(m["evaluation"]["generative_accuracy"], 0.5);
    EXPECT_LE(m["probe"]["final_loss"].get<double>(), m["probe"]["initial_loss"].get<double>());
}

TEST(Pipeline, FailureRemovesPartialArtifacts) {
    TempDir dir;
    auto cfg = base_config();
    cfg["probe"] = {{"embeddings", dir.write("empty.jsonl", "{\"id\":\"nothing\",\"vector\":[1]}\n").string()}};
    EXPECT_THROW(run_pipeline(write_config(dir, cfg)), DataError);
    const auto out = dir.path() / "out";
    EXPECT_FALSE(std::filesystem::exists(out / "unified.jsonl"));
    EXPECT_FALSE(std::filesystem::exists(out / "selected.jsonl"));
    EXPECT_FALSE(std::filesystem::exists(out / "manifest.json"));
}

TEST(Pipeline, SelectedKeepsUnifiedOrder) {
    TempDir dir;
    auto cfg = base_config();
    cfg["select"]["quality_fraction"] = 0.5;
    run_pipeline(write_config(dir, cfg));
    const auto unified = read_preference_pairs(dir.path() / "out" / "unified.jsonl");
    const auto selected = read_preference_pairs(dir.path() / "out" / "selected.jsonl");
    EXPECT_EQ(selected.size(), 15u);
    std::size_t j = 0;
    for (const auto& s : selected) {
        while (j < unified.size() && !(unified[j] == s)) ++j;
        ASSERT_LT(j, unified.size()) << "selected pair out of unified order";
    }
}

TEST(Pipeline, ChoiceOnlyInputs) {
    TempDir dir;
    auto cfg = base_config();
    cfg["inputs"].erase("multilabel");
    cfg.erase("unify");
    const auto r = run_pipeline(write_config(dir, cfg));
    EXPECT_EQ(r.counts.unified, 12u);
}
