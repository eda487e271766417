#pragma once

// Config-driven end-to-end run: ingest -> unify -> select -> emit ->
// evaluate -> probe, with a manifest of input hashes, seeds and counts.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hetfeed/corpus.hpp"
#include "hetfeed/embed.hpp"
#include "hetfeed/emit.hpp"
#include "hetfeed/error.hpp"
#include "hetfeed/evaluate.hpp"
#include "hetfeed/io.hpp"
#include "hetfeed/kmeans.hpp"
#include "hetfeed/probe.hpp"
#include "hetfeed/select.hpp"
#include "hetfeed/types.hpp"
#include "hetfeed/unify.hpp"

namespace hetfeed {

namespace fs = std::filesystem;

struct PipelineConfig {
    fs::path base_dir;

    std::vector<fs::path> multilabel_inputs;
    std::vector<fs::path> choice_inputs;
    std::string blank_marker{default_blank_marker};

    // Axis that ranks responses into best/worst preference pairs.
    std::optional<std::string> axis;
    PolarityMap polarity;
    CutoffStrategy strategy = CutoffStrategy::threshold(0.5);
    CutoffScope cutoff_scope = CutoffScope::corpus;
    // +/-1 labeled corpus (simple unionization) over these axes when non-empty.
    std::vector<std::string> labeled_axes;

    double quality_fraction = 1.0;
    bool diversity = false;
    KMeansOptions kmeans;
    double diversity_fraction = 1.0;
    bool normalize = false;
    bool preserve_source_ratio = true;

    std::optional<EmbeddingProviderConfig> embed;
    std::optional<fs::path> embed_cache;

    fs::path out_dir = "out";

    std::optional<fs::path> bias_input;
    std::optional<fs::path> generative_input;

    bool probe = false;
    std::optional<EmbeddingProviderConfig> probe_embed;
    ProbeOptions probe_options;
};

namespace detail {

class ConfigReader {
public:
    ConfigReader(const Json& j, std::string section) : j_(j), section_(std::move(section)) {
        if (!j_.is_object()) throw ConfigError("config: '" + section_ + "' must be an object");
    }

    // Unknown keys are schema violations.
    void only(std::initializer_list<const char*> keys) const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            bool ok = false;
            for (auto k : keys) ok = ok || it.key() == k;
            if (!ok) throw ConfigError("config: unknown field '" + field(it.key()) + "'");
        }
    }

    bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const Json& raw(const char* key) const { return j_.at(key); }
    std::string field(const std::string& key) const { return section_ + "." + key; }

    template <class T>
    T get(const char* key, T fallback) const {
        if (!has(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: field '" + field(key) + "' has the wrong type");
        }
    }

    template <class T>
    std::optional<T> opt(const char* key) const {
        if (!has(key)) return std::nullopt;
        return get<T>(key, T{});
    }

    double positive_fraction(const char* key, double fallback) const {
        const double v = get<double>(key, fallback);
        if (!(v > 0.0 && v <= 1.0))
            throw ConfigError("config: field '" + field(key) + "' must lie in (0, 1]");
        return v;
    }

private:
    const Json& j_;
    std::string section_;
};

inline std::vector<fs::path> path_list(const ConfigReader& r, const char* key) {
    std::vector<fs::path> out;
    if (!r.has(key)) return out;
    const Json& v = r.raw(key);
    if (v.is_string()) return {v.get<std::string>()};
    if (!v.is_array()) throw ConfigError("config: field '" + r.field(key) + "' must be a path or list");
    for (const auto& p : v) {
        if (!p.is_string())
            throw ConfigError("config: field '" + r.field(key) + "' must hold strings");
        out.emplace_back(p.get<std::string>());
    }
    return out;
}

inline EmbeddingProviderConfig provider_from(const ConfigReader& r) {
    EmbeddingProviderConfig cfg;
    const bool file = r.has("file");
    const bool http = r.has("endpoint");
    if (file == http)
        throw ConfigError("config: '" + r.field("") + "' needs exactly one of 'file' or 'endpoint'");
    if (file) {
        cfg.kind = EmbeddingProviderConfig::Kind::file;
        cfg.path = r.get<std::string>("file", "");
    } else {
        cfg.kind = EmbeddingProviderConfig::Kind::http;
        cfg.endpoint = r.get<std::string>("endpoint", "");
    }
    cfg.batch_size = r.get<std::size_t>("batch_size", cfg.batch_size);
    if (cfg.batch_size == 0) throw ConfigError("config: field '" + r.field("batch_size") + "' must be >= 1");
    cfg.timeout = std::chrono::milliseconds(r.get<long long>("timeout_ms", cfg.timeout.count()));
    cfg.max_retries = r.get<std::size_t>("max_retries", cfg.max_retries);
    cfg.backoff = std::chrono::milliseconds(r.get<long long>("backoff_ms", cfg.backoff.count()));
    cfg.max_in_flight = r.get<std::size_t>("max_in_flight", cfg.max_in_flight);
    cfg.model = r.get<std::string>("model", "");
    cfg.expected_dim = r.opt<std::size_t>("expected_dim");
    return cfg;
}

inline CutoffStrategy strategy_from(const ConfigReader& r) {
    const auto kind = r.get<std::string>("strategy", "threshold");
    if (kind == "threshold") return CutoffStrategy::threshold(r.get<double>("delta", 0.5));
    if (kind == "median") return CutoffStrategy::median();
    if (kind == "quartiles") return CutoffStrategy::quartiles();
    throw ConfigError("config: field '" + r.field("strategy") +
                      "' must be threshold, median or quartiles");
}

inline fs::path resolve(const fs::path& base, const fs::path& p) {
    return p.is_absolute() ? p : base / p;
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace detail

inline PipelineConfig parse_pipeline_config(const std::string& text, const fs::path& base_dir) {
    Json root;
    try {
        root = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) line += text[i] == '\n';
        throw ConfigError("config: malformed JSON at line " + std::to_string(line) + ": " +
                          e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    detail::ConfigReader top(root, "config");
    top.only({"inputs", "unify", "select", "embed", "emit", "evaluate", "probe"});

    PipelineConfig cfg;
    cfg.base_dir = base_dir;
    static const Json empty = Json::object();
    auto section = [&](const char* key) {
        return detail::ConfigReader(top.has(key) ? root.at(key) : empty, key);
    };

    {
        auto r = section("inputs");
        r.only({"multilabel", "choice", "blank_marker"});
        cfg.multilabel_inputs = detail::path_list(r, "multilabel");
        cfg.choice_inputs = detail::path_list(r, "choice");
        cfg.blank_marker = r.get<std::string>("blank_marker", cfg.blank_marker);
        if (cfg.blank_marker.empty())
            throw ConfigError("config: field 'inputs.blank_marker' must not be empty");
        if (cfg.multilabel_inputs.empty() && cfg.choice_inputs.empty())
            throw ConfigError("config: 'inputs' declares no multilabel or choice files");
    }
    {
        auto r = section("unify");
        r.only({"axis", "polarity", "strategy", "delta", "cutoff_scope", "labeled_axes"});
        cfg.axis = r.opt<std::string>("axis");
        if (r.has("polarity")) {
            const Json& p = r.raw("polarity");
            if (!p.is_object()) throw ConfigError("config: field 'unify.polarity' must be an object");
            for (auto it = p.begin(); it != p.end(); ++it) {
                if (!it.value().is_string())
                    throw ConfigError("config: field 'unify.polarity." + it.key() + "' must be a string");
                cfg.polarity[it.key()] = parse_polarity(it.value().get<std::string>());
            }
        }
        cfg.strategy = detail::strategy_from(r);
        const auto scope = r.get<std::string>("cutoff_scope", "corpus");
        if (scope == "corpus")
            cfg.cutoff_scope = CutoffScope::corpus;
        else if (scope == "group")
            cfg.cutoff_scope = CutoffScope::group;
        else
            throw ConfigError("config: field 'unify.cutoff_scope' must be group or corpus");
        cfg.labeled_axes = r.get<std::vector<std::string>>("labeled_axes", {});
        if (!cfg.multilabel_inputs.empty() && !cfg.axis)
            throw ConfigError("config: field 'unify.axis' is required with multilabel inputs");
        if (cfg.axis && !cfg.polarity.contains(*cfg.axis))
            throw ConfigError("config: field 'unify.polarity." + *cfg.axis + "' must be declared");
        for (const auto& a : cfg.labeled_axes)
            if (!cfg.polarity.contains(a))
                throw ConfigError("config: field 'unify.polarity." + a + "' must be declared");
        if (cfg.strategy.kind == CutoffStrategy::Kind::threshold &&
            !(cfg.strategy.delta >= 0.0 && cfg.strategy.delta <= 1.0))
            throw ConfigError("config: field 'unify.delta' must lie in [0, 1]");
    }
    {
        auto r = section("select");
        r.only({"quality_fraction", "diversity"});
        cfg.quality_fraction = r.positive_fraction("quality_fraction", 1.0);
        if (r.has("diversity")) {
            detail::ConfigReader d(r.raw("diversity"), "select.diversity");
            d.only({"enabled", "k", "seed", "fraction", "normalize", "max_iters", "tol",
                    "restarts", "threads", "preserve_source_ratio"});
            cfg.diversity = d.get<bool>("enabled", true);
            cfg.kmeans.k = d.get<std::size_t>("k", cfg.kmeans.k);
            cfg.kmeans.seed = d.get<std::uint64_t>("seed", cfg.kmeans.seed);
            cfg.kmeans.max_iters = d.get<std::size_t>("max_iters", cfg.kmeans.max_iters);
            cfg.kmeans.tol = d.get<double>("tol", cfg.kmeans.tol);
            cfg.kmeans.restarts = d.get<std::size_t>("restarts", cfg.kmeans.restarts);
            cfg.kmeans.threads = d.get<std::size_t>("threads", cfg.kmeans.threads);
            cfg.diversity_fraction = d.positive_fraction("fraction", 1.0);
            cfg.normalize = d.get<bool>("normalize", false);
            cfg.preserve_source_ratio = d.get<bool>("preserve_source_ratio", true);
            if (cfg.kmeans.k == 0) throw ConfigError("config: field 'select.diversity.k' must be >= 1");
            if (cfg.kmeans.max_iters == 0)
                throw ConfigError("config: field 'select.diversity.max_iters' must be >= 1");
            if (!(cfg.kmeans.tol >= 0.0))
                throw ConfigError("config: field 'select.diversity.tol' must be >= 0");
        }
    }
    {
        auto r = section("embed");
        r.only({"file", "endpoint", "batch_size", "timeout_ms", "max_retries", "backoff_ms",
                "max_in_flight", "model", "expected_dim", "cache"});
        if (r.has("file") || r.has("endpoint")) cfg.embed = detail::provider_from(r);
        if (auto c = r.opt<std::string>("cache")) cfg.embed_cache = *c;
    }
    {
        auto r = section("emit");
        r.only({"out_dir"});
        cfg.out_dir = r.get<std::string>("out_dir", "out");
    }
    {
        auto r = section("evaluate");
        r.only({"bias", "generative"});
        if (auto p = r.opt<std::string>("bias")) cfg.bias_input = *p;
        if (auto p = r.opt<std::string>("generative")) cfg.generative_input = *p;
    }
    {
        auto r = section("probe");
        r.only({"enabled", "embeddings", "endpoint", "epochs", "lr", "seed", "l2", "batch_size",
                "model", "expected_dim"});
        cfg.probe = top.has("probe") && r.get<bool>("enabled", true);
        cfg.probe_options.epochs = r.get<std::size_t>("epochs", cfg.probe_options.epochs);
        cfg.probe_options.lr = r.get<double>("lr", cfg.probe_options.lr);
        cfg.probe_options.seed = r.get<std::uint64_t>("seed", cfg.probe_options.seed);
        cfg.probe_options.l2 = r.get<double>("l2", 0.0);
        if (cfg.probe) {
            if (r.has("embeddings") == r.has("endpoint"))
                throw ConfigError("config: 'probe' needs exactly one of 'embeddings' or 'endpoint'");
            EmbeddingProviderConfig p;
            if (r.has("embeddings")) {
                p.path = r.get<std::string>("embeddings", "");
            } else {
                p.kind = EmbeddingProviderConfig::Kind::http;
                p.endpoint = r.get<std::string>("endpoint", "");
            }
            p.batch_size = r.get<std::size_t>("batch_size", p.batch_size);
            p.model = r.get<std::string>("model", "");
            p.expected_dim = r.opt<std::size_t>("expected_dim");
            cfg.probe_embed = p;
            if (!(cfg.probe_options.lr > 0.0))
                throw ConfigError("config: field 'probe.lr' must be positive");
        }
    }
    if (cfg.diversity && !cfg.embed)
        throw ConfigError("config: diversity requires embeddings ('embed.file' or 'embed.endpoint')");

    // Paths are relative to the config file.
    for (auto& p : cfg.multilabel_inputs) p = detail::resolve(base_dir, p);
    for (auto& p : cfg.choice_inputs) p = detail::resolve(base_dir, p);
    if (cfg.embed && cfg.embed->kind == EmbeddingProviderConfig::Kind::file)
        cfg.embed->path = detail::resolve(base_dir, cfg.embed->path);
    if (cfg.embed_cache) cfg.embed_cache = detail::resolve(base_dir, *cfg.embed_cache);
    cfg.out_dir = detail::resolve(base_dir, cfg.out_dir);
    if (cfg.bias_input) cfg.bias_input = detail::resolve(base_dir, *cfg.bias_input);
    if (cfg.generative_input) cfg.generative_input = detail::resolve(base_dir, *cfg.generative_input);
    if (cfg.probe_embed && cfg.probe_embed->kind == EmbeddingProviderConfig::Kind::file)
        cfg.probe_embed->path = detail::resolve(base_dir, cfg.probe_embed->path);
    return cfg;
}

inline PipelineConfig load_pipeline_config(const fs::path& path) {
    return parse_pipeline_config(read_file(path), path.parent_path());
}

struct PipelineCounts {
    std::size_t multilabel_records = 0;
    std::size_t choice_records = 0;
    std::size_t prompt_groups = 0;
    std::size_t discarded_single_response = 0;
    std::size_t discarded_identical = 0;
    std::size_t unified = 0;
    std::size_t labeled = 0;
    std::size_t quality_selected = 0;
    std::size_t selected = 0;
    std::size_t sft = 0;
    std::size_t preference = 0;
};

struct PipelineResult {
    Json manifest;
    PipelineCounts counts;
    fs::path out_dir;
};

namespace detail {

// Tracks written artifacts so a failed run can remove them.
class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& content) {
        const auto path = dir_ / name;
        written_.push_back(path);
        write_file(path, content);
        entries_.push_back(Json{{"name", name},
                                {"sha256", sha256_hex(content)},
                                {"bytes", content.size()}});
    }

    void rollback() noexcept {
        for (const auto& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
        written_.clear();
    }

    void commit() { written_.clear(); }
    const Json& entries() const { return entries_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<fs::path> written_;
    Json entries_ = Json::array();
};

inline Json input_entry(const std::string& role, const fs::path& path, const fs::path& base) {
    const auto bytes = read_file(path);
    return Json{{"role", role},
                {"path", fs::relative(path, base).generic_string()},
                {"sha256", sha256_hex(bytes)},
                {"bytes", bytes.size()}};
}

template <class Record>
std::string jsonl(const std::vector<Record>& records) {
    std::string out;
    for (const auto& r : records) out += dump_line(to_json(r));
    return out;
}

inline std::vector<PreferencePair> in_corpus_order(const std::vector<PreferencePair>& subset,
                                                   const std::vector<PreferencePair>& corpus) {
    std::map<decltype(dedup_key(corpus.front())), std::size_t> position;
    for (std::size_t i = 0; i < corpus.size(); ++i) position.emplace(dedup_key(corpus[i]), i);
    std::vector<std::pair<std::size_t, const PreferencePair*>> keyed;
    for (const auto& p : subset) keyed.emplace_back(position.at(dedup_key(p)), &p);
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<PreferencePair> out;
    for (const auto& [pos, p] : keyed) out.push_back(*p);
    return out;
}

inline Json run_stages(const PipelineConfig& cfg, ArtifactWriter& out, PipelineCounts& counts) {
    Json manifest;
    manifest["tool"] = "hetfeed";
    manifest["version"] = std::string(version);
    manifest["timestamp"] = utc_timestamp();

    // ingest
    Json inputs = Json::array();
    std::vector<MultiLabelRecord> records;
    for (const auto& path : cfg.multilabel_inputs) {
        inputs.push_back(input_entry("multilabel", path, cfg.base_dir));
        auto part = parse_multilabel(path);
        records.insert(records.end(), std::make_move_iterator(part.begin()),
                       std::make_move_iterator(part.end()));
    }
    validate_multilabel(records);
    std::vector<ChoicePairRecord> choices;
    for (const auto& path : cfg.choice_inputs) {
        inputs.push_back(input_entry("choice", path, cfg.base_dir));
        auto part = parse_choice(path, cfg.blank_marker);
        choices.insert(choices.end(), part.begin(), part.end());
    }
    if (cfg.embed && cfg.embed->kind == EmbeddingProviderConfig::Kind::file)
        inputs.push_back(input_entry("prompt_embeddings", cfg.embed->path, cfg.base_dir));
    if (cfg.bias_input) inputs.push_back(input_entry("bias_eval", *cfg.bias_input, cfg.base_dir));
    if (cfg.generative_input)
        inputs.push_back(input_entry("generative_eval", *cfg.generative_input, cfg.base_dir));
    if (cfg.probe_embed && cfg.probe_embed->kind == EmbeddingProviderConfig::Kind::file)
        inputs.push_back(input_entry("probe_embeddings", cfg.probe_embed->path, cfg.base_dir));
    manifest["inputs"] = std::move(inputs);
    counts.multilabel_records = records.size();
    counts.choice_records = choices.size();

    // unify
    const auto groups = link_prompt_responses(records);
    counts.prompt_groups = groups.size();
    std::vector<PreferencePair> ml_pairs;
    for (const auto& g : groups) {
        if (g.responses.size() < 2) {
            ++counts.discarded_single_response;
            continue;
        }
        if (auto p = best_worst_pair(g, *cfg.axis, cfg.polarity.at(*cfg.axis)))
            ml_pairs.push_back(std::move(*p));
        else
            ++counts.discarded_identical;
    }
    std::vector<PreferencePair> choice_pairs;
    for (const auto& c : choices) choice_pairs.push_back(choice_to_preference(c, cfg.blank_marker));
    const auto unified = take_union(std::vector{ml_pairs, choice_pairs});
    counts.unified = unified.records.size();
    out.write("unified.jsonl", jsonl(unified.records));

    if (!cfg.labeled_axes.empty()) {
        auto ml = expand_multilabel(groups, cfg.labeled_axes, cfg.strategy, cfg.polarity,
                                    cfg.cutoff_scope);
        std::vector<LabeledExample> ch;
        for (const auto& c : choices) {
            auto two = expand_choice(c, cfg.blank_marker);
            ch.insert(ch.end(), two.begin(), two.end());
        }
        const auto labeled = take_union(std::vector{ml, ch});
        counts.labeled = labeled.records.size();
        out.write("labeled.jsonl", jsonl(labeled.records));
    }

    // select
    std::vector<PreferencePair> selected =
        unified.records.empty() ? std::vector<PreferencePair>{}
                                : select_top_fraction(unified.records, cfg.quality_fraction);
    counts.quality_selected = selected.size();
    Json selection;
    selection["quality_fraction"] = cfg.quality_fraction;
    if (cfg.diversity && !selected.empty()) {
        // Clusters are fitted over every unified prompt, then the
        // quality-selected pairs are sampled evenly across them.
        TextList texts;
        std::set<std::string> seen;
        for (const auto& p : unified.records)
            if (seen.insert(p.prompt_id).second) texts.emplace_back(p.prompt_id, p.prompt);
        auto embeddings = provide_embeddings(*cfg.embed, texts);
        if (cfg.embed->kind == EmbeddingProviderConfig::Kind::http && cfg.embed_cache)
            save_embeddings(*cfg.embed_cache, embeddings);
        if (cfg.normalize) embeddings = normalize_embeddings(embeddings);
        const auto model = kmeans_fit(embeddings, cfg.kmeans);
        const auto ratio = cfg.preserve_source_ratio ? std::optional(source_ratio_of(selected))
                                                     : std::nullopt;
        auto div = diversity_sample(selected, model, cfg.diversity_fraction, ratio);
        div.report.discarded_single_response = counts.discarded_single_response;
        out.write("clusters.json", to_json(model).dump(2) + "\n");
        out.write("selection_report.json", to_json(div.report).dump(2) + "\n");
        selection["diversity"] = Json{{"k", model.k},
                                      {"fraction", cfg.diversity_fraction},
                                      {"inertia", model.inertia},
                                      {"iterations", model.iterations}};
        selected = std::move(div.pairs);
    }
    selected = in_corpus_order(selected, unified.records);
    counts.selected = selected.size();
    out.write("selected.jsonl", jsonl(selected));

    // emit
    const auto sft = render_sft(selected);
    const auto pref = render_preference(selected);
    counts.sft = selected.size();
    counts.preference = selected.size();
    out.write("sft.jsonl", sft);
    out.write("preference.jsonl", pref);

    // evaluate
    if (cfg.bias_input || cfg.generative_input) {
        std::optional<std::vector<BiasEvalItem>> bias;
        std::optional<std::vector<GenEvalItem>> gen;
        if (cfg.bias_input) bias = load_bias_items(*cfg.bias_input);
        if (cfg.generative_input) gen = load_gen_items(*cfg.generative_input);
        auto report = evaluation_report(bias, gen);
        out.write("evaluation.json", report.dump(2) + "\n");
        manifest["evaluation"] = std::move(report);
    }

    // probe
    if (cfg.probe) {
        TextList texts;
        std::set<std::string> seen;
        for (const auto& p : selected)
            for (const auto* t : {&p.chosen, &p.rejected})
                if (seen.insert(*t).second) texts.emplace_back(*t, *t);
        const auto by_text = provide_embeddings(*cfg.probe_embed, texts);
        const auto pairs = embed_pairs(selected, by_text);
        std::vector<double> losses;
        const auto model = train_reward(pairs, cfg.probe_options, &losses);
        out.write("probe_model.json", to_json(model).dump() + "\n");
        manifest["probe"] = Json{{"epochs", cfg.probe_options.epochs},
                                 {"lr", cfg.probe_options.lr},
                                 {"initial_loss", losses.front()},
                                 {"final_loss", losses.back()},
                                 {"training_accuracy", pairwise_accuracy(model, pairs)}};
    }

    manifest["seeds"] = Json{{"kmeans", cfg.kmeans.seed}, {"probe", cfg.probe_options.seed}};
    manifest["counts"] = Json{{"multilabel_records", counts.multilabel_records},
                              {"choice_records", counts.choice_records},
                              {"prompt_groups", counts.prompt_groups},
                              {"discarded_single_response", counts.discarded_single_response},
                              {"discarded_identical", counts.discarded_identical},
                              {"unified", counts.unified},
                              {"unified_per_source",
                               Json{{"multilabel", unified.per_source.contains(Source::multilabel)
                                                       ? unified.per_source.at(Source::multilabel)
                                                       : 0},
                                    {"choice", unified.per_source.contains(Source::choice)
                                                   ? unified.per_source.at(Source::choice)
                                                   : 0}}},
                              {"labeled", counts.labeled},
                              {"quality_selected", counts.quality_selected},
                              {"selected", counts.selected},
                              {"sft", counts.sft},
                              {"preference", counts.preference}};
    manifest["selection"] = std::move(selection);
    return manifest;
}

} // namespace detail

// Runs every configured stage. Artifacts go to cfg.out_dir (or out_dir_override);
// on failure all artifacts written by this run are removed before rethrowing.
inline PipelineResult run_pipeline(const PipelineConfig& cfg,
                                   const std::optional<fs::path>& out_dir_override = std::nullopt,
                                   const std::string& config_bytes = {}) {
    PipelineResult result;
    result.out_dir = out_dir_override ? *out_dir_override : cfg.out_dir;
    detail::ArtifactWriter out(result.out_dir);
    try {
        result.manifest = detail::run_stages(cfg, out, result.counts);
        if (!config_bytes.empty()) result.manifest["config_sha256"] = sha256_hex(config_bytes);
        result.manifest["artifacts"] = out.entries();
        out.write("manifest.json", result.manifest.dump(2) + "\n");
    } catch (...) {
        out.rollback();
        throw;
    }
    out.commit();
    return result;
}

inline PipelineResult run_pipeline(const fs::path& config_path,
                                   const std::optional<fs::path>& out_dir_override = std::nullopt) {
    const auto text = read_file(config_path);
    const auto cfg = parse_pipeline_config(text, config_path.parent_path());
    return run_pipeline(cfg, out_dir_override, text);
}

} // namespace hetfeed
