// hetfeed: command-line front end. Each subcommand wraps one pipeline stage;
// `run` executes the whole pipeline from a JSON config.
//
// Exit codes: 0 ok, 2 config/usage error, 3 data error, 4 I/O error,
// 5 remote-service error.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hetfeed/hetfeed.hpp"

namespace {

using namespace hetfeed;

void print_or_write(const Json& j, const std::string& out) {
    const auto text = j.dump(2) + "\n";
    if (out.empty())
        std::cout << text;
    else
        write_file(out, text);
}

PolarityMap parse_polarities(const std::vector<std::string>& specs) {
    PolarityMap m;
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--polarity expects AXIS=higher_is_positive|lower_is_positive");
        m[s.substr(0, eq)] = parse_polarity(s.substr(eq + 1));
    }
    return m;
}

CutoffStrategy parse_strategy(const std::string& kind, double delta) {
    if (kind == "threshold") return CutoffStrategy::threshold(delta);
    if (kind == "median") return CutoffStrategy::median();
    if (kind == "quartiles") return CutoffStrategy::quartiles();
    throw ConfigError("--strategy must be threshold, median or quartiles");
}

struct EmbedFlags {
    std::string file;
    std::string endpoint;
    std::size_t batch = 32;
    std::size_t retries = 3;
    std::string model;
    std::string cache;

    void add(CLI::App* app) {
        app->add_option("--embeddings", file, "Prompt embeddings JSONL {id, vector}");
        app->add_option("--embed-endpoint", endpoint, "HTTP embedding service URL");
        app->add_option("--embed-batch", batch, "Texts per embedding request")
            ->check(CLI::PositiveNumber);
        app->add_option("--embed-retries", retries, "Retries per failed request");
        app->add_option("--embed-model", model, "Embedding model name (MiniLM implies dim 384)");
        app->add_option("--embed-cache", cache, "Write fetched embeddings to this JSONL file");
    }

    std::optional<EmbeddingProviderConfig> config() const {
        if (!file.empty() && !endpoint.empty())
            throw ConfigError("use either --embeddings or --embed-endpoint, not both");
        if (file.empty() && endpoint.empty()) return std::nullopt;
        EmbeddingProviderConfig cfg;
        if (!file.empty()) {
            cfg.path = file;
        } else {
            cfg.kind = EmbeddingProviderConfig::Kind::http;
            cfg.endpoint = endpoint;
        }
        cfg.batch_size = batch;
        cfg.max_retries = retries;
        cfg.model = model;
        return cfg;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"Unify heterogeneous human feedback into preference data, select, emit and score"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version));

    // ingest
    std::vector<std::string> ml_inputs, choice_inputs;
    std::string blank_marker{default_blank_marker};
    std::string ingest_out;
    auto* ingest = app.add_subcommand("ingest", "Validate inputs and summarise their structure");
    ingest->add_option("--multilabel", ml_inputs, "Conversation-tree JSONL files");
    ingest->add_option("--choice", choice_inputs, "Fill-in-the-blank choice JSONL files");
    ingest->add_option("--blank-marker", blank_marker, "Blank marker in choice sentences");
    ingest->add_option("--out", ingest_out, "Write the summary here instead of stdout");

    // unify
    std::string axis, unify_out, labeled_out, strategy = "threshold", scope = "corpus";
    std::vector<std::string> polarity_specs, labeled_axes;
    double delta = 0.5;
    auto* unify = app.add_subcommand("unify", "Build the unified preference corpus");
    unify->add_option("--multilabel", ml_inputs, "Conversation-tree JSONL files");
    unify->add_option("--choice", choice_inputs, "Fill-in-the-blank choice JSONL files");
    unify->add_option("--blank-marker", blank_marker, "Blank marker in choice sentences");
    unify->add_option("--axis", axis, "Label axis ranking responses into best/worst pairs");
    unify->add_option("--polarity", polarity_specs, "AXIS=higher_is_positive|lower_is_positive");
    unify->add_option("--out", unify_out, "Unified preference JSONL")->required();
    unify->add_option("--labeled-out", labeled_out, "Also write the +/-1 labeled corpus");
    unify->add_option("--labeled-axes", labeled_axes, "Axes expanded into labeled examples");
    unify->add_option("--strategy", strategy, "threshold | median | quartiles");
    unify->add_option("--delta", delta, "Threshold for the threshold strategy");
    unify->add_option("--cutoff-scope", scope, "group | corpus");

    // select
    std::string select_in, select_out, report_out, clusters_out;
    double quality = 1.0, diversity_fraction = 1.0;
    KMeansOptions km;
    bool diversity = false, normalize = false, no_ratio = false;
    EmbedFlags select_embed;
    auto* select = app.add_subcommand("select", "Quality and diversity selection");
    select->add_option("--in", select_in, "Unified preference JSONL")->required();
    select->add_option("--out", select_out, "Selected preference JSONL")->required();
    select->add_option("--quality", quality, "Fraction kept by margin ranking");
    select->add_flag("--diversity", diversity, "Enable cluster-even diversity selection");
    select->add_option("--diversity-fraction", diversity_fraction, "Fraction kept by diversity");
    select->add_option("--k", km.k, "Number of clusters");
    select->add_option("--seed", km.seed, "k-means++ seed");
    select->add_option("--max-iters", km.max_iters, "Lloyd iteration cap");
    select->add_option("--tol", km.tol, "Centroid shift tolerance");
    select->add_option("--restarts", km.restarts, "k-means restarts (seed, seed+1, ...)");
    select->add_option("--threads", km.threads, "Assignment threads");
    select->add_flag("--normalize", normalize, "Unit-normalise embeddings before clustering");
    select->add_flag("--no-source-ratio", no_ratio, "Do not preserve the per-source ratio");
    select->add_option("--report", report_out, "Selection report JSON");
    select->add_option("--clusters-out", clusters_out, "Cluster model JSON");
    select_embed.add(select);

    // emit
    std::string emit_in, sft_out, pref_out;
    auto* emit = app.add_subcommand("emit", "Write SFT and preference training files");
    emit->add_option("--in", emit_in, "Selected preference JSONL")->required();
    emit->add_option("--sft-out", sft_out, "SFT JSONL");
    emit->add_option("--preference-out", pref_out, "Preference JSONL");

    // evaluate
    std::string bias_in, gen_in, eval_out;
    auto* evaluate = app.add_subcommand("evaluate", "Bias entropy and generative accuracy");
    evaluate->add_option("--bias", bias_in, "JSONL {id, logit_pro, logit_anti}");
    evaluate->add_option("--generative", gen_in, "JSONL {id, generation, cluster}");
    evaluate->add_option("--out", eval_out, "Report JSON (default stdout)");

    // probe
    std::string probe_pairs, probe_embeddings, probe_out;
    ProbeOptions probe_opts;
    auto* probe = app.add_subcommand("probe", "Train a linear pairwise reward probe");
    probe->add_option("--pairs", probe_pairs, "Preference JSONL")->required();
    probe->add_option("--embeddings", probe_embeddings, "Response embeddings keyed by text")
        ->required();
    probe->add_option("--epochs", probe_opts.epochs, "Full-batch gradient steps");
    probe->add_option("--lr", probe_opts.lr, "Learning rate");
    probe->add_option("--seed", probe_opts.seed, "Seed recorded in the model");
    probe->add_option("--l2", probe_opts.l2, "L2 penalty");
    probe->add_option("--out", probe_out, "Model JSON");

    // run
    std::string config_path, out_dir;
    auto* runcmd = app.add_subcommand("run", "Run the full pipeline from a JSON config");
    runcmd->add_option("--config", config_path, "Pipeline config JSON")->required();
    runcmd->add_option("--out-dir", out_dir, "Override emit.out_dir");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (ingest->parsed()) {
        ParseStats stats;
        std::vector<MultiLabelRecord> records;
        for (const auto& p : ml_inputs) {
            auto part = parse_multilabel(p, stats);
            records.insert(records.end(), part.begin(), part.end());
        }
        validate_multilabel(records);
        std::size_t choices = 0;
        for (const auto& p : choice_inputs) choices += parse_choice(p, stats, blank_marker).size();
        const auto groups = link_prompt_responses(records);
        std::size_t responses = 0, singles = 0;
        for (const auto& g : groups) {
            responses += g.responses.size();
            singles += g.responses.size() == 1;
        }
        if (stats.unknown_keys > 0)
            std::cerr << "warning: ignored " << stats.unknown_keys << " unknown keys\n";
        print_or_write(Json{{"multilabel_records", records.size()},
                            {"choice_records", choices},
                            {"prompt_groups", groups.size()},
                            {"linked_responses", responses},
                            {"single_response_groups", singles},
                            {"unknown_keys", stats.unknown_keys}},
                       ingest_out);
    } else if (unify->parsed()) {
        const auto polarities = parse_polarities(polarity_specs);
        std::vector<MultiLabelRecord> records;
        for (const auto& p : ml_inputs) {
            auto part = parse_multilabel(p);
            records.insert(records.end(), part.begin(), part.end());
        }
        validate_multilabel(records);
        std::vector<ChoicePairRecord> choices;
        for (const auto& p : choice_inputs) {
            auto part = parse_choice(p, blank_marker);
            choices.insert(choices.end(), part.begin(), part.end());
        }
        if (!records.empty() && axis.empty()) throw ConfigError("--axis is required with --multilabel");
        const auto groups = link_prompt_responses(records);
        std::vector<PreferencePair> ml, ch;
        std::size_t discarded = 0;
        for (const auto& g : groups) {
            auto it = polarities.find(axis);
            if (it == polarities.end()) throw ConfigError("no --polarity declared for axis '" + axis + "'");
            if (auto p = best_worst_pair(g, axis, it->second))
                ml.push_back(std::move(*p));
            else
                ++discarded;
        }
        for (const auto& c : choices) ch.push_back(choice_to_preference(c, blank_marker));
        const auto unified = take_union(std::vector{ml, ch});
        emit_unified(unified.records, unify_out);
        if (!labeled_out.empty()) {
            CutoffScope sc = scope == "group" ? CutoffScope::group : CutoffScope::corpus;
            if (scope != "group" && scope != "corpus")
                throw ConfigError("--cutoff-scope must be group or corpus");
            auto ex = expand_multilabel(groups, labeled_axes, parse_strategy(strategy, delta),
                                        polarities, sc);
            std::vector<LabeledExample> chx;
            for (const auto& c : choices) {
                auto two = expand_choice(c, blank_marker);
                chx.insert(chx.end(), two.begin(), two.end());
            }
            emit_unified(take_union(std::vector{ex, chx}).records, labeled_out);
        }
        std::cerr << "unified " << unified.records.size() << " pairs ("
                  << unified.duplicates_removed << " duplicates removed, " << discarded
                  << " prompts discarded)\n";
    } else if (select->parsed()) {
        auto pairs = read_preference_pairs(select_in);
        auto selected = pairs.empty() ? pairs : select_top_fraction(pairs, quality);
        if (diversity) {
            auto provider = select_embed.config();
            if (!provider) throw ConfigError("diversity requires embeddings");
            TextList texts;
            std::set<std::string> seen;
            for (const auto& p : pairs)
                if (seen.insert(p.prompt_id).second) texts.emplace_back(p.prompt_id, p.prompt);
            auto emb = provide_embeddings(*provider, texts);
            if (provider->kind == EmbeddingProviderConfig::Kind::http && !select_embed.cache.empty())
                save_embeddings(select_embed.cache, emb);
            if (normalize) emb = normalize_embeddings(emb);
            const auto model = kmeans_fit(emb, km);
            auto ratio = no_ratio ? std::nullopt : std::optional(source_ratio_of(selected));
            auto div = diversity_sample(selected, model, diversity_fraction, ratio);
            if (!report_out.empty()) write_file(report_out, to_json(div.report).dump(2) + "\n");
            if (!clusters_out.empty()) write_file(clusters_out, to_json(model).dump(2) + "\n");
            selected = std::move(div.pairs);
        }
        emit_unified(selected, select_out);
        std::cerr << "selected " << selected.size() << " of " << pairs.size() << " pairs\n";
    } else if (emit->parsed()) {
        const auto pairs = read_preference_pairs(emit_in);
        if (sft_out.empty() && pref_out.empty())
            throw ConfigError("emit needs --sft-out and/or --preference-out");
        if (!sft_out.empty()) emit_sft(pairs, sft_out);
        if (!pref_out.empty()) emit_preference(pairs, pref_out);
        std::cerr << "emitted " << pairs.size() << " rows\n";
    } else if (evaluate->parsed()) {
        if (bias_in.empty() && gen_in.empty())
            throw ConfigError("evaluate needs --bias and/or --generative");
        std::optional<std::vector<BiasEvalItem>> bias;
        std::optional<std::vector<GenEvalItem>> gen;
        if (!bias_in.empty()) bias = load_bias_items(bias_in);
        if (!gen_in.empty()) gen = load_gen_items(gen_in);
        print_or_write(evaluation_report(bias, gen), eval_out);
    } else if (probe->parsed()) {
        const auto pairs = read_preference_pairs(probe_pairs);
        const auto emb = load_embeddings(probe_embeddings);
        const auto data = embed_pairs(pairs, emb);
        std::vector<double> losses;
        const auto model = train_reward(data, probe_opts, &losses);
        Json summary{{"pairs", data.size()},
                     {"initial_loss", losses.front()},
                     {"final_loss", losses.back()},
                     {"training_accuracy", pairwise_accuracy(model, data)}};
        if (!probe_out.empty()) write_file(probe_out, to_json(model).dump() + "\n");
        std::cout << summary.dump(2) << "\n";
    } else if (runcmd->parsed()) {
        auto result = run_pipeline(config_path, out_dir.empty()
                                                    ? std::nullopt
                                                    : std::optional<std::filesystem::path>(out_dir));
        std::cerr << "run complete: " << result.counts.selected << " selected of "
                  << result.counts.unified << " unified pairs -> " << result.out_dir.string()
                  << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const hetfeed::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hetfeed::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
