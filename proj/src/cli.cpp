#include "mlpsd/cli.hpp"

#include <chrono>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "mlpsd/costats.hpp"
#include "mlpsd/error.hpp"
#include "mlpsd/partition.hpp"

namespace mlpsd::cli {

void RunConfig::resolve() {
    train.shuffle_seed = seed;
    synth.seed = synth_seed.value_or(seed);
    if (seeds.empty()) seeds = {seed};
}

void RunConfig::validate() const {
    if (!data) {
        synth.validate();
        if (num_categories && *num_categories != synth.num_categories())
            throw ConfigError("synth blocks sum to " + std::to_string(synth.num_categories()) + ", expected m = " +
                              std::to_string(*num_categories));
    }
    if (strategy != "cgp" && strategy != "dgp" && strategy != "both" && strategy != "random")
        throw ConfigError("unknown strategy '" + strategy + "'");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    for (int kv : k_values)
        if (kv < 1) throw ConfigError("k values must be >= 1");
    for (int h : hidden_dims)
        if (h < 1) throw ConfigError("hidden dimensions must be >= 1");
    train.validate();
}

SynthSpec RunConfig::resolved_synth(std::uint64_t run_seed) const {
    SynthSpec s = synth;
    s.seed = synth_seed.value_or(run_seed);
    return s;
}

ModelConfig RunConfig::model_config(int input_dim) const {
    return ModelConfig{input_dim, hidden_dims, 1, seed};
}

VariantOptions RunConfig::variant_options() const {
    VariantOptions o;
    o.k = k;
    o.tau = tau;
    o.complement_base = complement_base;
    o.row_normalize = row_normalize;
    o.threads = threads;
    o.threshold = threshold;
    return o;
}

std::vector<Strategy> RunConfig::partition_strategies() const {
    if (strategy == "cgp") return {Strategy::CGP};
    if (strategy == "dgp") return {Strategy::DGP};
    if (strategy == "random") return {Strategy::random};
    return {Strategy::CGP, Strategy::DGP};
}

Json config_to_json(const RunConfig& cfg) {
    Json j;
    if (cfg.data) {
        j["data"] = cfg.data->string();
    } else {
        j["data"] = nullptr;
        Json s;
        s["blocks"] = cfg.synth.blocks;
        s["n_samples"] = cfg.synth.n_samples;
        s["feature_dim"] = cfg.synth.feature_dim;
        s["p_block"] = cfg.synth.p_block;
        s["q_in"] = cfg.synth.q_in;
        s["q_out"] = cfg.synth.q_out;
        s["noise_sigma"] = cfg.synth.noise_sigma;
        s["seed"] = cfg.synth.seed;
        j["synth"] = std::move(s);
    }
    j["strategy"] = cfg.strategy;
    j["variant"] = to_string(cfg.variant);
    j["k"] = cfg.k;
    j["tau"] = cfg.tau;
    j["complement_base"] = to_string(cfg.complement_base);
    j["row_normalize"] = cfg.row_normalize;
    Json t;
    t["teacher_epochs"] = cfg.train.teacher_epochs;
    t["student_epochs"] = cfg.train.student_epochs;
    t["batch_size"] = cfg.train.batch_size;
    t["learning_rate"] = cfg.train.learning_rate;
    t["weight_decay"] = cfg.train.weight_decay;
    t["gamma_pos"] = cfg.train.asl.gamma_pos;
    t["gamma_neg"] = cfg.train.asl.gamma_neg;
    t["mu"] = cfg.train.asl.mu;
    t["loss_normalization"] = "mean_over_samples";
    t["kd_weight"] = cfg.train.kd_weight;
    t["kd_scope"] = to_string(cfg.train.kd_scope);
    t["shuffle_seed"] = cfg.train.shuffle_seed;
    j["train"] = std::move(t);
    j["hidden_dims"] = cfg.hidden_dims;
    j["threshold"] = cfg.threshold;
    j["seed"] = cfg.seed;
    j["k_values"] = cfg.k_values;
    j["seeds"] = cfg.seeds;
    return j;
}

namespace {

/// Re-raises a failure with the stage name prefixed, keeping its kind.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("stage ") + name + ": " + e.what());
    } catch (const std::exception& e) {
        throw NumericError(std::string("stage ") + name + ": " + e.what());
    }
}

fs::path require_data(const RunConfig& cfg) {
    if (!cfg.data) throw ConfigError("--data is required for this subcommand");
    if (!fs::exists(*cfg.data)) throw ConfigError("data file not found: " + cfg.data->string());
    return *cfg.data;
}

void require_files(const std::vector<fs::path>& paths, const char* what) {
    for (const auto& p : paths)
        if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

std::string lower(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

void write_json(const fs::path& path, const Json& j) {
    write_text_file(path, dump_json(j) + "\n");
}

Json ensemble_manifest(Strategy strategy, const fs::path& partition, const std::vector<fs::path>& teachers,
                       const Json& config) {
    Json j;
    j["schema"] = kEnsembleSchema;
    j["strategy"] = to_string(strategy);
    j["partition"] = partition.string();
    Json t = Json::array();
    for (const auto& p : teachers) t.push_back(p.string());
    j["teachers"] = std::move(t);
    j["run_config"] = config;
    return j;
}

TeacherEnsemble load_ensemble(const fs::path& path) {
    const Json j = read_json_file(path);
    if (j.value("schema", "") != kEnsembleSchema) throw DataError(path.string() + ": not an ensemble manifest");
    TeacherEnsemble e;
    e.partition = load_partition(j.at("partition").get<std::string>());
    e.strategy = e.partition.strategy;
    for (const auto& t : j.at("teachers")) e.teachers.push_back(load_model(t.get<std::string>()));
    return e;
}

// File-level stage implementations shared by the standalone subcommands and
// the pipeline.

fs::path run_stats(const fs::path& data, const fs::path& out, const Json& config) {
    const auto set = load_annotations(data);
    Json j = stats_to_json(compute_stats(set));
    j["run_config"] = config;
    const auto path = out / "stats.json";
    write_json(path, j);
    return path;
}

std::vector<fs::path> run_partition(const fs::path& data, const RunConfig& cfg, std::vector<Strategy> strategies,
                                    int k, const fs::path& out, const Json& config) {
    const auto set = load_annotations(data);
    const auto stats = compute_stats(set);
    PartitionOptions popts;
    popts.tau = cfg.tau;
    popts.complement_base = cfg.complement_base;
    popts.row_normalize = cfg.row_normalize;
    std::vector<fs::path> paths;
    for (Strategy s : strategies) {
        const auto partition = partition_labels(stats, s, k, cfg.seed, popts);
        Json j = partition_to_json(partition);
        j["run_config"] = config;
        const auto path = out / ("partition_" + lower(to_string(s)) + ".json");
        write_json(path, j);
        paths.push_back(path);
    }
    return paths;
}

std::vector<fs::path> run_train_teachers(const fs::path& data, const std::vector<fs::path>& partition_files,
                                         const RunConfig& cfg, const fs::path& out, const Json& config) {
    const auto set = load_annotations(data);
    std::vector<LabelPartition> partitions;
    std::vector<int> firsts;
    int k_max = 1;
    for (const auto& p : partition_files) {
        partitions.push_back(load_partition(p));
        firsts.push_back(SeedPlan::first_teacher(partitions.back().strategy, partitions.back().k));
        k_max = std::max(k_max, partitions.back().k);
    }
    const int threads = cfg.threads > 0 ? cfg.threads : default_threads(k_max);
    const auto ensembles =
        train_ensembles(set, partitions, cfg.train, cfg.model_config(set.feature_dim()), firsts, threads);

    std::vector<fs::path> manifests;
    for (std::size_t e = 0; e < ensembles.size(); ++e) {
        const std::string tag = lower(to_string(ensembles[e].strategy));
        std::vector<fs::path> teacher_paths;
        for (std::size_t t = 0; t < ensembles[e].teachers.size(); ++t) {
            Json j = model_to_json(ensembles[e].teachers[t]);
            j["run_config"] = config;
            const auto path = out / "teachers" / (tag + "_t" + std::to_string(t) + ".json");
            write_json(path, j);
            teacher_paths.push_back(path);
        }
        const auto path = out / ("ensemble_" + tag + ".json");
        write_json(path, ensemble_manifest(ensembles[e].strategy, partition_files[e], teacher_paths, config));
        manifests.push_back(path);
    }
    return manifests;
}

fs::path run_distill(const fs::path& data, const std::vector<fs::path>& ensemble_files, const RunConfig& cfg,
                     const fs::path& out, const Json& config) {
    const auto set = load_annotations(data);
    std::vector<LogitMatrix<double>> targets;
    for (const auto& p : ensemble_files) targets.push_back(merge_logits(load_ensemble(p), set, cfg.train.kd_scope));
    const Model student = train_student(set, targets, cfg.train, cfg.model_config(set.feature_dim()));
    Json j = model_to_json(student);
    j["run_config"] = config;
    const auto path = out / "student.json";
    write_json(path, j);
    return path;
}

MetricsReport run_eval(const fs::path& data, const fs::path& model_path, const RunConfig& cfg, const fs::path& out,
                       const Json& config) {
    const auto set = load_annotations(data);
    const auto report = evaluate(load_model(model_path), set, cfg.threshold);
    Json j = report_to_json(report);
    j["model"] = model_path.string();
    j["data"] = data.string();
    j["run_config"] = config;
    write_json(out / "report.json", j);
    return report;
}

AnnotationSet dataset_for(const RunConfig& cfg, std::uint64_t run_seed) {
    if (cfg.data) return load_annotations(require_data(cfg));
    return generate_synthetic(cfg.resolved_synth(run_seed)).set;
}

} // namespace

SynthOutputs cmd_synth(const RunConfig& cfg) {
    cfg.validate();
    return stage("synth", [&] {
        const auto spec = cfg.resolved_synth(cfg.seed);
        const auto data = generate_synthetic(spec);
        fs::create_directories(cfg.out);
        SynthOutputs out{cfg.out / "dataset.jsonl", cfg.out / "planted_partition.json"};
        save_annotations(data.set, out.dataset);
        Json planted;
        planted["schema"] = kPlantedSchema;
        planted["clusters"] = data.planted;
        planted["run_config"] = config_to_json(cfg);
        write_json(out.planted, planted);
        return out;
    });
}

fs::path cmd_stats(const RunConfig& cfg) {
    const auto data = require_data(cfg);
    return stage("stats", [&] { return run_stats(data, cfg.out, config_to_json(cfg)); });
}

std::vector<fs::path> cmd_partition(const RunConfig& cfg) {
    cfg.validate();
    const auto data = require_data(cfg);
    return stage("partition",
                 [&] { return run_partition(data, cfg, cfg.partition_strategies(), cfg.k, cfg.out, config_to_json(cfg)); });
}

std::vector<fs::path> cmd_train_teachers(const RunConfig& cfg) {
    cfg.validate();
    const auto data = require_data(cfg);
    if (cfg.partitions.empty()) throw ConfigError("train-teachers needs at least one --partition file");
    require_files(cfg.partitions, "partition file");
    return stage("train-teachers",
                 [&] { return run_train_teachers(data, cfg.partitions, cfg, cfg.out, config_to_json(cfg)); });
}

fs::path cmd_distill(const RunConfig& cfg) {
    cfg.validate();
    const auto data = require_data(cfg);
    require_files(cfg.ensembles, "ensemble manifest");
    return stage("distill", [&] { return run_distill(data, cfg.ensembles, cfg, cfg.out, config_to_json(cfg)); });
}

MetricsReport cmd_eval(const RunConfig& cfg) {
    const auto data = require_data(cfg);
    if (!cfg.model) throw ConfigError("eval needs --model");
    require_files({*cfg.model}, "model checkpoint");
    return stage("eval", [&] { return run_eval(data, *cfg.model, cfg, cfg.out, config_to_json(cfg)); });
}

Json cmd_pipeline(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.data) require_data(cfg);
    const Json config = config_to_json(cfg);
    fs::create_directories(cfg.out);

    Json manifest;
    manifest["run_config"] = config;
    Json timing;
    auto timed = [&](const char* name, auto&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        auto r = stage(name, f);
        timing[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    };

    const fs::path dataset = timed("data", [&] {
        if (cfg.data) return *cfg.data;
        const auto data = generate_synthetic(cfg.resolved_synth(cfg.seed));
        const auto path = cfg.out / "dataset.jsonl";
        save_annotations(data.set, path);
        return path;
    });
    manifest["dataset"] = dataset.string();

    const auto [train_path, test_path] = timed("split", [&] {
        const auto set = load_annotations(dataset);
        const auto split = train_test_split(set.num_samples(), cfg.seed);
        const auto train = cfg.out / "train.jsonl";
        const auto test = cfg.out / "test.jsonl";
        save_annotations(set.select(split.train), train);
        save_annotations(set.select(split.test), test);
        return std::pair{train, test};
    });
    manifest["train"] = train_path.string();
    manifest["test"] = test_path.string();

    const auto strategies = variant_strategies(cfg.variant);
    Json partitions = Json::array(), teachers = Json::array(), ensembles_json = Json::array();
    std::vector<fs::path> ensemble_files;
    if (!strategies.empty()) {
        const int k = cfg.variant == Variant::SD ? 1 : cfg.k;
        manifest["stats"] = timed("stats", [&] { return run_stats(train_path, cfg.out, config); }).string();
        const auto partition_files =
            timed("partition", [&] { return run_partition(train_path, cfg, strategies, k, cfg.out, config); });
        for (const auto& p : partition_files) partitions.push_back(p.string());
        ensemble_files =
            timed("train-teachers", [&] { return run_train_teachers(train_path, partition_files, cfg, cfg.out, config); });
        for (const auto& e : ensemble_files) {
            ensembles_json.push_back(e.string());
            const Json manifest_e = read_json_file(e);
            for (const auto& t : manifest_e.at("teachers")) teachers.push_back(t);
        }
    }
    manifest["partitions"] = partitions;
    manifest["ensembles"] = ensembles_json;
    manifest["teachers"] = teachers;

    const auto student = timed("distill", [&] { return run_distill(train_path, ensemble_files, cfg, cfg.out, config); });
    manifest["student"] = student.string();
    timed("eval", [&] { return run_eval(test_path, student, cfg, cfg.out, config); });
    manifest["report"] = (cfg.out / "report.json").string();
    manifest["wall_clock_seconds"] = timing;
    write_json(cfg.out / "manifest.json", manifest);
    return manifest;
}

std::vector<SweepRow> cmd_sweep_k(const RunConfig& cfg_in) {
    RunConfig cfg = cfg_in;
    if (cfg.seeds.empty()) cfg.seeds = {cfg.seed};
    cfg.validate();
    if (cfg.k_values.empty()) throw ConfigError("sweep-k needs at least one k value");
    const Json config = config_to_json(cfg);

    std::vector<SweepRow> rows;
    stage("sweep-k", [&] {
        for (std::uint64_t run_seed : cfg.seeds) {
            const AnnotationSet set = dataset_for(cfg, run_seed);
            TrainConfig tc = cfg.train;
            tc.shuffle_seed = run_seed;
            ModelConfig mc{set.feature_dim(), cfg.hidden_dims, 1, run_seed};
            for (Strategy s : cfg.partition_strategies()) {
                const Variant v = s == Strategy::CGP ? Variant::CGPD : s == Strategy::DGP ? Variant::DGPD : Variant::RPD;
                for (int k : cfg.k_values) {
                    VariantOptions opts = cfg.variant_options();
                    opts.k = k;
                    const auto r = run_variant(set, v, tc, mc, run_seed, opts);
                    rows.push_back({to_string(s), k, run_seed, r.report.map, r.report.cf1, r.report.of1});
                }
            }
        }
        return 0;
    });

    std::ostringstream csv;
    csv << kSweepHeader << '\n';
    for (const auto& r : rows)
        csv << r.strategy << ',' << r.k << ',' << r.seed << ',' << format_double(r.map) << ','
            << format_double(r.cf1) << ',' << format_double(r.of1) << '\n';
    write_text_file(cfg.out / "sweep.csv", csv.str());

    std::map<std::pair<std::string, int>, std::vector<double>> by_cell;
    for (const auto& r : rows) by_cell[{r.strategy, r.k}].push_back(r.map);
    std::ostringstream summary;
    summary << "mean test mAP over " << cfg.seeds.size() << " seed(s)\n";
    summary << "strategy  k  mean_map\n";
    for (const auto& [key, maps] : by_cell) {
        const double mean = std::accumulate(maps.begin(), maps.end(), 0.0) / static_cast<double>(maps.size());
        char line[96];
        std::snprintf(line, sizeof line, "%-8s %2d  %.4f\n", key.first.c_str(), key.second, mean);
        summary << line;
    }
    write_text_file(cfg.out / "sweep_summary.txt", summary.str());
    write_json(cfg.out / "sweep_config.json", config);
    return rows;
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Parallel self-distillation for multi-label classification"};
    app.set_config("--config", "", "Key-value (TOML/INI) configuration file; flags override it");
    app.require_subcommand(1);

    RunConfig cfg;
    std::string data, variant = "cpsd", kd_scope = "all", base = "all_ones", model;
    std::optional<std::uint64_t> synth_seed;
    std::optional<int> m;
    bool no_row_normalize = false;

    app.add_option("--data", data, "Dataset file (JSON Lines)");
    app.add_option("--seed", cfg.seed, "Global seed")->capture_default_str();
    app.add_option("--k", cfg.k, "Number of label clusters")->capture_default_str();
    app.add_option("--tau", cfg.tau, "Co-occurrence smoothing exponent")->capture_default_str();
    app.add_option("--strategy", cfg.strategy, "Partition strategy")
        ->check(CLI::IsMember({"cgp", "dgp", "both", "random"}))
        ->capture_default_str();
    app.add_option("--variant", variant, "Pipeline variant")
        ->check(CLI::IsMember({"baseline", "sd", "cgpd", "dgpd", "cpsd", "rpd"}, CLI::ignore_case))
        ->capture_default_str();
    app.add_option("--kd-scope", kd_scope, "Distillation scope")->check(CLI::IsMember({"mask", "all"}))->capture_default_str();
    app.add_option("--complement-base", base, "Dis-occurrence complement")
        ->check(CLI::IsMember({"all_ones", "identity"}))
        ->capture_default_str();
    app.add_flag("--no-row-normalize", no_row_normalize, "Skip embedding row normalization before k-means");
    app.add_option("--out", cfg.out, "Output directory")->capture_default_str();

    app.add_option("--blocks", cfg.synth.blocks, "Synthetic block sizes")->capture_default_str();
    app.add_option("--m", m, "Expected category count (checked against --blocks)");
    app.add_option("--n-samples", cfg.synth.n_samples)->capture_default_str();
    app.add_option("--feature-dim", cfg.synth.feature_dim)->capture_default_str();
    app.add_option("--p-block", cfg.synth.p_block)->capture_default_str();
    app.add_option("--q-in", cfg.synth.q_in)->capture_default_str();
    app.add_option("--q-out", cfg.synth.q_out)->capture_default_str();
    app.add_option("--noise-sigma", cfg.synth.noise_sigma)->capture_default_str();
    app.add_option("--synth-seed", synth_seed, "Synthetic data seed (defaults to --seed)");

    app.add_option("--hidden", cfg.hidden_dims, "Hidden layer widths")->capture_default_str();
    app.add_option("--teacher-epochs", cfg.train.teacher_epochs)->capture_default_str();
    app.add_option("--student-epochs", cfg.train.student_epochs)->capture_default_str();
    app.add_option("--batch-size", cfg.train.batch_size)->capture_default_str();
    app.add_option("--lr", cfg.train.learning_rate)->capture_default_str();
    app.add_option("--weight-decay", cfg.train.weight_decay)->capture_default_str();
    app.add_option("--gamma-pos", cfg.train.asl.gamma_pos)->capture_default_str();
    app.add_option("--gamma-neg", cfg.train.asl.gamma_neg)->capture_default_str();
    app.add_option("--mu", cfg.train.asl.mu)->capture_default_str();
    app.add_option("--kd-weight", cfg.train.kd_weight)->capture_default_str();
    app.add_option("--threads", cfg.threads, "Teacher workers (0: min(2k, hardware threads))")->capture_default_str();
    app.add_option("--threshold", cfg.threshold, "Probability threshold for P/R/F1")->capture_default_str();

    app.add_option("--partition", cfg.partitions, "Partition file(s) for train-teachers");
    app.add_option("--ensemble", cfg.ensembles, "Ensemble manifest(s) for distill");
    app.add_option("--model", model, "Model checkpoint for eval");
    app.add_option("--k-values", cfg.k_values, "k values for sweep-k")->capture_default_str();
    app.add_option("--seeds", cfg.seeds, "Seeds for sweep-k (defaults to --seed)");

    auto* synth = app.add_subcommand("synth", "Generate a planted-structure dataset");
    auto* stats = app.add_subcommand("stats", "Dump co-occurrence statistics");
    auto* part = app.add_subcommand("partition", "Compute label partitions");
    auto* teach = app.add_subcommand("train-teachers", "Train one teacher per cluster");
    auto* distill = app.add_subcommand("distill", "Train the student against teacher ensembles");
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    auto* pipe = app.add_subcommand("pipeline", "Run every stage end to end");
    auto* sweep = app.add_subcommand("sweep-k", "Sweep the cluster count");
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ErrorKind::Config);
    }

    try {
        if (!data.empty()) cfg.data = data;
        if (!model.empty()) cfg.model = model;
        cfg.synth_seed = synth_seed;
        cfg.num_categories = m;
        cfg.variant = variant_from_string(variant);
        cfg.train.kd_scope = kd_scope == "mask" ? KdScope::subtask_mask : KdScope::all_images;
        cfg.complement_base = base == "identity" ? ComplementBase::identity : ComplementBase::all_ones;
        cfg.row_normalize = !no_row_normalize;
        cfg.resolve();

        if (synth->parsed()) {
            const auto out = cmd_synth(cfg);
            std::cout << out.dataset.string() << '\n' << out.planted.string() << '\n';
        } else if (stats->parsed()) {
            std::cout << cmd_stats(cfg).string() << '\n';
        } else if (part->parsed()) {
            for (const auto& p : cmd_partition(cfg)) std::cout << p.string() << '\n';
        } else if (teach->parsed()) {
            for (const auto& p : cmd_train_teachers(cfg)) std::cout << p.string() << '\n';
        } else if (distill->parsed()) {
            std::cout << cmd_distill(cfg).string() << '\n';
        } else if (eval->parsed()) {
            const auto r = cmd_eval(cfg);
            std::cout << "mAP " << format_double(r.map) << "  CF1 " << format_double(r.cf1) << "  OF1 "
                      << format_double(r.of1) << '\n';
        } else if (pipe->parsed()) {
            const auto manifest = cmd_pipeline(cfg);
            const auto report = read_json_file(manifest.at("report").get<std::string>());
            std::cout << to_string(cfg.variant) << " mAP " << format_double(report.at("map").get<double>()) << '\n';
        } else if (sweep->parsed()) {
            const auto rows = cmd_sweep_k(cfg);
            std::cout << rows.size() << " rows -> " << (cfg.out / "sweep.csv").string() << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::Numeric);
    }
    return 0;
}

} // namespace mlpsd::cli
