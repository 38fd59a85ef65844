#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mlpsd/dataset.hpp"
#include "mlpsd/json_util.hpp"
#include "mlpsd/metrics.hpp"
#include "mlpsd/pipeline.hpp"

namespace mlpsd::cli {

namespace fs = std::filesystem;

/// Fully resolved settings for one invocation. Stage-specific inputs
/// (partition, ensemble and model paths) are only read by the stages that
/// need them.
struct RunConfig {
    std::optional<fs::path> data;
    SynthSpec synth{.blocks = {3, 3, 4}, .n_samples = 2000, .feature_dim = 16, .p_block = 0.5, .q_in = 0.9,
                    .q_out = 0.01, .noise_sigma = 0.3, .seed = 0};
    std::optional<std::uint64_t> synth_seed; // defaults to `seed`
    std::optional<int> num_categories;       // cross-check for synth blocks

    std::string strategy = "both"; // cgp | dgp | both | random
    Variant variant = Variant::CPSD;
    int k = 5;
    double tau = 3.0;
    ComplementBase complement_base = ComplementBase::all_ones;
    bool row_normalize = true;

    TrainConfig train;
    std::vector<int> hidden_dims{32};
    int threads = 0;
    double threshold = 0.5;

    fs::path out = "out";
    std::uint64_t seed = 0;

    std::vector<fs::path> partitions;
    std::vector<fs::path> ensembles;
    std::optional<fs::path> model;
    std::vector<int> k_values{1, 2, 3, 5};
    std::vector<std::uint64_t> seeds;

    /// Copies the global seed into every derived seed.
    void resolve();
    void validate() const;
    SynthSpec resolved_synth(std::uint64_t run_seed) const;
    ModelConfig model_config(int input_dim) const;
    VariantOptions variant_options() const;
    std::vector<Strategy> partition_strategies() const;
};

Json config_to_json(const RunConfig& cfg);

struct SynthOutputs {
    fs::path dataset;
    fs::path planted;
};
SynthOutputs cmd_synth(const RunConfig& cfg);

fs::path cmd_stats(const RunConfig& cfg);

/// One partition file per requested strategy.
std::vector<fs::path> cmd_partition(const RunConfig& cfg);

/// Teacher checkpoints plus one ensemble manifest per partition file;
/// returns the ensemble manifest paths.
std::vector<fs::path> cmd_train_teachers(const RunConfig& cfg);

/// Student checkpoint; plain ASL training when no ensemble is given.
fs::path cmd_distill(const RunConfig& cfg);

MetricsReport cmd_eval(const RunConfig& cfg);

/// Full run through files: data, split, stats, partitions, teachers,
/// distillation, evaluation. Returns the manifest that is also written to
/// <out>/manifest.json.
Json cmd_pipeline(const RunConfig& cfg);

struct SweepRow {
    std::string strategy;
    int k = 0;
    std::uint64_t seed = 0;
    double map = 0.0, cf1 = 0.0, of1 = 0.0;
};

/// Paired runs for every (seed, strategy, k); writes sweep.csv and
/// sweep_summary.txt under <out>.
std::vector<SweepRow> cmd_sweep_k(const RunConfig& cfg);

inline constexpr const char* kSweepHeader = "strategy,k,seed,map,cf1,of1";
inline constexpr const char* kEnsembleSchema = "mlpsd-ensemble-v1";
inline constexpr const char* kPlantedSchema = "mlpsd-planted-v1";

/// Parses argv, runs the subcommand and maps failures to exit codes
/// (0 ok, 2 config, 3 data, 4 numeric).
int run(int argc, const char* const* argv);

} // namespace mlpsd::cli
