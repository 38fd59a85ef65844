#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlpsd/dataset.hpp"
#include "mlpsd/losses.hpp"
#include "mlpsd/metrics.hpp"
#include "mlpsd/model.hpp"
#include "mlpsd/partition.hpp"

namespace mlpsd {

/// Which samples a teacher's logits supervise: only the samples of its own
/// sub-task, or every training sample.
enum class KdScope { subtask_mask, all_images };

enum class Variant { baseline, SD, CGPD, DGPD, CPSD, RPD };

std::string to_string(KdScope s);
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct TrainConfig {
    int teacher_epochs = 20;
    int student_epochs = 80;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    AslConfig asl;
    double kd_weight = 1.0;
    KdScope kd_scope = KdScope::all_images;
    std::uint64_t shuffle_seed = 0;

    void validate() const;
    AdamOptions adam() const { return {learning_rate, 0.9, 0.999, 1e-8, weight_decay}; }
};

struct TeacherEnsemble {
    Strategy strategy = Strategy::CGP;
    LabelPartition partition;
    std::vector<Model> teachers; // teacher t predicts partition.clusters[t]
};

/// Mini-batch Adam on ASL, plus kd_weight times the distillation loss when
/// targets are given. Rows are reshuffled every epoch from
/// (cfg.shuffle_seed, epoch). Returns the mean per-batch loss of each epoch.
std::vector<double> fit(Model& model, const Eigen::MatrixXd& features, const LabelMatrix& labels,
                        const TrainConfig& cfg, int epochs, std::span<const LogitMatrix<double>> kd_targets = {});

/// Teacher over one sub-task; output width is taken from the sub-task.
Model train_teacher(const SubTask& subtask, const AnnotationSet& set, const TrainConfig& cfg,
                    const ModelConfig& model_cfg);

/// Full-category ASL-only model (student_epochs).
Model train_baseline(const AnnotationSet& set, const TrainConfig& cfg, const ModelConfig& model_cfg);

/// Full-category model on ASL + kd_weight * kd_mse against the cached targets.
Model train_student(const AnnotationSet& set, std::span<const LogitMatrix<double>> targets, const TrainConfig& cfg,
                    const ModelConfig& model_cfg);
Model train_student(const AnnotationSet& set, const LogitMatrix<double>& merged_plus,
                    const LogitMatrix<double>& merged_minus, const TrainConfig& cfg, const ModelConfig& model_cfg);

/// Seed offset of teacher `t` within an ensemble whose first model index is
/// `first_index`: its init and shuffle seeds are base + first_index + t.
/// The student uses index 0.
struct SeedPlan {
    static constexpr int student = 0;
    static int first_teacher(Strategy s, int k) { return s == Strategy::DGP ? 1 + k : 1; }
};

/// Trains one teacher per cluster. Jobs run on up to `threads` workers; the
/// result does not depend on the worker count.
TeacherEnsemble train_ensemble(const AnnotationSet& set, const LabelPartition& partition, const TrainConfig& cfg,
                               const ModelConfig& model_cfg, int first_index, int threads = 1);

/// Trains several ensembles with one shared worker pool.
std::vector<TeacherEnsemble> train_ensembles(const AnnotationSet& set, std::span<const LabelPartition> partitions,
                                             const TrainConfig& cfg, const ModelConfig& model_cfg,
                                             std::span<const int> first_indices, int threads = 1);

/// Reassembles per-cluster teacher logits into category order over all
/// samples of `set`.
LogitMatrix<double> merge_logits(const TeacherEnsemble& ensemble, const AnnotationSet& set, KdScope scope);

/// Deterministic 80/20 split keyed on (seed, sample index).
struct Split {
    IndexList train;
    IndexList test;
};
Split train_test_split(int num_samples, std::uint64_t seed);

struct VariantOptions {
    int k = 5;
    double tau = 3.0;
    ComplementBase complement_base = ComplementBase::all_ones;
    bool row_normalize = true;
    int threads = 0; // 0: min(2k, hardware threads)
    double threshold = 0.5;
};

struct VariantResult {
    Variant variant = Variant::baseline;
    Model student;
    MetricsReport report;
    std::vector<TeacherEnsemble> ensembles;
    std::optional<int> k;
    std::optional<double> tau;
    Split split;
};

int default_threads(int k);

/// Split, partition on the training split, train teachers, merge, distill
/// and evaluate on the test split. Every variant draws the same split and
/// seeds, so runs are paired.
VariantResult run_variant(const AnnotationSet& set, Variant variant, const TrainConfig& cfg,
                          const ModelConfig& model_cfg, std::uint64_t seed, const VariantOptions& options = {});

/// Strategies a variant distills from, in the order their targets are used.
std::vector<Strategy> variant_strategies(Variant v);

} // namespace mlpsd
