#include "mlpsd/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <thread>

#include "mlpsd/costats.hpp"
#include "mlpsd/error.hpp"
#include "mlpsd/rng.hpp"

namespace mlpsd {

std::string to_string(KdScope s) {
    return s == KdScope::all_images ? "all_images" : "subtask_mask";
}

std::string to_string(Variant v) {
    switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::SD: return "SD";
    case Variant::CGPD: return "CGPD";
    case Variant::DGPD: return "DGPD";
    case Variant::CPSD: return "CPSD";
    case Variant::RPD: return "RPD";
    }
    return "?";
}

Variant variant_from_string(const std::string& s) {
    std::string lower;
    for (char ch : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (lower == "baseline") return Variant::baseline;
    if (lower == "sd") return Variant::SD;
    if (lower == "cgpd") return Variant::CGPD;
    if (lower == "dgpd") return Variant::DGPD;
    if (lower == "cpsd") return Variant::CPSD;
    if (lower == "rpd") return Variant::RPD;
    throw ConfigError("unknown variant '" + s + "'");
}

void TrainConfig::validate() const {
    if (teacher_epochs < 1 || student_epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(kd_weight >= 0.0)) throw ConfigError("kd_weight must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    asl.validate();
}

std::vector<double> fit(Model& model, const Eigen::MatrixXd& features, const LabelMatrix& labels,
                        const TrainConfig& cfg, int epochs, std::span<const LogitMatrix<double>> kd_targets) {
    cfg.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    const auto n = features.rows();
    if (n == 0) throw DataError("cannot train on an empty sample set");
    if (labels.rows() != n || labels.cols() != model.config.output_dim)
        throw ConfigError("label matrix does not match features and model");
    for (const auto& t : kd_targets)
        if (t.rows() != n || t.cols() != model.config.output_dim)
            throw ConfigError("distillation targets do not match the training set");

    auto state = make_optimizer(model, cfg.adam());
    std::vector<Eigen::Index> order(n);
    std::vector<double> history;
    std::vector<LogitMatrix<double>> batch_targets(kd_targets.size());
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        Rng rng = make_rng(cfg.shuffle_seed, {stream::shuffle, static_cast<std::uint64_t>(epoch)});
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        int batches = 0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const auto stop = std::min<Eigen::Index>(n, start + cfg.batch_size);
            const std::vector<Eigen::Index> rows(order.begin() + start, order.begin() + stop);
            const Eigen::MatrixXd xb = features(rows, Eigen::all);
            const LabelMatrix yb = labels(rows, Eigen::all);

            const auto trace = forward_trace(model, xb);
            auto cls = asl(trace.logits, yb, cfg.asl);
            double loss = cls.loss;
            Eigen::MatrixXd grad = std::move(cls.grad);
            if (!kd_targets.empty()) {
                for (std::size_t t = 0; t < kd_targets.size(); ++t) {
                    batch_targets[t].values = kd_targets[t].values(rows, Eigen::all);
                    batch_targets[t].mask = kd_targets[t].mask(rows, Eigen::all);
                }
                const auto kd = kd_mse(trace.logits, std::span<const LogitMatrix<double>>(batch_targets));
                loss += cfg.kd_weight * kd.loss;
                grad += cfg.kd_weight * kd.grad;
            }
            if (!std::isfinite(loss)) throw NumericError("training loss became non-finite");
            adam_step(model, backward(model, trace, grad), state);
            epoch_loss += loss;
            ++batches;
        }
        history.push_back(epoch_loss / batches);
    }
    return history;
}

namespace {

void check_input_dim(const ModelConfig& model_cfg, const AnnotationSet& set) {
    if (model_cfg.input_dim != set.feature_dim()) throw ConfigError("model input_dim does not match dataset feature_dim");
}

IndexList all_categories(int m) {
    IndexList c(m);
    std::iota(c.begin(), c.end(), 0);
    return c;
}

} // namespace

Model train_teacher(const SubTask& subtask, const AnnotationSet& set, const TrainConfig& cfg,
                    const ModelConfig& model_cfg) {
    check_input_dim(model_cfg, set);
    if (subtask.sample_indices.empty()) throw DataError("empty sub-task: cluster " + std::to_string(subtask.cluster_index));
    ModelConfig mc = model_cfg;
    mc.output_dim = static_cast<int>(subtask.categories.size());
    Model model = init_model(mc, subtask.categories);
    const Eigen::MatrixXd x = set.feature_matrix()(subtask.sample_indices, Eigen::all);
    fit(model, x, subtask.restricted_labels, cfg, cfg.teacher_epochs);
    return model;
}

Model train_baseline(const AnnotationSet& set, const TrainConfig& cfg, const ModelConfig& model_cfg) {
    return train_student(set, std::span<const LogitMatrix<double>>{}, cfg, model_cfg);
}

Model train_student(const AnnotationSet& set, std::span<const LogitMatrix<double>> targets, const TrainConfig& cfg,
                    const ModelConfig& model_cfg) {
    check_input_dim(model_cfg, set);
    ModelConfig mc = model_cfg;
    mc.output_dim = set.num_categories();
    Model model = init_model(mc, all_categories(mc.output_dim));
    fit(model, set.feature_matrix(), set.label_matrix(), cfg, cfg.student_epochs, targets);
    return model;
}

Model train_student(const AnnotationSet& set, const LogitMatrix<double>& merged_plus,
                    const LogitMatrix<double>& merged_minus, const TrainConfig& cfg, const ModelConfig& model_cfg) {
    const LogitMatrix<double> both[] = {merged_plus, merged_minus};
    return train_student(set, std::span<const LogitMatrix<double>>(both), cfg, model_cfg);
}

std::vector<TeacherEnsemble> train_ensembles(const AnnotationSet& set, std::span<const LabelPartition> partitions,
                                             const TrainConfig& cfg, const ModelConfig& model_cfg,
                                             std::span<const int> first_indices, int threads) {
    if (first_indices.size() != partitions.size()) throw ConfigError("one first index per partition is required");
    cfg.validate();
    check_input_dim(model_cfg, set);

    struct Job {
        std::size_t ensemble;
        std::size_t teacher;
        SubTask task;
    };
    std::vector<TeacherEnsemble> out(partitions.size());
    std::vector<Job> jobs;
    for (std::size_t e = 0; e < partitions.size(); ++e) {
        out[e].strategy = partitions[e].strategy;
        out[e].partition = partitions[e];
        auto tasks = decompose(set, partitions[e]);
        out[e].teachers.resize(tasks.size());
        for (std::size_t t = 0; t < tasks.size(); ++t) jobs.push_back({e, t, std::move(tasks[t])});
    }

    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
            const Job& job = jobs[j];
            try {
                const auto offset = static_cast<std::uint64_t>(first_indices[job.ensemble]) + job.teacher;
                TrainConfig tc = cfg;
                tc.shuffle_seed = cfg.shuffle_seed + offset;
                ModelConfig mc = model_cfg;
                mc.init_seed = model_cfg.init_seed + offset;
                out[job.ensemble].teachers[job.teacher] = train_teacher(job.task, set, tc, mc);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        }
    };
    const int workers = std::clamp(threads, 1, std::max(1, static_cast<int>(jobs.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

TeacherEnsemble train_ensemble(const AnnotationSet& set, const LabelPartition& partition, const TrainConfig& cfg,
                               const ModelConfig& model_cfg, int first_index, int threads) {
    const LabelPartition parts[] = {partition};
    const int firsts[] = {first_index};
    return std::move(train_ensembles(set, parts, cfg, model_cfg, firsts, threads).front());
}

LogitMatrix<double> merge_logits(const TeacherEnsemble& ensemble, const AnnotationSet& set, KdScope scope) {
    const int m = set.num_categories();
    const int n = set.num_samples();
    ensemble.partition.validate(m);
    if (ensemble.teachers.size() != ensemble.partition.clusters.size())
        throw ConfigError("ensemble needs one teacher per cluster");

    LogitMatrix<double> merged;
    merged.values = Eigen::MatrixXd::Zero(n, m);
    merged.mask = LabelMatrix::Constant(n, m, scope == KdScope::all_images ? 1 : 0);
    const Eigen::MatrixXd x = set.feature_matrix();
    const LabelMatrix y = set.label_matrix();
    for (std::size_t t = 0; t < ensemble.teachers.size(); ++t) {
        const Model& teacher = ensemble.teachers[t];
        IndexList expected = ensemble.partition.clusters[t];
        IndexList actual = teacher.category_subset;
        std::sort(expected.begin(), expected.end());
        std::sort(actual.begin(), actual.end());
        if (expected != actual) throw ConfigError("teacher " + std::to_string(t) + " does not match its cluster");

        const Eigen::MatrixXd logits = forward(teacher, x);
        for (std::size_t j = 0; j < teacher.category_subset.size(); ++j)
            merged.values.col(teacher.category_subset[j]) = logits.col(static_cast<Eigen::Index>(j));
        if (scope == KdScope::subtask_mask) {
            const auto& cats = ensemble.partition.clusters[t];
            for (int i = 0; i < n; ++i) {
                const bool member = std::any_of(cats.begin(), cats.end(), [&](int c) { return y(i, c) != 0; });
                if (member)
                    for (int c : cats) merged.mask(i, c) = 1;
            }
        }
    }
    return merged;
}

Split train_test_split(int num_samples, std::uint64_t seed) {
    Split split;
    const std::uint64_t key = mix64(seed ^ mix64(stream::split));
    for (int i = 0; i < num_samples; ++i)
        (mix64(key + static_cast<std::uint64_t>(i)) % 5 == 0 ? split.test : split.train).push_back(i);
    return split;
}

int default_threads(int k) {
    const int hw = std::max(1u, std::thread::hardware_concurrency());
    return std::max(1, std::min(2 * k, hw));
}

std::vector<Strategy> variant_strategies(Variant v) {
    switch (v) {
    case Variant::baseline: return {};
    case Variant::SD:
    case Variant::CGPD: return {Strategy::CGP};
    case Variant::DGPD: return {Strategy::DGP};
    case Variant::CPSD: return {Strategy::CGP, Strategy::DGP};
    case Variant::RPD: return {Strategy::random};
    }
    return {};
}

VariantResult run_variant(const AnnotationSet& set, Variant variant, const TrainConfig& cfg,
                          const ModelConfig& model_cfg, std::uint64_t seed, const VariantOptions& options) {
    cfg.validate();
    check_input_dim(model_cfg, set);
    VariantResult result;
    result.variant = variant;
    result.split = train_test_split(set.num_samples(), seed);
    const AnnotationSet train = set.select(result.split.train);
    const AnnotationSet test = set.select(result.split.test);

    const auto strategies = variant_strategies(variant);
    std::vector<LogitMatrix<double>> targets;
    if (!strategies.empty()) {
        // Self-distillation is the single-cluster case.
        const int k = variant == Variant::SD ? 1 : options.k;
        result.k = k;
        result.tau = options.tau;
        const auto stats = compute_stats(train);
        PartitionOptions popts;
        popts.tau = options.tau;
        popts.complement_base = options.complement_base;
        popts.row_normalize = options.row_normalize;
        std::vector<LabelPartition> partitions;
        std::vector<int> firsts;
        for (Strategy s : strategies) {
            partitions.push_back(partition_labels(stats, s, k, seed, popts));
            firsts.push_back(SeedPlan::first_teacher(s, k));
        }
        const int threads = options.threads > 0 ? options.threads : default_threads(k);
        result.ensembles = train_ensembles(train, partitions, cfg, model_cfg, firsts, threads);
        for (const auto& e : result.ensembles) targets.push_back(merge_logits(e, train, cfg.kd_scope));
    }
    result.student = train_student(train, targets, cfg, model_cfg);
    result.report = evaluate(result.student, test, options.threshold);
    return result;
}

} // namespace mlpsd
