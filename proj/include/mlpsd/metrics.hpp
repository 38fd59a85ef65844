#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mlpsd/dataset.hpp"
#include "mlpsd/json_util.hpp"
#include "mlpsd/model.hpp"

namespace mlpsd {

/// All-point average precision. Ranking is by descending score with ties
/// broken by ascending index. Returns nullopt when there is no positive.
std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct MetricsReport {
    double map = 0.0;
    std::vector<std::optional<double>> per_category_ap;
    double cp = 0.0, cr = 0.0, cf1 = 0.0;
    double op = 0.0, or_ = 0.0, of1 = 0.0;
    double threshold = 0.5;
    int n_eval = 0;
    IndexList skipped_categories; // no ground-truth positive; excluded from mAP, CP and CR

    bool operator==(const MetricsReport&) const = default;
};

/// Metrics from an n x m probability matrix; p >= threshold counts as a
/// predicted positive.
MetricsReport evaluate_probabilities(const Eigen::MatrixXd& probabilities, const LabelMatrix& labels,
                                     double threshold = 0.5);

/// Requires the model to predict every category of the set (any column order).
MetricsReport evaluate(const Model& model, const AnnotationSet& set, double threshold = 0.5);

Json report_to_json(const MetricsReport& report);

} // namespace mlpsd
