#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "mlpsd/dataset.hpp"
#include "mlpsd/json_util.hpp"

namespace mlpsd {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// Label co-occurrence counts and the row-conditional similarity
/// S_ij = e_ij / n_i. S is not symmetric in general.
struct CoOccurrenceStats {
    CountMatrix pair_counts;   // e; diagonal holds n
    CountVector class_counts;  // n
    Eigen::MatrixXd similarity; // S; all-zero row where n_i == 0

    int num_categories() const noexcept { return static_cast<int>(class_counts.size()); }
};

CoOccurrenceStats compute_stats(const AnnotationSet& set);

/// Row-conditional similarity from counts, with zero rows for n_i == 0.
Eigen::MatrixXd similarity_from_counts(const CountMatrix& pair_counts);

Json stats_to_json(const CoOccurrenceStats& stats);

} // namespace mlpsd
