#include "mlpsd/costats.hpp"

namespace mlpsd {

Eigen::MatrixXd similarity_from_counts(const CountMatrix& pair_counts) {
    const auto m = pair_counts.rows();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto n_i = pair_counts(i, i);
        if (n_i > 0) s.row(i) = pair_counts.row(i).cast<double>() / static_cast<double>(n_i);
    }
    return s;
}

CoOccurrenceStats compute_stats(const AnnotationSet& set) {
    const CountMatrix y = set.label_matrix().cast<std::int64_t>();
    CoOccurrenceStats stats;
    stats.pair_counts = y.transpose() * y;
    stats.class_counts = stats.pair_counts.diagonal();
    stats.similarity = similarity_from_counts(stats.pair_counts);
    return stats;
}

Json stats_to_json(const CoOccurrenceStats& stats) {
    Json j;
    const auto m = stats.class_counts.size();
    Json n = Json::array();
    for (Eigen::Index i = 0; i < m; ++i) n.push_back(stats.class_counts(i));
    j["n"] = std::move(n);
    Json e = Json::array();
    for (Eigen::Index i = 0; i < m; ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < m; ++k) row.push_back(stats.pair_counts(i, k));
        e.push_back(std::move(row));
    }
    j["e"] = std::move(e);
    j["S"] = matrix_to_json(stats.similarity);
    return j;
}

} // namespace mlpsd
