#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "mlpsd/costats.hpp"
#include "mlpsd/error.hpp"

namespace mlpsd {

enum class AffinityMode { co, dis };

/// Matrix that the smoothed co-occurrence is subtracted from in dis mode.
/// all_ones gives never-co-occurring pairs affinity 1; identity is the
/// literal form and can produce negative affinities.
enum class ComplementBase { all_ones, identity };

template <typename Scalar>
struct AffinityMatrix {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Matrix values;
    AffinityMode mode = AffinityMode::co;
    Scalar tau = Scalar(1);
    ComplementBase complement_base = ComplementBase::all_ones;
};

/// Symmetrized tau-th root of the similarity, (S^(1/tau) + S^(1/tau)^T) / 2,
/// taken elementwise.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
smoothed_cooccurrence(const Eigen::MatrixBase<Derived>& similarity, typename Derived::Scalar tau) {
    using Scalar = typename Derived::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (!(tau > Scalar(0))) throw ConfigError("tau must be positive");
    if (similarity.rows() != similarity.cols()) throw ConfigError("similarity matrix must be square");
    const Matrix root = similarity.array().pow(Scalar(1) / tau).matrix();
    return (root + root.transpose()) / Scalar(2);
}

template <typename Derived>
AffinityMatrix<typename Derived::Scalar> build_affinity(const Eigen::MatrixBase<Derived>& similarity,
                                                        typename Derived::Scalar tau, AffinityMode mode,
                                                        ComplementBase base = ComplementBase::all_ones) {
    using Scalar = typename Derived::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    AffinityMatrix<Scalar> out;
    out.mode = mode;
    out.tau = tau;
    out.complement_base = base;
    const Matrix smoothed = smoothed_cooccurrence(similarity, tau);
    if (mode == AffinityMode::co) {
        out.values = smoothed;
    } else {
        const auto m = smoothed.rows();
        if (base == ComplementBase::all_ones)
            out.values = Matrix::Ones(m, m) - smoothed;
        else
            out.values = Matrix::Identity(m, m) - smoothed;
    }
    if (!out.values.allFinite()) throw NumericError("affinity matrix has non-finite entries");
    return out;
}

inline AffinityMatrix<double> build_affinity(const CoOccurrenceStats& stats, double tau, AffinityMode mode,
                                             ComplementBase base = ComplementBase::all_ones) {
    return build_affinity(stats.similarity, tau, mode, base);
}

inline std::string to_string(ComplementBase base) {
    return base == ComplementBase::all_ones ? "all_ones" : "identity";
}

} // namespace mlpsd
