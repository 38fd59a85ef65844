#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "mlpsd/dataset.hpp"
#include "mlpsd/error.hpp"

namespace mlpsd {

/// Degrees at or below this are treated as isolated vertices.
inline constexpr double kIsolatedDegree = 1e-12;
/// Eigenvalues in [-kEigenClamp, 0) are reported as exactly 0.
inline constexpr double kEigenClamp = 1e-8;

template <typename Scalar>
struct SpectralEmbedding {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Matrix vectors;        // m x k, one row per category; zero rows for isolated vertices
    Vector eigenvalues;    // k, nondecreasing
    bool row_normalized = false;
    IndexList isolated;    // vertices left out of the eigenproblem
};

/// Normalized-cut embedding: the k eigenvectors of D^-1/2 (D - P) D^-1/2 with
/// the smallest eigenvalues, computed over the non-isolated vertices.
/// With row_normalize, each nonzero row is scaled to unit length.
template <typename Derived>
SpectralEmbedding<typename Derived::Scalar> spectral_embed(const Eigen::MatrixBase<Derived>& affinity, int k,
                                                           bool row_normalize = true) {
    using Scalar = typename Derived::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    const int m = static_cast<int>(affinity.rows());
    if (affinity.cols() != m) throw ConfigError("affinity matrix must be square");
    if (k < 1 || k > m) throw ConfigError("spectral_embed: k must lie in [1, m]");
    if (!affinity.allFinite()) throw NumericError("affinity matrix has non-finite entries");
    const Scalar asym = (affinity - affinity.transpose()).cwiseAbs().maxCoeff();
    if (asym > Scalar(1e-12) * (Scalar(1) + affinity.cwiseAbs().maxCoeff()))
        throw ConfigError("affinity matrix must be symmetric");

    const Vector degree = affinity.rowwise().sum();
    IndexList active;
    SpectralEmbedding<Scalar> out;
    for (int i = 0; i < m; ++i) {
        if (degree(i) > Scalar(kIsolatedDegree))
            active.push_back(i);
        else
            out.isolated.push_back(i);
    }
    const int a = static_cast<int>(active.size());
    if (a < k) throw NumericError("spectral_embed: fewer connected categories than requested clusters");

    Vector inv_sqrt_degree(a);
    for (int r = 0; r < a; ++r) inv_sqrt_degree(r) = Scalar(1) / std::sqrt(degree(active[r]));

    // D^-1/2 (D - P) D^-1/2 = I - D^-1/2 P D^-1/2 on the active vertices.
    Matrix laplacian(a, a);
    for (int c = 0; c < a; ++c)
        for (int r = 0; r < a; ++r)
            laplacian(r, c) = (r == c ? Scalar(1) : Scalar(0)) -
                              inv_sqrt_degree(r) * affinity(active[r], active[c]) * inv_sqrt_degree(c);
    laplacian = (laplacian + laplacian.transpose().eval()) / Scalar(2);

    Eigen::SelfAdjointEigenSolver<Matrix> solver(laplacian);
    if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition failed");

    out.eigenvalues = solver.eigenvalues().head(k);
    for (int j = 0; j < k; ++j)
        if (out.eigenvalues(j) < Scalar(0) && out.eigenvalues(j) >= Scalar(-kEigenClamp)) out.eigenvalues(j) = Scalar(0);

    out.vectors = Matrix::Zero(m, k);
    for (int r = 0; r < a; ++r) out.vectors.row(active[r]) = solver.eigenvectors().row(r).head(k);

    if (row_normalize) {
        for (int i = 0; i < m; ++i) {
            const Scalar norm = out.vectors.row(i).norm();
            if (norm > Scalar(0)) out.vectors.row(i) /= norm;
        }
    }
    out.row_normalized = row_normalize;
    return out;
}

} // namespace mlpsd
