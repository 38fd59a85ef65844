#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include <Eigen/Dense>

#include "mlpsd/dataset.hpp"
#include "mlpsd/error.hpp"

namespace mlpsd {

/// Asymmetric loss hyper-parameters: focusing exponents and the
/// negative-probability shift.
struct AslConfig {
    double gamma_pos = 0.0;
    double gamma_neg = 4.0;
    double mu = 0.05;

    void validate() const {
        if (!(gamma_pos >= 0.0) || !(gamma_neg >= 0.0)) throw ConfigError("ASL exponents must be >= 0");
        if (!(mu >= 0.0 && mu < 1.0)) throw ConfigError("ASL shift must lie in [0, 1)");
    }
};

inline constexpr double kLogClamp = 1e-12;

template <typename Scalar>
struct LossResult {
    Scalar loss = Scalar(0);
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> grad;
};

/// Logits with a validity mask (1 = entry participates).
template <typename Scalar>
struct LogitMatrix {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> values;
    LabelMatrix mask;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

template <typename Scalar>
Scalar sigmoid(Scalar z) {
    return z >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-z)) : std::exp(z) / (Scalar(1) + std::exp(z));
}

/// Single-entry asymmetric loss term and its derivative in the logit.
/// Positive: -(1-p)^g+ log p. Negative: -p_m^g- log(1-p_m), p_m = max(p - mu, 0),
/// with d p_m / d p taken as 0 at and below the shift.
template <typename Scalar>
std::pair<Scalar, Scalar> asl_term(Scalar logit, bool positive, const AslConfig& cfg) {
    using std::log;
    using std::pow;
    const Scalar p = sigmoid(logit);
    const Scalar q = Scalar(1) - p;
    const Scalar clamp = Scalar(kLogClamp);
    if (positive) {
        const Scalar g = Scalar(cfg.gamma_pos);
        const Scalar log_p = log(std::max(p, clamp));
        const Scalar weight = pow(q, g);
        const Scalar value = -weight * log_p;
        // d/dz = g p q^g log p - q^(g+1)  (second term vanishes under the clamp)
        Scalar d = g * p * weight * log_p;
        if (p >= clamp) d -= weight * q;
        return {value, d};
    }
    const Scalar g = Scalar(cfg.gamma_neg);
    const Scalar pm = p - Scalar(cfg.mu);
    if (pm <= Scalar(0)) return {Scalar(0), Scalar(0)};
    const Scalar one_minus = Scalar(1) - pm;
    const Scalar log_q = log(std::max(one_minus, clamp));
    const Scalar weight = pow(pm, g);
    const Scalar value = -weight * log_q;
    Scalar d_pm = g > Scalar(0) ? -g * pow(pm, g - Scalar(1)) * log_q : Scalar(0);
    if (one_minus >= clamp) d_pm += weight / one_minus;
    return {value, d_pm * p * q};
}

/// Asymmetric loss summed over categories and averaged over rows, with its
/// exact gradient in the logits.
template <typename DerivedL, typename DerivedY>
LossResult<typename DerivedL::Scalar> asl(const Eigen::MatrixBase<DerivedL>& logits,
                                          const Eigen::MatrixBase<DerivedY>& labels, const AslConfig& cfg) {
    using Scalar = typename DerivedL::Scalar;
    if (logits.rows() != labels.rows() || logits.cols() != labels.cols())
        throw ConfigError("asl: logits and labels differ in shape");
    LossResult<Scalar> out;
    out.grad.resize(logits.rows(), logits.cols());
    const auto n = logits.rows();
    if (n == 0) return out;
    const Scalar inv_n = Scalar(1) / Scalar(n);
    Scalar total = Scalar(0);
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto [value, d] = asl_term<Scalar>(logits(r, c), labels(r, c) != 0, cfg);
            total += value;
            out.grad(r, c) = d * inv_n;
        }
    }
    out.loss = total * inv_n;
    return out;
}

/// Masked squared logit distance to each teacher:
/// (1/2n) sum_t sum_ij M^t_ij (s_ij - t_ij)^2.
template <typename Derived>
LossResult<typename Derived::Scalar> kd_mse(const Eigen::MatrixBase<Derived>& student,
                                            std::span<const LogitMatrix<typename Derived::Scalar>> teachers) {
    using Scalar = typename Derived::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    LossResult<Scalar> out;
    out.grad = Matrix::Zero(student.rows(), student.cols());
    const auto n = student.rows();
    if (n == 0) return out;
    Scalar total = Scalar(0);
    for (const auto& teacher : teachers) {
        if (teacher.values.rows() != n || teacher.values.cols() != student.cols() ||
            teacher.mask.rows() != n || teacher.mask.cols() != student.cols())
            throw ConfigError("kd_mse: teacher shape does not match student");
        // Masked entries contribute exactly zero whatever the teacher holds there.
        const Matrix diff = (teacher.mask.array() != 0).select(student - teacher.values, Scalar(0));
        total += diff.squaredNorm();
        out.grad += diff;
    }
    out.loss = total / (Scalar(2) * Scalar(n));
    out.grad /= Scalar(n);
    return out;
}

template <typename Derived>
LossResult<typename Derived::Scalar> kd_mse(const Eigen::MatrixBase<Derived>& student,
                                            const LogitMatrix<typename Derived::Scalar>& teacher_plus,
                                            const LogitMatrix<typename Derived::Scalar>& teacher_minus) {
    const LogitMatrix<typename Derived::Scalar> both[] = {teacher_plus, teacher_minus};
    return kd_mse(student, std::span<const LogitMatrix<typename Derived::Scalar>>(both));
}

} // namespace mlpsd
