#pragma once

#include "mpmmtt/log.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>

namespace mpmmtt {

inline constexpr int kStateDim = 4;  // [x, vx, y, vy]
inline constexpr int kMeasDim = 2;   // [range, azimuth]

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using Mat24 = Eigen::Matrix<double, 2, 4>;
using Mat42 = Eigen::Matrix<double, 4, 2>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kRegularization = 1e-9;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(a + std::numbers::pi, two_pi);
    if (w <= 0.0) w += two_pi;
    return w - std::numbers::pi;
}

template <typename Derived>
typename Derived::PlainObject symmetrize(const Eigen::MatrixBase<Derived>& m) {
    return 0.5 * (m + m.transpose());
}

/// Symmetrizes and clamps eigenvalues to be >= 0.
template <int N>
Eigen::Matrix<double, N, N> clamp_psd(const Eigen::Matrix<double, N, N>& m) {
    Eigen::Matrix<double, N, N> s = symmetrize(m);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(s);
    if (es.eigenvalues().minCoeff() >= 0.0) return s;
    const auto clamped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
}

/// Inverse of a symmetric positive definite matrix. Falls back to adding
/// kRegularization * I (repeatedly, growing) when the Cholesky factorization fails.
template <int N>
Eigen::Matrix<double, N, N> spd_inverse(const Eigen::Matrix<double, N, N>& m,
                                        std::string_view what = "matrix") {
    using M = Eigen::Matrix<double, N, N>;
    M s = symmetrize(m);
    Eigen::LLT<M> llt(s);
    if (llt.info() == Eigen::Success) return llt.solve(M::Identity());
    double eps = kRegularization * std::max(1.0, s.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 12; ++attempt) {
        log_warning(std::string(what) + " not positive definite; adding " +
                    std::to_string(eps) + " * I");
        llt.compute(s + eps * M::Identity());
        if (llt.info() == Eigen::Success) return llt.solve(M::Identity());
        eps *= 100.0;
    }
    return s.completeOrthogonalDecomposition().pseudoInverse();
}

/// log(sum(exp(v))) over a span, returning -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
    double mx = kNegInf;
    for (double x : v) mx = std::max(mx, x);
    if (mx == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

inline double log_sum_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double mx = std::max(a, b);
    return mx + std::log(std::exp(a - mx) + std::exp(b - mx));
}

/// Numerically safe logistic function.
inline double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

template <int N>
bool is_symmetric(const Eigen::Matrix<double, N, N>& m, double tol = 1e-9) {
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

template <int N>
double min_eigenvalue(const Eigen::Matrix<double, N, N>& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(symmetrize(m));
    return es.eigenvalues().minCoeff();
}

}  // namespace mpmmtt
