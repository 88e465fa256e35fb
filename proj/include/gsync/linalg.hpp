#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gsync/error.hpp"

namespace gsync {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

[[nodiscard]] inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_finite(const Vector& v, const std::string& context) {
    if (!v.allFinite()) {
        throw Error(ErrorCode::NonFinite, context);
    }
}

inline void require_dim(Eigen::Index actual, Eigen::Index expected, const std::string& context) {
    if (actual != expected) {
        throw Error(ErrorCode::DimensionMismatch,
                    context + ": expected dimension " + std::to_string(expected) + ", got " +
                        std::to_string(actual));
    }
}

/// Spectral norm (largest singular value).
[[nodiscard]] inline double operator_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    if (m.rows() == 1 || m.cols() == 1) return m.norm();
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

[[nodiscard]] inline double smallest_singular_value(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

/// Upper bound on the operator norm of a vector-valued bilinear map given by
/// slices: B(u, v)_i = u^T slices[i] v. Uses ||B|| <= sqrt(sum_i ||slices[i]||^2),
/// which is tight when a single slice is non-zero.
[[nodiscard]] inline double bilinear_norm_bound(const std::vector<Matrix>& slices) {
    double acc = 0.0;
    for (const auto& s : slices) {
        const double n = operator_norm(s);
        acc += n * n;
    }
    return std::sqrt(acc);
}

/// Lower shift matrix: ones on the first sub-diagonal.
[[nodiscard]] inline Matrix lower_shift(Eigen::Index n) {
    Matrix a = Matrix::Zero(n, n);
    for (Eigen::Index i = 1; i < n; ++i) a(i, i - 1) = 1.0;
    return a;
}

/// Central finite-difference Jacobian of `f` at `x`.
template <typename Fn>
[[nodiscard]] Matrix fd_jacobian(Fn&& f, const Vector& x, double step) {
    const Vector f0 = f(x);
    Matrix jac(f0.size(), x.size());
    Vector xp = x;
    Vector xm = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double hj = step * std::max(1.0, std::abs(x(j)));
        xp(j) = x(j) + hj;
        xm(j) = x(j) - hj;
        jac.col(j) = (f(xp) - f(xm)) / (2.0 * hj);
        xp(j) = x(j);
        xm(j) = x(j);
    }
    return jac;
}

/// Points spread evenly over [lo, hi] (inclusive). One point yields the midpoint.
[[nodiscard]] inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out;
    out.reserve(n);
    if (n == 1) {
        out.push_back(0.5 * (lo + hi));
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double s = static_cast<double>(i) / static_cast<double>(n - 1);
        out.push_back(i + 1 == n ? hi : lo + s * (hi - lo));
    }
    return out;
}

/// Radical inverse in the given base; used for deterministic quasi-random
/// sampling of boxes whose full grids are too large.
[[nodiscard]] inline double radical_inverse(std::size_t index, unsigned base) {
    double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (index > 0) {
        r += f * static_cast<double>(index % base);
        index /= base;
        f *= inv;
    }
    return r;
}

[[nodiscard]] inline unsigned nth_prime(std::size_t n) {
    static constexpr unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                          43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};
    return primes[n % (sizeof(primes) / sizeof(primes[0]))];
}

}  // namespace gsync
