#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gsync/error.hpp"
#include "gsync/linalg.hpp"

namespace gsync {

struct CoordinateProjection {
    std::vector<Eigen::Index> indices;
};

struct LinearObservation {
    Matrix matrix;
};

/// omega(m) = (1 / 2 pi) * sum_i sin(2 pi m_i): smooth and periodic on the
/// unit torus, with ||D omega||_inf = sqrt(#indices).
struct SineSumObservation {
    std::vector<Eigen::Index> indices;
};

struct CustomObservation {
    std::string name = "custom";
    Eigen::Index obs_dim = 1;
    std::function<Vector(const Vector&)> fn;
    std::function<Matrix(const Vector&)> jacobian;  // optional
};

struct DerivativeNorm {
    double value = 0.0;
    bool exact = false;  // analytic supremum rather than a sampled one
};

class ObservationMap {
public:
    using Kind = std::variant<CoordinateProjection, LinearObservation, SineSumObservation, CustomObservation>;

    explicit ObservationMap(Kind kind) : kind_(std::move(kind)) {
        if (obs_dim() <= 0) throw Error(ErrorCode::InvalidArgument, "observation must have positive dimension");
    }

    [[nodiscard]] static ObservationMap projection(std::vector<Eigen::Index> indices) {
        return ObservationMap(CoordinateProjection{std::move(indices)});
    }
    [[nodiscard]] static ObservationMap coordinate(Eigen::Index index) { return projection({index}); }
    [[nodiscard]] static ObservationMap linear(Matrix m) { return ObservationMap(LinearObservation{std::move(m)}); }
    [[nodiscard]] static ObservationMap sine_sum(std::vector<Eigen::Index> indices) {
        return ObservationMap(SineSumObservation{std::move(indices)});
    }

    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }

    [[nodiscard]] Eigen::Index obs_dim() const {
        return std::visit(
            [](const auto& k) -> Eigen::Index {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, CoordinateProjection>) return static_cast<Eigen::Index>(k.indices.size());
                else if constexpr (std::is_same_v<K, LinearObservation>) return k.matrix.rows();
                else if constexpr (std::is_same_v<K, SineSumObservation>) return 1;
                else return k.obs_dim;
            },
            kind_);
    }

    [[nodiscard]] std::string name() const {
        return std::visit(
            [](const auto& k) -> std::string {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, CoordinateProjection>) return "projection";
                else if constexpr (std::is_same_v<K, LinearObservation>) return "linear";
                else if constexpr (std::is_same_v<K, SineSumObservation>) return "sine_sum";
                else return k.name;
            },
            kind_);
    }

    [[nodiscard]] Vector operator()(const Vector& m) const {
        return std::visit(
            [&](const auto& k) -> Vector {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, CoordinateProjection>) {
                    Vector out(static_cast<Eigen::Index>(k.indices.size()));
                    for (std::size_t i = 0; i < k.indices.size(); ++i) out(static_cast<Eigen::Index>(i)) = m(check(k.indices[i], m));
                    return out;
                } else if constexpr (std::is_same_v<K, LinearObservation>) {
                    require_dim(m.size(), k.matrix.cols(), "linear observation");
                    return k.matrix * m;
                } else if constexpr (std::is_same_v<K, SineSumObservation>) {
                    double s = 0.0;
                    for (auto i : k.indices) s += std::sin(2.0 * std::numbers::pi * m(check(i, m)));
                    return Vector::Constant(1, s / (2.0 * std::numbers::pi));
                } else {
                    return k.fn(m);
                }
            },
            kind_);
    }

    [[nodiscard]] Matrix jacobian(const Vector& m) const {
        return std::visit(
            [&](const auto& k) -> Matrix {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, CoordinateProjection>) {
                    Matrix j = Matrix::Zero(static_cast<Eigen::Index>(k.indices.size()), m.size());
                    for (std::size_t i = 0; i < k.indices.size(); ++i) j(static_cast<Eigen::Index>(i), check(k.indices[i], m)) = 1.0;
                    return j;
                } else if constexpr (std::is_same_v<K, LinearObservation>) {
                    return k.matrix;
                } else if constexpr (std::is_same_v<K, SineSumObservation>) {
                    Matrix j = Matrix::Zero(1, m.size());
                    for (auto i : k.indices) {
                        const Eigen::Index c = check(i, m);
                        j(0, c) += std::cos(2.0 * std::numbers::pi * m(c));
                    }
                    return j;
                } else {
                    if (k.jacobian) return k.jacobian(m);
                    return fd_jacobian(k.fn, m, 1e-6);
                }
            },
            kind_);
    }

    /// ||D omega||_inf: analytic for the built-in kinds, sampled maximum over
    /// `samples` for custom observations.
    [[nodiscard]] DerivativeNorm derivative_sup_norm(std::span<const Vector> samples) const {
        return std::visit(
            [&](const auto& k) -> DerivativeNorm {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, CoordinateProjection>) {
                    return {k.indices.empty() ? 0.0 : 1.0, true};
                } else if constexpr (std::is_same_v<K, LinearObservation>) {
                    return {operator_norm(k.matrix), true};
                } else if constexpr (std::is_same_v<K, SineSumObservation>) {
                    return {std::sqrt(static_cast<double>(k.indices.size())), true};
                } else {
                    double best = 0.0;
                    for (const auto& m : samples) best = std::max(best, operator_norm(jacobian(m)));
                    return {best, false};
                }
            },
            kind_);
    }

private:
    static Eigen::Index check(Eigen::Index i, const Vector& m) {
        if (i < 0 || i >= m.size()) {
            throw Error(ErrorCode::DimensionMismatch,
                        "observation index " + std::to_string(i) + " out of range for phase dimension " +
                            std::to_string(m.size()));
        }
        return i;
    }

    Kind kind_;
};

/// Componentwise range of observed inputs (the working surrogate for omega(M)).
struct InputRange {
    Vector lo;
    Vector hi;

    [[nodiscard]] Eigen::Index dim() const noexcept { return lo.size(); }
};

[[nodiscard]] inline InputRange observed_range(const ObservationMap& omega, std::span<const Vector> points) {
    if (points.empty()) throw Error(ErrorCode::InvalidArgument, "observed_range needs points");
    InputRange r;
    r.lo = omega(points.front());
    r.hi = r.lo;
    for (const auto& p : points) {
        const Vector z = omega(p);
        r.lo = r.lo.cwiseMin(z);
        r.hi = r.hi.cwiseMax(z);
    }
    return r;
}

/// Deterministic input samples covering the range: an even grid for scalar
/// inputs, a Halton sequence (plus the two extreme corners) otherwise.
[[nodiscard]] inline std::vector<Vector> sample_inputs(const InputRange& range, std::size_t count) {
    std::vector<Vector> out;
    if (count == 0) return out;
    const Eigen::Index d = range.dim();
    if (d == 1) {
        for (double z : linspace(range.lo(0), range.hi(0), count)) out.push_back(Vector::Constant(1, z));
        return out;
    }
    out.push_back(range.lo);
    if (count > 1) out.push_back(range.hi);
    for (std::size_t i = 1; out.size() < count; ++i) {
        Vector z(d);
        for (Eigen::Index j = 0; j < d; ++j) {
            z(j) = range.lo(j) + radical_inverse(i, nth_prime(static_cast<std::size_t>(j))) * (range.hi(j) - range.lo(j));
        }
        out.push_back(std::move(z));
    }
    return out;
}

}  // namespace gsync
