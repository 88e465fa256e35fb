#pragma once

// State maps F : R^N x R^d -> R^N with first and second partial derivatives,
// and estimation of the Lipschitz-type constants L_Fx, L_Fz, L_Fxx, L_Fxz over
// a state region and an input range.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gsync/error.hpp"
#include "gsync/interval.hpp"
#include "gsync/linalg.hpp"
#include "gsync/observation.hpp"
#include "gsync/region.hpp"

namespace gsync {

enum class Squashing { Tanh, Logistic, Identity };

[[nodiscard]] inline std::string to_string(Squashing s) {
    switch (s) {
        case Squashing::Tanh: return "tanh";
        case Squashing::Logistic: return "logistic";
        case Squashing::Identity: return "identity";
    }
    return "?";
}

/// sup |sigma'| over the reals.
[[nodiscard]] inline double squashing_lipschitz(Squashing s) noexcept {
    switch (s) {
        case Squashing::Tanh: return 1.0;
        case Squashing::Logistic: return 0.25;
        case Squashing::Identity: return 1.0;
    }
    return 1.0;
}

/// sup |sigma''| over the reals: 4/(3 sqrt 3) for tanh, 1/(6 sqrt 3) for the logistic.
[[nodiscard]] inline double squashing_curvature(Squashing s) noexcept {
    switch (s) {
        case Squashing::Tanh: return 4.0 / (3.0 * std::sqrt(3.0));
        case Squashing::Logistic: return 1.0 / (6.0 * std::sqrt(3.0));
        case Squashing::Identity: return 0.0;
    }
    return 0.0;
}

namespace detail {
struct SquashingValue {
    double value;
    double d1;
    double d2;
};

[[nodiscard]] inline SquashingValue squash(Squashing s, double p) noexcept {
    switch (s) {
        case Squashing::Tanh: {
            const double t = std::tanh(p);
            const double d1 = 1.0 - t * t;
            return {t, d1, -2.0 * t * d1};
        }
        case Squashing::Logistic: {
            const double v = 1.0 / (1.0 + std::exp(-p));
            const double d1 = v * (1.0 - v);
            return {v, d1, d1 * (1.0 - 2.0 * v)};
        }
        case Squashing::Identity: return {p, 1.0, 0.0};
    }
    return {p, 1.0, 0.0};
}
}  // namespace detail

/// sigma(A x + C z + zeta), sigma applied componentwise.
struct EsnMap {
    Matrix A;
    Matrix C;
    Vector zeta;
    Squashing sigma = Squashing::Tanh;
};

/// x -> A x + e_1 z with A the lower shift in dimension 2q + 1, i.e.
/// (x_1, ..., x_N), z -> (z, x_1, ..., x_{N-1}).
struct LinearDelayMap {
    int q = 1;
};

enum class PowerBranch {
    OddExtension,  // sign(x)|x|^alpha on every orthant
    PositiveOnly,  // x^alpha, states must be strictly positive
};

/// (x_1^a, x_2^a, x_3^a) + lambda (sin kz, cos kz, sin^2 kz).
struct PowerSineMap {
    double alpha = 0.9;
    double lambda = 0.009;
    double k = 0.1;
    PowerBranch branch = PowerBranch::OddExtension;
};

struct CustomStateMap {
    std::string name = "custom";
    Eigen::Index state_dim = 0;
    Eigen::Index input_dim = 0;
    std::function<Vector(const Vector&, const Vector&)> fn;
    std::function<Matrix(const Vector&, const Vector&)> jac_state;  // optional
    std::function<Matrix(const Vector&, const Vector&)> jac_input;  // optional
};

/// Operator norms of D_xx F and D_xz F at a point (upper bounds for maps with
/// dense second derivatives, see `bilinear_norm_bound`).
struct SecondPartialNorms {
    double xx = 0.0;
    double xz = 0.0;
};

class StateMap {
public:
    using Kind = std::variant<EsnMap, LinearDelayMap, PowerSineMap, CustomStateMap>;

    explicit StateMap(Kind kind) : kind_(std::move(kind)) { validate(); }

    [[nodiscard]] static StateMap esn(Matrix A, Matrix C, Vector zeta, Squashing sigma = Squashing::Tanh) {
        return StateMap(EsnMap{std::move(A), std::move(C), std::move(zeta), sigma});
    }
    /// x -> A x + C z + b.
    [[nodiscard]] static StateMap affine(Matrix A, Matrix C, Vector b) {
        return esn(std::move(A), std::move(C), std::move(b), Squashing::Identity);
    }
    /// x -> w for every input.
    [[nodiscard]] static StateMap constant(const Vector& w, Eigen::Index input_dim = 1) {
        return affine(Matrix::Zero(w.size(), w.size()), Matrix::Zero(w.size(), input_dim), w);
    }
    [[nodiscard]] static StateMap linear_delay(int q) { return StateMap(LinearDelayMap{q}); }
    [[nodiscard]] static StateMap power_sine(double alpha, double lambda, double k,
                                             PowerBranch branch = PowerBranch::OddExtension) {
        return StateMap(PowerSineMap{alpha, lambda, k, branch});
    }

    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }

    [[nodiscard]] Eigen::Index state_dim() const {
        return std::visit(
            [](const auto& k) -> Eigen::Index {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, EsnMap>) return k.A.rows();
                else if constexpr (std::is_same_v<K, LinearDelayMap>) return 2 * k.q + 1;
                else if constexpr (std::is_same_v<K, PowerSineMap>) return 3;
                else return k.state_dim;
            },
            kind_);
    }

    [[nodiscard]] Eigen::Index input_dim() const {
        return std::visit(
            [](const auto& k) -> Eigen::Index {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, EsnMap>) return k.C.cols();
                else if constexpr (std::is_same_v<K, CustomStateMap>) return k.input_dim;
                else return 1;
            },
            kind_);
    }

    [[nodiscard]] std::string name() const {
        return std::visit(
            [](const auto& k) -> std::string {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, EsnMap>) return "esn";
                else if constexpr (std::is_same_v<K, LinearDelayMap>) return "linear_delay";
                else if constexpr (std::is_same_v<K, PowerSineMap>) return "power_sine";
                else return k.name;
            },
            kind_);
    }

    /// Second derivatives are analytic for the built-ins and obtained by
    /// finite differences of the first derivatives for custom maps.
    [[nodiscard]] int derivative_order() const noexcept { return 2; }
    [[nodiscard]] bool is_builtin() const noexcept { return !std::holds_alternative<CustomStateMap>(kind_); }

    /// D_x F does not depend on z (additive input term).
    [[nodiscard]] bool state_jacobian_depends_on_input() const noexcept {
        if (std::holds_alternative<LinearDelayMap>(kind_) || std::holds_alternative<PowerSineMap>(kind_)) return false;
        if (const auto* e = std::get_if<EsnMap>(&kind_)) return e->sigma != Squashing::Identity;
        return true;
    }
    /// D_z F does not depend on x.
    [[nodiscard]] bool input_jacobian_depends_on_state() const noexcept { return state_jacobian_depends_on_input(); }

    [[nodiscard]] Vector eval(const Vector& x, const Vector& z) const {
        check_args(x, z, "eval");
        return std::visit([&](const auto& k) { return eval_impl(k, x, z); }, kind_);
    }
    [[nodiscard]] Vector operator()(const Vector& x, const Vector& z) const { return eval(x, z); }

    [[nodiscard]] Matrix jac_state(const Vector& x, const Vector& z) const {
        check_args(x, z, "jac_state");
        return std::visit([&](const auto& k) { return jac_state_impl(k, x, z); }, kind_);
    }

    [[nodiscard]] Matrix jac_input(const Vector& x, const Vector& z) const {
        check_args(x, z, "jac_input");
        return std::visit([&](const auto& k) { return jac_input_impl(k, x, z); }, kind_);
    }

    [[nodiscard]] SecondPartialNorms second_partials(const Vector& x, const Vector& z) const {
        check_args(x, z, "second_partials");
        return std::visit([&](const auto& k) { return second_impl(k, x, z); }, kind_);
    }

private:
    void validate() const {
        std::visit(
            [](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, EsnMap>) {
                    if (k.A.rows() != k.A.cols() || k.A.rows() == 0) {
                        throw Error(ErrorCode::DimensionMismatch, "ESN connectivity matrix must be square and non-empty");
                    }
                    require_dim(k.C.rows(), k.A.rows(), "ESN input matrix rows");
                    require_dim(k.zeta.size(), k.A.rows(), "ESN bias");
                    if (k.C.cols() == 0) throw Error(ErrorCode::DimensionMismatch, "ESN needs at least one input");
                } else if constexpr (std::is_same_v<K, LinearDelayMap>) {
                    if (k.q < 0) throw Error(ErrorCode::InvalidArgument, "linear delay needs q >= 0");
                } else if constexpr (std::is_same_v<K, PowerSineMap>) {
                    if (!(k.alpha > 0.0 && k.alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "power-sine needs alpha in (0,1)");
                    if (!(k.lambda >= 0.0) || !(k.k >= 0.0)) {
                        throw Error(ErrorCode::InvalidArgument, "power-sine needs lambda >= 0 and k >= 0");
                    }
                } else {
                    if (!k.fn || k.state_dim <= 0 || k.input_dim <= 0) {
                        throw Error(ErrorCode::InvalidArgument, "custom state map needs a function and dimensions");
                    }
                }
            },
            kind_);
    }

    void check_args(const Vector& x, const Vector& z, const char* what) const {
        require_dim(x.size(), state_dim(), std::string(what) + " state");
        require_dim(z.size(), input_dim(), std::string(what) + " input");
        if (const auto* p = std::get_if<PowerSineMap>(&kind_); p && p->branch == PowerBranch::PositiveOnly) {
            if ((x.array() <= 0.0).any()) {
                throw Error(ErrorCode::DomainViolation, std::string(what) + ": power-sine state must be positive");
            }
        }
    }

    // ESN
    static Vector preactivation(const EsnMap& k, const Vector& x, const Vector& z) { return k.A * x + k.C * z + k.zeta; }
    static Vector eval_impl(const EsnMap& k, const Vector& x, const Vector& z) {
        return preactivation(k, x, z).unaryExpr([&](double p) { return detail::squash(k.sigma, p).value; });
    }
    static Vector squash_d1(const EsnMap& k, const Vector& x, const Vector& z) {
        return preactivation(k, x, z).unaryExpr([&](double p) { return detail::squash(k.sigma, p).d1; });
    }
    static Matrix jac_state_impl(const EsnMap& k, const Vector& x, const Vector& z) {
        return squash_d1(k, x, z).asDiagonal() * k.A;
    }
    static Matrix jac_input_impl(const EsnMap& k, const Vector& x, const Vector& z) {
        return squash_d1(k, x, z).asDiagonal() * k.C;
    }
    static SecondPartialNorms second_impl(const EsnMap& k, const Vector& x, const Vector& z) {
        if (k.sigma == Squashing::Identity) return {0.0, 0.0};
        const Vector p = preactivation(k, x, z);
        double xx = 0.0;
        double xz = 0.0;
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double d2 = std::abs(detail::squash(k.sigma, p(i)).d2);
            const double a = k.A.row(i).norm();
            const double c = k.C.row(i).norm();
            xx += (d2 * a * a) * (d2 * a * a);
            xz += (d2 * a * c) * (d2 * a * c);
        }
        return {std::sqrt(xx), std::sqrt(xz)};
    }

    // Linear delay
    static Vector eval_impl(const LinearDelayMap&, const Vector& x, const Vector& z) {
        Vector out(x.size());
        out(0) = z(0);
        for (Eigen::Index i = 1; i < x.size(); ++i) out(i) = x(i - 1);
        return out;
    }
    static Matrix jac_state_impl(const LinearDelayMap&, const Vector& x, const Vector&) { return lower_shift(x.size()); }
    static Matrix jac_input_impl(const LinearDelayMap&, const Vector& x, const Vector&) {
        Matrix c = Matrix::Zero(x.size(), 1);
        c(0, 0) = 1.0;
        return c;
    }
    static SecondPartialNorms second_impl(const LinearDelayMap&, const Vector&, const Vector&) { return {0.0, 0.0}; }

    // Power-sine
    static Vector eval_impl(const PowerSineMap& k, const Vector& x, const Vector& z) {
        const double kz = k.k * z(0);
        const double s = std::sin(kz);
        Vector out(3);
        out << odd_pow(x(0), k.alpha) + k.lambda * s, odd_pow(x(1), k.alpha) + k.lambda * std::cos(kz),
            odd_pow(x(2), k.alpha) + k.lambda * s * s;
        return out;
    }
    static void require_nonzero(const Vector& x) {
        if ((x.array() == 0.0).any()) {
            throw Error(ErrorCode::DomainViolation, "power-sine derivative is unbounded at a zero coordinate");
        }
    }
    static Matrix jac_state_impl(const PowerSineMap& k, const Vector& x, const Vector&) {
        require_nonzero(x);
        return x.unaryExpr([&](double v) { return k.alpha * std::pow(std::abs(v), k.alpha - 1.0); }).asDiagonal();
    }
    static Matrix jac_input_impl(const PowerSineMap& k, const Vector&, const Vector& z) {
        const double kz = k.k * z(0);
        Matrix j(3, 1);
        j << k.lambda * k.k * std::cos(kz), -k.lambda * k.k * std::sin(kz), k.lambda * k.k * std::sin(2.0 * kz);
        return j;
    }
    static SecondPartialNorms second_impl(const PowerSineMap& k, const Vector& x, const Vector&) {
        require_nonzero(x);
        // Diagonal third-order tensor: the bilinear norm is the largest entry.
        double xx = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            xx = std::max(xx, k.alpha * (1.0 - k.alpha) * std::pow(std::abs(x(i)), k.alpha - 2.0));
        }
        return {xx, 0.0};
    }

    // Custom
    static Vector eval_impl(const CustomStateMap& k, const Vector& x, const Vector& z) { return k.fn(x, z); }
    static Matrix jac_state_impl(const CustomStateMap& k, const Vector& x, const Vector& z) {
        if (k.jac_state) return k.jac_state(x, z);
        return fd_jacobian([&](const Vector& y) { return k.fn(y, z); }, x, 1e-6);
    }
    static Matrix jac_input_impl(const CustomStateMap& k, const Vector& x, const Vector& z) {
        if (k.jac_input) return k.jac_input(x, z);
        return fd_jacobian([&](const Vector& y) { return k.fn(x, y); }, z, 1e-6);
    }
    static SecondPartialNorms second_impl(const CustomStateMap& k, const Vector& x, const Vector& z) {
        const Eigen::Index n = k.state_dim;
        // slices_xx[i](j, l) = d^2 F_i / dx_j dx_l, slices_xz[i](j, l) = d^2 F_i / dx_j dz_l
        const auto flat = [&](const Vector& y, const Vector& w) {
            const Matrix j = jac_state_impl(k, y, w);
            return Vector(Eigen::Map<const Vector>(j.data(), j.size()));
        };
        const Matrix dxx = fd_jacobian([&](const Vector& y) { return flat(y, z); }, x, 1e-5);
        const Matrix dxz = fd_jacobian([&](const Vector& w) { return flat(x, w); }, z, 1e-5);
        std::vector<Matrix> sxx(static_cast<std::size_t>(n), Matrix(n, n));
        std::vector<Matrix> sxz(static_cast<std::size_t>(n), Matrix(n, k.input_dim));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                // column-major flattening of the N x N Jacobian: entry (i, j) sits at i + j N
                sxx[static_cast<std::size_t>(i)].row(j) = dxx.row(i + j * n);
                sxz[static_cast<std::size_t>(i)].row(j) = dxz.row(i + j * n);
            }
        }
        return {bilinear_norm_bound(sxx), bilinear_norm_bound(sxz)};
    }

    Kind kind_;
};

// ---------------------------------------------------------------------------
// Lipschitz-type constants over V x omega(M)

struct LipschitzOptions {
    std::size_t per_axis = 20;
    std::size_t input_samples = 200;
    std::size_t max_region_points = 250000;
    /// Cap on (state, input) evaluation pairs; above it each state point is
    /// paired with a rotating subset of the inputs.
    std::size_t max_evaluations = 2000000;
};

struct ConstantEstimate {
    std::optional<double> analytic;  // closed-form supremum or chain-rule upper bound
    double grid = 0.0;               // sampled supremum (a lower bound of the true one)

    [[nodiscard]] double value() const noexcept { return analytic ? std::max(*analytic, grid) : grid; }
};

struct LipschitzBounds {
    ConstantEstimate fx;
    ConstantEstimate fz;
    ConstantEstimate fxx;
    ConstantEstimate fxz;
    std::size_t per_axis = 0;
    std::size_t input_samples = 0;
    std::size_t evaluations = 0;
    std::string region_label;
    InputRange input_range;

    [[nodiscard]] double L_Fx() const noexcept { return fx.value(); }
    [[nodiscard]] double L_Fz() const noexcept { return fz.value(); }
    [[nodiscard]] double L_Fxx() const noexcept { return fxx.value(); }
    [[nodiscard]] double L_Fxz() const noexcept { return fxz.value(); }
    /// Every constant has a closed-form or guaranteed upper bound.
    [[nodiscard]] bool exact() const noexcept { return fx.analytic && fz.analytic && fxx.analytic && fxz.analytic; }
};

namespace detail {

struct AnalyticConstants {
    std::optional<double> fx, fz, fxx, fxz;
};

[[nodiscard]] inline AnalyticConstants analytic_constants(const StateMap& F, const InvariantRegion& region,
                                                          const InputRange& range) {
    return std::visit(
        [&](const auto& k) -> AnalyticConstants {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, LinearDelayMap>) {
                return {F.state_dim() > 1 ? 1.0 : 0.0, 1.0, 0.0, 0.0};
            } else if constexpr (std::is_same_v<K, EsnMap>) {
                const double ls = squashing_lipschitz(k.sigma);
                const double curv = squashing_curvature(k.sigma);
                double xx = 0.0;
                double xz = 0.0;
                for (Eigen::Index i = 0; i < k.A.rows(); ++i) {
                    const double a = k.A.row(i).squaredNorm();
                    xx += a * a;
                    xz += a * k.C.row(i).squaredNorm();
                }
                return {operator_norm(k.A) * ls, operator_norm(k.C) * ls, curv * std::sqrt(xx), curv * std::sqrt(xz)};
            } else if constexpr (std::is_same_v<K, PowerSineMap>) {
                // alpha |x|^(alpha-1) and alpha (1-alpha) |x|^(alpha-2) are decreasing in |x|,
                // so both suprema sit at the smallest |x_i| over the box.
                double min_abs = std::numeric_limits<double>::infinity();
                for (const auto& iv : region.intervals()) min_abs = std::min(min_abs, iv.min_abs());
                const double inf = std::numeric_limits<double>::infinity();
                const double fx = min_abs > 0.0 ? k.alpha * std::pow(min_abs, k.alpha - 1.0) : inf;
                const double fxx = min_abs > 0.0 ? k.alpha * (1.0 - k.alpha) * std::pow(min_abs, k.alpha - 2.0) : inf;
                // |D_z F| = lambda k sqrt(1 + sin^2(2 k z))
                const Interval two_kz = scale(Interval{range.lo(0), range.hi(0)}, 2.0 * k.k);
                const double fz = k.lambda * k.k * std::sqrt(1.0 + sin_squared_range(two_kz).hi);
                return {fx, fz, fxx, 0.0};
            } else {
                return {};
            }
        },
        F.kind());
}

}  // namespace detail

[[nodiscard]] inline LipschitzBounds lipschitz_bounds(const StateMap& F, const InvariantRegion& region,
                                                      const InputRange& range, const LipschitzOptions& opts = {}) {
    require_dim(region.dim(), F.state_dim(), "lipschitz_bounds region");
    require_dim(range.dim(), F.input_dim(), "lipschitz_bounds input range");

    LipschitzBounds out;
    out.per_axis = opts.per_axis;
    out.input_samples = opts.input_samples;
    out.region_label = region.label();
    out.input_range = range;

    const auto analytic = detail::analytic_constants(F, region, range);
    out.fx.analytic = analytic.fx;
    out.fz.analytic = analytic.fz;
    out.fxx.analytic = analytic.fxx;
    out.fxz.analytic = analytic.fxz;

    const std::vector<Vector> xs = region.sample(opts.per_axis, opts.max_region_points);
    const std::vector<Vector> zs = sample_inputs(range, std::max<std::size_t>(1, opts.input_samples));

    // Visits (x, z) pairs: the full product when x and z interact and the
    // product fits in the budget, otherwise a reduced deterministic pairing.
    const auto visit_pairs = [&](bool needs_x, bool needs_z, auto&& fn) {
        if (!needs_x && !needs_z) {
            fn(xs.front(), zs.front());
        } else if (!needs_z) {
            for (const auto& x : xs) fn(x, zs.front());
        } else if (!needs_x) {
            for (const auto& z : zs) fn(xs.front(), z);
        } else {
            const std::size_t per_x = std::clamp<std::size_t>(opts.max_evaluations / xs.size(), 1, zs.size());
            const std::size_t stride = zs.size() / per_x;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                for (std::size_t j = 0; j < per_x; ++j) fn(xs[i], zs[(i + j * stride) % zs.size()]);
            }
        }
    };

    const bool coupled = F.state_jacobian_depends_on_input();
    std::size_t evals = 0;
    visit_pairs(true, coupled, [&](const Vector& x, const Vector& z) {
        out.fx.grid = std::max(out.fx.grid, operator_norm(F.jac_state(x, z)));
        ++evals;
    });
    visit_pairs(coupled, true, [&](const Vector& x, const Vector& z) {
        out.fz.grid = std::max(out.fz.grid, operator_norm(F.jac_input(x, z)));
        ++evals;
    });
    visit_pairs(true, coupled, [&](const Vector& x, const Vector& z) {
        const auto s = F.second_partials(x, z);
        out.fxx.grid = std::max(out.fxx.grid, s.xx);
        out.fxz.grid = std::max(out.fxz.grid, s.xz);
        ++evals;
    });
    out.evaluations = evals;
    return out;
}

}  // namespace gsync
