#pragma once

// Invertible discrete-time dynamical systems: analytic torus maps and
// fixed-step RK4 flow maps of ODEs, together with their inverses, tangent
// maps, trajectories and finite delay windows of observations.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gsync/error.hpp"
#include "gsync/linalg.hpp"
#include "gsync/observation.hpp"

namespace gsync {

/// Autonomous vector field x' = rhs(x).
struct VectorField {
    std::string name;
    Eigen::Index dim = 0;
    std::function<Vector(const Vector&)> rhs;
};

struct LorenzParams {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
    /// When true, use u' = sigma (u - v) exactly as it is sometimes misprinted
    /// instead of the standard u' = sigma (v - u). The printed form is unstable
    /// and diverges from the attractor within a few time units.
    bool printed_sign = false;
};

[[nodiscard]] inline VectorField lorenz_field(const LorenzParams& p) {
    VectorField f;
    f.name = p.printed_sign ? "lorenz_printed_sign" : "lorenz";
    f.dim = 3;
    f.rhs = [p](const Vector& x) {
        Vector dx(3);
        dx(0) = p.printed_sign ? p.sigma * (x(0) - x(1)) : p.sigma * (x(1) - x(0));
        dx(1) = x(0) * (p.rho - x(2)) - x(1);
        dx(2) = x(0) * x(1) - p.beta * x(2);
        return dx;
    };
    return f;
}

/// Flow map over one time step h, integrated with `substeps` classical RK4 steps.
struct OdeFlow {
    VectorField field;
    double h = 0.01;
    int substeps = 1;
};

/// m -> m + angles (mod 1) on the unit torus.
struct TorusRotation {
    Vector angles;
};

/// Arnold cat map [[2,1],[1,1]] on the unit 2-torus.
struct CatMap {};

struct CustomMap {
    std::string name = "custom";
    Eigen::Index dim = 0;
    std::function<Vector(const Vector&)> forward;
    std::function<Vector(const Vector&)> inverse;
    std::function<Matrix(const Vector&)> jacobian;  // optional; FD when empty
};

enum class DomainKind { Box, Torus, UnboundedWithAttractor };

struct DomainDescriptor {
    DomainKind kind = DomainKind::UnboundedWithAttractor;
    Vector lo;  // Box only
    Vector hi;  // Box only
};

struct SystemOptions {
    double roundtrip_tol = 1e-9;  // relative to 1 + |m|_inf
    double fd_step = 1e-6;
    int newton_max_iters = 12;
};

[[nodiscard]] inline double wrap_unit(double x) noexcept {
    double r = x - std::floor(x);
    return r >= 1.0 ? 0.0 : r;
}

class DiscreteSystem {
public:
    using Kind = std::variant<OdeFlow, TorusRotation, CatMap, CustomMap>;

    DiscreteSystem(Kind kind, DomainDescriptor domain, SystemOptions opts = {})
        : kind_(std::move(kind)), domain_(std::move(domain)), opts_(opts) {
        if (phase_dim() <= 0) throw Error(ErrorCode::InvalidArgument, "system has no phase dimension");
        if (const auto* flow = std::get_if<OdeFlow>(&kind_)) {
            if (!(flow->h > 0.0) || flow->substeps < 1) {
                throw Error(ErrorCode::InvalidArgument, "flow map needs h > 0 and substeps >= 1");
            }
        }
    }

    [[nodiscard]] static DiscreteSystem lorenz(double h = 0.01, int substeps = 1, LorenzParams p = {},
                                               SystemOptions opts = {}) {
        return DiscreteSystem(OdeFlow{lorenz_field(p), h, substeps},
                              DomainDescriptor{DomainKind::UnboundedWithAttractor, {}, {}}, opts);
    }

    [[nodiscard]] static DiscreteSystem torus_rotation(Vector angles, SystemOptions opts = {}) {
        return DiscreteSystem(TorusRotation{std::move(angles)}, DomainDescriptor{DomainKind::Torus, {}, {}},
                              opts);
    }

    [[nodiscard]] static DiscreteSystem cat_map(SystemOptions opts = {}) {
        return DiscreteSystem(CatMap{}, DomainDescriptor{DomainKind::Torus, {}, {}}, opts);
    }

    [[nodiscard]] Eigen::Index phase_dim() const {
        return std::visit(
            [](const auto& k) -> Eigen::Index {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, OdeFlow>) return k.field.dim;
                else if constexpr (std::is_same_v<K, TorusRotation>) return k.angles.size();
                else if constexpr (std::is_same_v<K, CatMap>) return 2;
                else return k.dim;
            },
            kind_);
    }

    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }
    [[nodiscard]] const DomainDescriptor& domain() const noexcept { return domain_; }
    [[nodiscard]] const SystemOptions& options() const noexcept { return opts_; }
    [[nodiscard]] bool is_torus() const noexcept { return domain_.kind == DomainKind::Torus; }
    [[nodiscard]] bool is_flow() const noexcept { return std::holds_alternative<OdeFlow>(kind_); }

    [[nodiscard]] std::string name() const {
        return std::visit(
            [](const auto& k) -> std::string {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, OdeFlow>) return k.field.name;
                else if constexpr (std::is_same_v<K, TorusRotation>) return "torus_rotation";
                else if constexpr (std::is_same_v<K, CatMap>) return "cat_map";
                else return k.name;
            },
            kind_);
    }

    /// Physical time between consecutive iterates (h for flows, 1 for maps).
    [[nodiscard]] double time_step() const noexcept {
        if (const auto* flow = std::get_if<OdeFlow>(&kind_)) return flow->h;
        return 1.0;
    }

    [[nodiscard]] Vector step(const Vector& m) const {
        check_input(m, "step");
        Vector out = std::visit([&](const auto& k) { return forward(k, m); }, kind_);
        if (is_torus()) out = out.unaryExpr([](double x) { return wrap_unit(x); });
        return out;
    }

    [[nodiscard]] Vector inverse_step(const Vector& m) const {
        check_input(m, "inverse_step");
        Vector out = std::visit([&](const auto& k) { return backward(k, m); }, kind_);
        if (is_torus()) out = out.unaryExpr([](double x) { return wrap_unit(x); });
        return out;
    }

    /// Tangent map T_m(phi). Analytic for the torus maps, central finite
    /// differences of the flow map otherwise.
    [[nodiscard]] Matrix jacobian(const Vector& m) const {
        check_input(m, "jacobian");
        return std::visit(
            [&](const auto& k) -> Matrix {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, TorusRotation>) {
                    return Matrix::Identity(k.angles.size(), k.angles.size());
                } else if constexpr (std::is_same_v<K, CatMap>) {
                    return cat_matrix();
                } else if constexpr (std::is_same_v<K, CustomMap>) {
                    if (k.jacobian) return k.jacobian(m);
                    return fd_jacobian([&](const Vector& x) { return k.forward(x); }, m, opts_.fd_step);
                } else {
                    return fd_jacobian([&](const Vector& x) { return forward(k, x); }, m, opts_.fd_step);
                }
            },
            kind_);
    }

    /// Tangent map of the inverse at m, i.e. [T_{phi^{-1}(m)} phi]^{-1}.
    [[nodiscard]] Matrix inverse_jacobian(const Vector& m) const {
        if (std::holds_alternative<CatMap>(kind_)) return cat_matrix().inverse();
        if (const auto* rot = std::get_if<TorusRotation>(&kind_)) {
            return Matrix::Identity(rot->angles.size(), rot->angles.size());
        }
        return jacobian(inverse_step(m)).inverse();
    }

    /// Distance in phase space; wraps coordinates on torus domains.
    [[nodiscard]] double distance(const Vector& a, const Vector& b) const {
        Vector d = a - b;
        if (is_torus()) {
            d = d.unaryExpr([](double x) {
                const double r = std::abs(x - std::round(x));
                return r;
            });
        }
        return d.norm();
    }

private:
    static Matrix cat_matrix() {
        Matrix c(2, 2);
        c << 2.0, 1.0, 1.0, 1.0;
        return c;
    }

    void check_input(const Vector& m, const char* what) const {
        require_dim(m.size(), phase_dim(), what);
        if (!m.allFinite()) throw Error(ErrorCode::NonFinite, std::string(what) + ": non-finite phase point");
        if (domain_.kind == DomainKind::Box) {
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                if (m(i) < domain_.lo(i) || m(i) > domain_.hi(i)) {
                    throw Error(ErrorCode::DomainViolation, std::string(what) + ": point outside domain box");
                }
            }
        }
    }

    static Vector rk4(const VectorField& f, const Vector& x, double dt) {
        const Vector k1 = f.rhs(x);
        const Vector k2 = f.rhs(x + 0.5 * dt * k1);
        const Vector k3 = f.rhs(x + 0.5 * dt * k2);
        const Vector k4 = f.rhs(x + dt * k3);
        return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    static Vector integrate(const OdeFlow& flow, const Vector& m, double sign) {
        const double dt = sign * flow.h / flow.substeps;
        Vector x = m;
        for (int s = 0; s < flow.substeps; ++s) {
            x = rk4(flow.field, x, dt);
            if (!x.allFinite()) {
                throw Error(ErrorCode::NonFinite,
                            "integration of " + flow.field.name + " diverged at substep " + std::to_string(s),
                            static_cast<std::size_t>(s));
            }
        }
        return x;
    }

    Vector forward(const OdeFlow& flow, const Vector& m) const { return integrate(flow, m, 1.0); }
    Vector forward(const TorusRotation& rot, const Vector& m) const {
        require_dim(rot.angles.size(), m.size(), "torus rotation");
        return m + rot.angles;
    }
    Vector forward(const CatMap&, const Vector& m) const { return cat_matrix() * m; }
    Vector forward(const CustomMap& k, const Vector& m) const { return k.forward(m); }

    Vector backward(const TorusRotation& rot, const Vector& m) const { return m - rot.angles; }
    Vector backward(const CatMap&, const Vector& m) const {
        Vector out(2);
        out << m(0) - m(1), -m(0) + 2.0 * m(1);
        return out;
    }
    Vector backward(const CustomMap& k, const Vector& m) const { return k.inverse(m); }

    // The flow map is the RK4 map, so its exact inverse solves step(x) = m.
    // Backward integration gives a starting point accurate to the local
    // truncation error; Newton's method then removes that error.
    Vector backward(const OdeFlow& flow, const Vector& m) const {
        Vector x = integrate(flow, m, -1.0);
        const double scale = 1.0 + m.lpNorm<Eigen::Infinity>();
        constexpr double eps = std::numeric_limits<double>::epsilon();
        for (int it = 0; it < opts_.newton_max_iters; ++it) {
            const Vector r = integrate(flow, x, 1.0) - m;
            if (r.lpNorm<Eigen::Infinity>() <= 4.0 * eps * scale) break;
            const Matrix jac = fd_jacobian([&](const Vector& y) { return integrate(flow, y, 1.0); }, x,
                                           opts_.fd_step);
            const Vector dx = jac.partialPivLu().solve(r);
            x -= dx;
            if (!x.allFinite()) throw Error(ErrorCode::NonFinite, "inverse_step: Newton iteration diverged");
            if (dx.lpNorm<Eigen::Infinity>() <= eps * (1.0 + x.lpNorm<Eigen::Infinity>())) break;
        }
        const double residual = (integrate(flow, x, 1.0) - m).lpNorm<Eigen::Infinity>();
        if (residual > opts_.roundtrip_tol * scale) {
            throw Error(ErrorCode::RoundTripFailure,
                        "inverse_step residual " + std::to_string(residual) + " exceeds tolerance");
        }
        return x;
    }

    Kind kind_;
    DomainDescriptor domain_;
    SystemOptions opts_;
};

[[nodiscard]] inline Vector step(const DiscreteSystem& sys, const Vector& m) { return sys.step(m); }
[[nodiscard]] inline Vector inverse_step(const DiscreteSystem& sys, const Vector& m) { return sys.inverse_step(m); }

/// Applies phi^t (t may be negative) to m.
[[nodiscard]] inline Vector iterate(const DiscreteSystem& sys, Vector m, long t) {
    for (long s = 0; s < t; ++s) m = sys.step(m);
    for (long s = 0; s < -t; ++s) m = sys.inverse_step(m);
    return m;
}

/// Orbit segment m_{t0}, m_{t0+1}, ... with m_{k+1} = phi(m_k).
struct Trajectory {
    std::vector<Vector> points;
    long t0 = 0;
    double time_step = 1.0;

    [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
    [[nodiscard]] const Vector& operator[](std::size_t k) const { return points[k]; }
    [[nodiscard]] double time(std::size_t k) const noexcept {
        return static_cast<double>(t0 + static_cast<long>(k)) * time_step;
    }
};

[[nodiscard]] inline Trajectory trajectory(const DiscreteSystem& sys, const Vector& m0, std::size_t n_steps) {
    if (n_steps < 1) throw Error(ErrorCode::InvalidArgument, "trajectory needs n_steps >= 1");
    Trajectory traj;
    traj.time_step = sys.time_step();
    traj.points.reserve(n_steps + 1);
    traj.points.push_back(sys.is_torus() ? Vector(m0.unaryExpr([](double x) { return wrap_unit(x); })) : m0);
    for (std::size_t k = 0; k < n_steps; ++k) {
        try {
            traj.points.push_back(sys.step(traj.points.back()));
        } catch (const Error& e) {
            throw Error(e.code(), std::string("trajectory step ") + std::to_string(k) + ": " + e.message(), k);
        }
    }
    return traj;
}

/// Rows are omega(phi^{-k}(m)), k = 0 .. length-1 (most recent first).
[[nodiscard]] inline Matrix delay_window(const DiscreteSystem& sys, const ObservationMap& omega, const Vector& m,
                                         std::size_t length) {
    if (length < 1) throw Error(ErrorCode::InvalidArgument, "delay window needs length >= 1");
    Matrix out(static_cast<Eigen::Index>(length), omega.obs_dim());
    Vector p = m;
    for (std::size_t k = 0; k < length; ++k) {
        if (k > 0) p = sys.inverse_step(p);
        out.row(static_cast<Eigen::Index>(k)) = omega(p).transpose();
    }
    return out;
}

/// Max entrywise discrepancy between the t-shifted delay sequence of m and the
/// delay sequence of phi^t(m) over the lags 0, -1, ..., -(window-1).
[[nodiscard]] inline double check_equivariance(const DiscreteSystem& sys, const ObservationMap& omega,
                                               const Vector& m, long t, std::size_t window) {
    if (window < 1) throw Error(ErrorCode::InvalidArgument, "equivariance window must be >= 1");
    if (t == 0) return 0.0;
    const long w = static_cast<long>(window);

    // Shifted sequence: omega(phi^s(m)) for s = t, t-1, ..., t-w+1, walking the orbit of m.
    std::vector<Vector> shifted(window);
    {
        const long s_min = t - w + 1;
        Vector p = iterate(sys, m, s_min);
        for (long s = s_min; s <= t; ++s) {
            if (s > s_min) p = sys.step(p);
            shifted[static_cast<std::size_t>(t - s)] = omega(p);
        }
    }
    const Matrix direct = delay_window(sys, omega, iterate(sys, m, t), window);

    double worst = 0.0;
    for (std::size_t k = 0; k < window; ++k) {
        const double e = (direct.row(static_cast<Eigen::Index>(k)).transpose() - shifted[k]).lpNorm<Eigen::Infinity>();
        worst = std::max(worst, e);
    }
    return worst;
}

struct TangentNorms {
    double forward = 0.0;  // sup ||T phi||
    double inverse = 0.0;  // sup ||T phi^{-1}||
    std::size_t samples = 0;
};

/// Sampled suprema of the tangent-map operator norms.
[[nodiscard]] inline TangentNorms tangent_norm_bounds(const DiscreteSystem& sys, std::span<const Vector> samples) {
    if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "tangent_norm_bounds needs samples");
    TangentNorms out;
    out.samples = samples.size();
    for (const auto& m : samples) {
        const double fwd = operator_norm(sys.jacobian(m));
        const double inv = operator_norm(sys.inverse_jacobian(m));
        if (!std::isfinite(fwd) || !std::isfinite(inv)) {
            throw Error(ErrorCode::NonFinite, "degenerate tangent map evaluation");
        }
        out.forward = std::max(out.forward, fwd);
        out.inverse = std::max(out.inverse, inv);
    }
    return out;
}

}  // namespace gsync
