#pragma once

// Generalized synchronizations f : M -> R^N sampled along a trajectory of the
// driving system, built either by driving F with the observations (and
// discarding a washout) or by iterating Psi(f)(m) = F(f(phi^{-1}(m)), omega(m))
// on the trajectory points.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsync/contraction.hpp"
#include "gsync/dynsys.hpp"
#include "gsync/error.hpp"
#include "gsync/io.hpp"
#include "gsync/observation.hpp"
#include "gsync/region.hpp"
#include "gsync/statemaps.hpp"

namespace gsync {

enum class GsMethod { Drive, PsiIterate };

[[nodiscard]] inline std::string to_string(GsMethod m) { return m == GsMethod::Drive ? "drive" : "psi"; }

struct ResidualStats {
    double max = 0.0;
    double mean = 0.0;
};

struct PsiInfo {
    std::size_t iterations = 0;     // Psi applications performed
    std::size_t settled_after = 0;  // first iterate whose successor moved by <= tol
    bool converged = false;
    double tol = 0.0;
    double first_change = 0.0;  // |f_1 - f_0|_inf
    double final_change = 0.0;  // |f_n - f_{n-1}|_inf
    std::optional<double> contraction;
    double apriori_bound = std::numeric_limits<double>::quiet_NaN();  // c^n / (1 - c) |f_1 - f_0|_inf
    std::optional<std::size_t> predicted_iterations;                   // Banach estimate for reaching tol
    std::vector<double> changes;                                        // sup-change per sweep
};

struct SampledGS {
    std::shared_ptr<const Trajectory> base;
    std::size_t first_index = 0;  // base index of values[0]
    Vector anchor;                // f at base index first_index - 1
    std::vector<Vector> values;
    GsMethod method = GsMethod::Drive;
    std::size_t washout = 0;
    Vector x0;
    std::string region_label;
    ResidualStats residual;
    std::optional<PsiInfo> psi;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] std::size_t base_index(std::size_t i) const noexcept { return first_index + i; }
    [[nodiscard]] const Vector& point(std::size_t i) const { return (*base)[first_index + i]; }
};

/// Per-row |f(m_t) - F(f(m_{t-1}), omega(m_t))|, using the anchor for the first row.
[[nodiscard]] inline std::vector<double> residual_series(const SampledGS& gs, const StateMap& F, const ObservationMap& omega) {
    std::vector<double> out;
    out.reserve(gs.size());
    for (std::size_t i = 0; i < gs.size(); ++i) {
        const Vector& prev = i == 0 ? gs.anchor : gs.values[i - 1];
        out.push_back((gs.values[i] - F.eval(prev, omega(gs.point(i)))).norm());
    }
    return out;
}

[[nodiscard]] inline ResidualStats recursion_residual(const SampledGS& gs, const StateMap& F, const ObservationMap& omega) {
    if (gs.size() < 2) throw Error(ErrorCode::InvalidArgument, "recursion residual needs at least two points");
    ResidualStats s;
    const auto r = residual_series(gs, F, omega);
    for (double x : r) {
        s.max = std::max(s.max, x);
        s.mean += x;
    }
    s.mean /= static_cast<double>(r.size());
    return s;
}

namespace detail {
inline void check_region(const SampledGS& gs, const std::optional<InvariantRegion>& region) {
    if (!region) return;
    for (std::size_t i = 0; i < gs.size(); ++i) {
        if (!region->contains(gs.values[i])) {
            throw Error(ErrorCode::RegionEscape,
                        "state left region " + region->label() + " at trajectory index " + std::to_string(gs.base_index(i)),
                        gs.base_index(i));
        }
    }
}
}  // namespace detail

/// Iterates x_k = F(x_{k-1}, omega(m_k)) from x_0 = x0 along the trajectory and
/// records k = washout+1 .. end.
[[nodiscard]] inline SampledGS drive_gs(const StateMap& F, std::shared_ptr<const Trajectory> base, const ObservationMap& omega,
                                        const Vector& x0, std::size_t washout,
                                        const std::optional<InvariantRegion>& region = std::nullopt) {
    require_dim(x0.size(), F.state_dim(), "drive_gs initial state");
    if (!base || base->size() < washout + 2) {
        throw Error(ErrorCode::InvalidArgument, "trajectory too short for the requested washout");
    }
    if (region && !region->contains(x0)) {
        throw Error(ErrorCode::InvalidArgument, "initial state is outside region " + region->label());
    }
    SampledGS gs;
    gs.method = GsMethod::Drive;
    gs.washout = washout;
    gs.x0 = x0;
    gs.first_index = washout + 1;
    gs.region_label = region ? region->label() : std::string();
    gs.values.reserve(base->size() - gs.first_index);

    Vector x = x0;
    for (std::size_t k = 1; k < base->size(); ++k) {
        if (k == gs.first_index) gs.anchor = x;
        x = F.eval(x, omega((*base)[k]));
        if (!x.allFinite()) throw Error(ErrorCode::NonFinite, "driven state diverged", k);
        if (k >= gs.first_index) gs.values.push_back(x);
    }
    gs.base = std::move(base);
    detail::check_region(gs, region);
    gs.residual = recursion_residual(gs, F, omega);
    return gs;
}

[[nodiscard]] inline SampledGS drive_gs(const StateMap& F, const DiscreteSystem& sys, const ObservationMap& omega,
                                        const Vector& m0, const Vector& x0, std::size_t washout, std::size_t record,
                                        const std::optional<InvariantRegion>& region = std::nullopt) {
    if (record < 1) throw Error(ErrorCode::InvalidArgument, "drive_gs needs record >= 1");
    auto base = std::make_shared<const Trajectory>(trajectory(sys, m0, washout + record));
    return drive_gs(F, std::move(base), omega, x0, washout, region);
}

struct PsiOptions {
    double tol = 1e-12;
    std::size_t max_iters = 10000;
    std::size_t washout = 0;                 // recorded values start at washout + 1
    std::optional<double> contraction;       // L_Fx, for the a-priori error bound
    std::optional<InvariantRegion> region;
};

/// Fixed-point iteration of Psi on the trajectory points. phi^{-1}(m_k) is the
/// stored m_{k-1}; the value of f at the predecessor of m_0 is held at f0.
/// Each sweep reads only the previous iterate. On hitting max_iters the
/// partial result is returned with psi->converged == false.
[[nodiscard]] inline SampledGS psi_iterate_gs(const StateMap& F, std::shared_ptr<const Trajectory> base,
                                              const ObservationMap& omega, const Vector& f0, const PsiOptions& opts = {}) {
    require_dim(f0.size(), F.state_dim(), "psi_iterate_gs initial function");
    if (!base || base->size() < 2) throw Error(ErrorCode::InvalidArgument, "psi iteration needs at least two points");
    if (base->size() < opts.washout + 2) throw Error(ErrorCode::InvalidArgument, "trajectory too short for washout");
    if (opts.region && !opts.region->contains(f0)) {
        throw Error(ErrorCode::InvalidArgument, "constant initial function is outside region " + opts.region->label());
    }

    const std::size_t n = base->size();
    std::vector<Vector> obs;
    obs.reserve(n);
    for (const auto& m : base->points) obs.push_back(omega(m));

    std::vector<Vector> f(n, f0);
    std::vector<Vector> next(n, f0);
    PsiInfo info;
    info.tol = opts.tol;
    info.contraction = opts.contraction;

    for (std::size_t it = 1; it <= opts.max_iters; ++it) {
        double change = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            next[k] = F.eval(k == 0 ? f0 : f[k - 1], obs[k]);
            change = std::max(change, (next[k] - f[k]).norm());
        }
        if (!std::isfinite(change)) throw Error(ErrorCode::NonFinite, "psi iteration diverged", it);
        f.swap(next);
        info.iterations = it;
        info.changes.push_back(change);
        if (it == 1) info.first_change = change;
        info.final_change = change;
        if (change <= opts.tol) {
            info.converged = true;
            info.settled_after = it - 1;
            break;
        }
    }

    if (opts.contraction && *opts.contraction < 1.0) {
        const double c = *opts.contraction;
        info.apriori_bound = std::pow(c, static_cast<double>(info.iterations)) / (1.0 - c) * info.first_change;
        if (info.first_change > 0.0 && c > 0.0) {
            const double est = std::log(opts.tol * (1.0 - c) / info.first_change) / std::log(c);
            info.predicted_iterations = static_cast<std::size_t>(std::max(1.0, std::ceil(est)));
        } else {
            info.predicted_iterations = 1;
        }
    }

    SampledGS gs;
    gs.method = GsMethod::PsiIterate;
    gs.washout = opts.washout;
    gs.x0 = f0;
    gs.first_index = opts.washout + 1;
    gs.anchor = f[opts.washout];
    gs.values.assign(f.begin() + static_cast<std::ptrdiff_t>(gs.first_index), f.end());
    gs.region_label = opts.region ? opts.region->label() : std::string();
    gs.base = std::move(base);
    gs.psi = std::move(info);
    detail::check_region(gs, opts.region);
    gs.residual = recursion_residual(gs, F, omega);
    return gs;
}

[[nodiscard]] inline SampledGS psi_iterate_gs(const StateMap& F, const DiscreteSystem& sys, const ObservationMap& omega,
                                              const Trajectory& base, const Vector& f0, const PsiOptions& opts = {}) {
    if (base.time_step != sys.time_step()) {
        throw Error(ErrorCode::InvalidArgument, "trajectory was not produced by this system");
    }
    return psi_iterate_gs(F, std::make_shared<const Trajectory>(base), omega, f0, opts);
}

namespace detail {
struct Overlap {
    std::size_t begin;
    std::size_t end;  // exclusive, base indices
};

[[nodiscard]] inline Overlap overlap(const SampledGS& a, const SampledGS& b) {
    const bool same_base = a.base == b.base ||
                           (a.base && b.base && a.base->size() == b.base->size() && a.base->points == b.base->points);
    if (!same_base) throw Error(ErrorCode::DisjointRanges, "synchronizations are sampled on different trajectories");
    const std::size_t begin = std::max(a.first_index, b.first_index);
    const std::size_t end = std::min(a.first_index + a.size(), b.first_index + b.size());
    if (begin >= end) throw Error(ErrorCode::DisjointRanges, "recorded index ranges do not overlap");
    return {begin, end};
}
}  // namespace detail

/// sup over shared indices of |a - b|.
[[nodiscard]] inline double compare_gs(const SampledGS& a, const SampledGS& b) {
    const auto ov = detail::overlap(a, b);
    double d = 0.0;
    for (std::size_t k = ov.begin; k < ov.end; ++k) {
        d = std::max(d, (a.values[k - a.first_index] - b.values[k - b.first_index]).norm());
    }
    return d;
}

/// inf over shared indices of |a - b|.
[[nodiscard]] inline double separation(const SampledGS& a, const SampledGS& b) {
    const auto ov = detail::overlap(a, b);
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t k = ov.begin; k < ov.end; ++k) {
        d = std::min(d, (a.values[k - a.first_index] - b.values[k - b.first_index]).norm());
    }
    return d;
}

struct SweepEntry {
    InvariantRegion region;
    InvarianceCheck invariance;
    std::optional<SampledGS> gs;
    std::optional<std::string> error;
};

struct SweepResult {
    std::shared_ptr<const Trajectory> base;
    std::vector<SweepEntry> entries;
    Matrix separations;  // pairwise inf-distance, NaN where a construction failed
    double min_separation = std::numeric_limits<double>::infinity();
    std::size_t distinct = 0;  // lower bound on the echo index
    std::size_t escapes = 0;   // RegionEscape events
};

struct SweepOptions {
    InvarianceOptions invariance;
    double distinct_tol = 1e-8;  // sup-distance below which two GSs are the same
};

/// One drive construction per region (x0 = region center) on a shared
/// trajectory; failures are recorded per entry and the sweep continues.
[[nodiscard]] inline SweepResult multistability_sweep(const StateMap& F, const std::vector<InvariantRegion>& regions,
                                                      const DiscreteSystem& sys, const ObservationMap& omega, const Vector& m0,
                                                      std::size_t washout, std::size_t record, const SweepOptions& opts = {}) {
    SweepResult out;
    out.base = std::make_shared<const Trajectory>(trajectory(sys, m0, washout + record));
    const InputRange range = observed_range(omega, out.base->points);

    for (const auto& region : regions) {
        SweepEntry e{region, {}, std::nullopt, std::nullopt};
        try {
            e.invariance = check_invariance(F, region, range, opts.invariance);
            if (!e.invariance.ok) {
                e.error = "region " + region.label() + " is not invariant (margin " + format_number(e.invariance.margin) + ")";
            } else {
                e.gs = drive_gs(F, out.base, omega, region.center(), washout, region);
            }
        } catch (const Error& err) {
            if (err.code() == ErrorCode::RegionEscape) ++out.escapes;
            e.error = err.what();
        }
        out.entries.push_back(std::move(e));
    }

    const auto k = static_cast<Eigen::Index>(out.entries.size());
    out.separations = Matrix::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
    std::vector<const SampledGS*> reps;
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto& gi = out.entries[static_cast<std::size_t>(i)].gs;
        if (!gi) continue;
        out.separations(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < k; ++j) {
            const auto& gj = out.entries[static_cast<std::size_t>(j)].gs;
            if (!gj) continue;
            const double s = separation(*gi, *gj);
            out.separations(i, j) = out.separations(j, i) = s;
            out.min_separation = std::min(out.min_separation, s);
        }
        const bool seen = std::any_of(reps.begin(), reps.end(),
                                      [&](const SampledGS* r) { return compare_gs(*r, *gi) <= opts.distinct_tol; });
        if (!seen) reps.push_back(&*gi);
    }
    out.distinct = reps.size();
    return out;
}

/// CSV: t, phase coordinates, GS coordinates, per-row recursion residual.
[[nodiscard]] inline CsvTable gs_table(const SampledGS& gs, const StateMap& F, const ObservationMap& omega,
                                       const std::vector<std::string>& phase_names = {}) {
    std::vector<std::string> cols{"t"};
    const auto n_phase = gs.base->points.front().size();
    for (Eigen::Index i = 0; i < n_phase; ++i) {
        cols.push_back(static_cast<std::size_t>(i) < phase_names.size() ? phase_names[static_cast<std::size_t>(i)]
                                                                          : "m" + std::to_string(i + 1));
    }
    for (Eigen::Index i = 0; i < F.state_dim(); ++i) cols.push_back("x" + std::to_string(i + 1));
    cols.push_back("residual");

    CsvTable table(cols);
    table.meta("method", to_string(gs.method));
    table.meta("region", gs.region_label);
    table.meta("washout", std::to_string(gs.washout));
    table.meta("x0", format_vector(gs.x0));
    table.meta("first_index", std::to_string(gs.first_index));
    table.meta("residual_max", format_number(gs.residual.max));
    table.meta("residual_mean", format_number(gs.residual.mean));
    if (gs.psi) {
        table.meta("psi_iterations", std::to_string(gs.psi->iterations));
        table.meta("psi_converged", gs.psi->converged ? "true" : "false");
        table.meta("psi_final_change", format_number(gs.psi->final_change));
        table.meta("psi_apriori_bound", format_number(gs.psi->apriori_bound));
    }
    const auto res = residual_series(gs, F, omega);
    for (std::size_t i = 0; i < gs.size(); ++i) {
        std::vector<double> row{gs.base->time(gs.base_index(i))};
        for (Eigen::Index j = 0; j < n_phase; ++j) row.push_back(gs.point(i)(j));
        for (Eigen::Index j = 0; j < gs.values[i].size(); ++j) row.push_back(gs.values[i](j));
        row.push_back(res[i]);
        table.row(row);
    }
    return table;
}

}  // namespace gsync
