#pragma once

// Invariant-region verification, absorbing-set construction for state
// contractions, and certificates for the existence (L_Fx < 1) and
// differentiability (L_Fx < min{1, 1/||T phi^-1||}) conditions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gsync/dynsys.hpp"
#include "gsync/error.hpp"
#include "gsync/interval.hpp"
#include "gsync/io.hpp"
#include "gsync/observation.hpp"
#include "gsync/region.hpp"
#include "gsync/statemaps.hpp"

namespace gsync {

struct InvarianceOptions {
    std::size_t per_axis = 20;
    std::size_t input_samples = 200;
    std::size_t max_evaluations = 200000;
};

struct InvarianceCheck {
    bool ok = false;
    double margin = 0.0;
    bool exact = false;  // verdict taken from the exact interval image
    bool sampled_ok = false;
    double sampled_margin = 0.0;
    std::optional<double> exact_margin;
    std::size_t evaluations = 0;
};

/// Exact componentwise image of a box under F over an input box, for the
/// built-in maps (each output coordinate is a monotone function of a sum of
/// single-variable terms, so per-coordinate ranges are attained).
[[nodiscard]] inline std::optional<std::vector<Interval>> exact_image(const StateMap& F, const std::vector<Interval>& box,
                                                                      const InputRange& range) {
    return std::visit(
        [&](const auto& k) -> std::optional<std::vector<Interval>> {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, PowerSineMap>) {
                if (k.branch == PowerBranch::PositiveOnly) {
                    for (const auto& iv : box) {
                        if (iv.lo <= 0.0) throw Error(ErrorCode::DomainViolation, "power-sine box must be positive");
                    }
                }
                const Interval kz = scale(Interval{range.lo(0), range.hi(0)}, k.k);
                const Interval trig[3] = {sin_range(kz), cos_range(kz), sin_squared_range(kz)};
                std::vector<Interval> img;
                for (std::size_t i = 0; i < 3; ++i) img.push_back(odd_pow_range(box[i], k.alpha) + scale(trig[i], k.lambda));
                return img;
            } else if constexpr (std::is_same_v<K, LinearDelayMap>) {
                std::vector<Interval> img;
                img.push_back({range.lo(0), range.hi(0)});
                for (std::size_t i = 0; i + 1 < box.size(); ++i) img.push_back(box[i]);
                return img;
            } else if constexpr (std::is_same_v<K, EsnMap>) {
                std::vector<Interval> img;
                for (Eigen::Index i = 0; i < k.A.rows(); ++i) {
                    Interval p{k.zeta(i), k.zeta(i)};
                    for (Eigen::Index j = 0; j < k.A.cols(); ++j) p = p + scale(box[static_cast<std::size_t>(j)], k.A(i, j));
                    for (Eigen::Index j = 0; j < k.C.cols(); ++j) p = p + scale(Interval{range.lo(j), range.hi(j)}, k.C(i, j));
                    img.push_back({detail::squash(k.sigma, p.lo).value, detail::squash(k.sigma, p.hi).value});
                }
                return img;
            } else {
                return std::nullopt;
            }
        },
        F.kind());
}

[[nodiscard]] inline InvarianceCheck check_invariance(const StateMap& F, const InvariantRegion& region,
                                                      const InputRange& range, const InvarianceOptions& opts = {}) {
    if (opts.per_axis < 2) throw Error(ErrorCode::InvalidArgument, "invariance check needs resolution >= 2");
    require_dim(region.dim(), F.state_dim(), "check_invariance region");
    require_dim(range.dim(), F.input_dim(), "check_invariance input range");

    InvarianceCheck out;
    const auto xs = region.sample(opts.per_axis);
    const auto zs = sample_inputs(range, std::max<std::size_t>(1, opts.input_samples));
    const std::size_t per_x = std::clamp<std::size_t>(opts.max_evaluations / xs.size(), 1, zs.size());
    const std::size_t stride = zs.size() / per_x;
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t j = 0; j < per_x; ++j) {
            const Vector img = F.eval(xs[i], zs[(i + j * stride) % zs.size()]);
            margin = std::min(margin, region.margin(img));
            ++out.evaluations;
        }
    }
    out.sampled_margin = margin;
    out.sampled_ok = margin >= 0.0;
    out.ok = out.sampled_ok;
    out.margin = out.sampled_margin;

    if (region.kind() == InvariantRegion::Kind::AxisBox) {
        const auto box = region.intervals();
        if (auto img = exact_image(F, box, range)) {
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < box.size(); ++i) {
                m = std::min({m, (*img)[i].lo - box[i].lo, box[i].hi - (*img)[i].hi});
            }
            out.exact_margin = m;
            out.exact = true;
            out.ok = m >= 0.0;
            out.margin = m;
        }
    }
    return out;
}

struct AbsorbingSetOptions {
    double safety = 1.05;
    std::size_t input_samples = 200;
    double degenerate_radius = 1e-9;
    LipschitzOptions lipschitz;
};

/// W = D_N intersected with the closed ball about v of radius safety * r / (1 - c),
/// r = sup_z |F(v, z) - v|, c = L_Fx on D_N.
[[nodiscard]] inline InvariantRegion absorbing_set(const StateMap& F, const InvariantRegion& domain, const InputRange& range,
                                                   const Vector& v, const AbsorbingSetOptions& opts = {}) {
    if (!(opts.safety > 1.0)) throw Error(ErrorCode::InvalidArgument, "absorbing set safety factor must exceed 1");
    if (!domain.contains(v)) throw Error(ErrorCode::InvalidArgument, "absorbing set anchor must lie in the domain");
    const double c = lipschitz_bounds(F, domain, range, opts.lipschitz).L_Fx();
    if (!(c < 1.0)) {
        throw Error(ErrorCode::NotAContraction, "L_Fx = " + format_number(c) + " is not below 1 on " + domain.label());
    }
    double r = 0.0;
    for (const auto& z : sample_inputs(range, std::max<std::size_t>(1, opts.input_samples))) {
        r = std::max(r, (F.eval(v, z) - v).norm());
    }
    const double radius = r > 0.0 ? opts.safety * r / (1.0 - c) : opts.degenerate_radius;
    InvariantRegion out = [&] {
        if (domain.kind() == InvariantRegion::Kind::AxisBox && domain.margin(v) >= radius) {
            return InvariantRegion::ball(v, radius);
        }
        return domain.intersected_with(Ball{v, radius});
    }();
    out.set_label((domain.label().empty() ? std::string("W") : domain.label()) + "_absorbing");
    return out;
}

struct CertifyOptions {
    LipschitzOptions lipschitz;
    InvarianceOptions invariance;
    double r_factor = 1.05;     // R = r_factor * its lower bound
    double delta_factor = 0.5;  // delta_0 = delta_factor * its upper bound
};

struct ContractionCertificate {
    std::string label;
    std::string system;
    std::string state_map;
    InputRange input_range;
    LipschitzBounds bounds;
    TangentNorms tangent;
    bool tangent_exact = false;
    DerivativeNorm domega;
    InvarianceCheck invariance;
    bool esp_ok = false;
    bool diff_ok = false;
    double R_lower = std::numeric_limits<double>::quiet_NaN();
    double R = std::numeric_limits<double>::quiet_NaN();
    double delta0_bound = std::numeric_limits<double>::quiet_NaN();
    double delta0 = std::numeric_limits<double>::quiet_NaN();
    double c0 = std::numeric_limits<double>::quiet_NaN();
    std::size_t samples = 0;

    [[nodiscard]] double L_Fx() const noexcept { return bounds.L_Fx(); }
    [[nodiscard]] double tangent_inv_norm() const noexcept { return tangent.inverse; }
    /// Some constant is a sampled supremum rather than an exact bound.
    [[nodiscard]] bool sampled() const noexcept {
        return !bounds.exact() || !tangent_exact || !domega.exact || !invariance.exact;
    }
};

[[nodiscard]] inline ContractionCertificate certify(const StateMap& F, const InvariantRegion& region,
                                                    const DiscreteSystem& sys, const ObservationMap& omega,
                                                    std::span<const Vector> attractor_samples,
                                                    const CertifyOptions& opts = {}) {
    if (attractor_samples.empty()) throw Error(ErrorCode::InvalidArgument, "certify needs attractor samples");
    ContractionCertificate cert;
    cert.label = region.label();
    cert.system = sys.name();
    cert.state_map = F.name();
    cert.samples = attractor_samples.size();
    cert.input_range = observed_range(omega, attractor_samples);
    cert.bounds = lipschitz_bounds(F, region, cert.input_range, opts.lipschitz);
    cert.tangent = tangent_norm_bounds(sys, attractor_samples);
    cert.tangent_exact = !sys.is_flow() && !std::holds_alternative<CustomMap>(sys.kind());
    cert.domega = omega.derivative_sup_norm(attractor_samples);
    cert.invariance = check_invariance(F, region, cert.input_range, opts.invariance);

    const double lfx = cert.bounds.L_Fx();
    const double tau = cert.tangent.inverse;
    cert.esp_ok = lfx < 1.0;
    cert.diff_ok = lfx < std::min(1.0, 1.0 / tau);

    if (cert.diff_ok) {
        const double dw = cert.domega.value;
        cert.R_lower = cert.bounds.L_Fz() * dw / (1.0 - lfx * tau);
        cert.R = cert.R_lower > 0.0 ? opts.r_factor * cert.R_lower : 1.0;
        const double denom = cert.bounds.L_Fxx() * tau * cert.R + cert.bounds.L_Fxz() * dw;
        cert.delta0_bound = denom > 0.0 ? (1.0 - lfx) / denom : std::numeric_limits<double>::infinity();
        cert.delta0 = denom > 0.0 ? opts.delta_factor * cert.delta0_bound : 1.0;
        cert.c0 = std::max(lfx * tau, lfx + cert.delta0 * denom);
    }
    return cert;
}

/// key: value report.
inline void write_report(std::ostream& os, const ContractionCertificate& c) {
    const auto line = [&](const std::string& k, const std::string& v) { os << k << ": " << v << '\n'; };
    const auto b = [](bool x) { return std::string(x ? "true" : "false"); };
    const auto opt = [](const std::optional<double>& x) { return x ? format_number(*x) : std::string("none"); };
    line("region", c.label);
    line("system", c.system);
    line("state_map", c.state_map);
    line("attractor_samples", std::to_string(c.samples));
    line("input_range", format_vector(c.input_range.lo) + " .. " + format_vector(c.input_range.hi));
    line("L_Fx", format_number(c.bounds.L_Fx()));
    line("L_Fx_analytic", opt(c.bounds.fx.analytic));
    line("L_Fx_grid", format_number(c.bounds.fx.grid));
    line("L_Fz", format_number(c.bounds.L_Fz()));
    line("L_Fz_analytic", opt(c.bounds.fz.analytic));
    line("L_Fz_grid", format_number(c.bounds.fz.grid));
    line("L_Fxx", format_number(c.bounds.L_Fxx()));
    line("L_Fxz", format_number(c.bounds.L_Fxz()));
    line("grid_per_axis", std::to_string(c.bounds.per_axis));
    line("grid_input_samples", std::to_string(c.bounds.input_samples));
    line("tangent_norm", format_number(c.tangent.forward));
    line("tangent_inv_norm", format_number(c.tangent.inverse));
    line("tangent_exact", b(c.tangent_exact));
    line("domega_norm", format_number(c.domega.value));
    line("domega_exact", b(c.domega.exact));
    line("invariance_ok", b(c.invariance.ok));
    line("invariance_margin", format_number(c.invariance.margin));
    line("invariance_exact", b(c.invariance.exact));
    line("invariance_sampled_margin", format_number(c.invariance.sampled_margin));
    line("esp_ok", b(c.esp_ok));
    line("diff_ok", b(c.diff_ok));
    line("R_lower", format_number(c.R_lower));
    line("R", format_number(c.R));
    line("delta0_bound", format_number(c.delta0_bound));
    line("delta0", format_number(c.delta0));
    line("c0", format_number(c.c0));
    line("sampled", b(c.sampled()));
}

[[nodiscard]] inline std::string certificate_csv_header() {
    return "region,L_Fx,L_Fz,L_Fxx,L_Fxz,tangent_inv_norm,domega_norm,invariance_ok,invariance_margin,esp_ok,diff_ok,R,"
           "delta0,c0,sampled";
}

[[nodiscard]] inline std::string certificate_csv_row(const ContractionCertificate& c) {
    std::ostringstream os;
    const auto b = [](bool x) { return x ? "1" : "0"; };
    os << c.label << ',' << format_number(c.bounds.L_Fx()) << ',' << format_number(c.bounds.L_Fz()) << ','
       << format_number(c.bounds.L_Fxx()) << ',' << format_number(c.bounds.L_Fxz()) << ','
       << format_number(c.tangent.inverse) << ',' << format_number(c.domega.value) << ',' << b(c.invariance.ok) << ','
       << format_number(c.invariance.margin) << ',' << b(c.esp_ok) << ',' << b(c.diff_ok) << ','
       << format_number(c.R) << ',' << format_number(c.delta0) << ',' << format_number(c.c0) << ','
       << b(c.sampled());
    return os.str();
}

}  // namespace gsync
