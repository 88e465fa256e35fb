#pragma once

// Empirical checks of the echo state property, input forgetting and the
// regularity of sampled synchronizations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsync/error.hpp"
#include "gsync/gs.hpp"
#include "gsync/linalg.hpp"
#include "gsync/observation.hpp"
#include "gsync/region.hpp"
#include "gsync/statemaps.hpp"

namespace gsync {

/// Strictly decreasing weights w_0 = 1 > w_1 > ... with limit 0.
class WeightingSequence {
public:
    [[nodiscard]] static WeightingSequence geometric(double ratio) {
        if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidArgument, "geometric ratio must lie in (0, 1)");
        WeightingSequence w;
        w.ratio_ = ratio;
        return w;
    }

    /// Finite prefix of a weighting sequence; lags beyond it are not defined.
    [[nodiscard]] static WeightingSequence custom(std::vector<double> weights) {
        if (weights.empty() || weights.front() != 1.0) throw Error(ErrorCode::InvalidArgument, "weights must start with w_0 = 1");
        for (std::size_t i = 1; i < weights.size(); ++i) {
            if (!(weights[i] < weights[i - 1]) || !(weights[i] >= 0.0)) {
                throw Error(ErrorCode::InvalidArgument, "weights must be nonnegative and strictly decreasing");
            }
        }
        WeightingSequence w;
        w.custom_ = std::move(weights);
        return w;
    }

    [[nodiscard]] bool is_geometric() const noexcept { return custom_.empty(); }
    [[nodiscard]] double ratio() const noexcept { return ratio_; }
    /// Number of defined lags (unbounded for geometric sequences).
    [[nodiscard]] std::size_t length() const noexcept {
        return custom_.empty() ? std::numeric_limits<std::size_t>::max() : custom_.size();
    }

    [[nodiscard]] double operator()(std::size_t lag) const {
        if (custom_.empty()) return std::pow(ratio_, static_cast<double>(lag));
        if (lag >= custom_.size()) throw Error(ErrorCode::LengthMismatch, "window longer than the custom weighting sequence");
        return custom_[lag];
    }

private:
    WeightingSequence() = default;
    double ratio_ = 0.5;
    std::vector<double> custom_;
};

/// sup_t |a_t - b_t| w_t over a finite window, index 0 = most recent.
[[nodiscard]] inline double weighted_distance(std::span<const Vector> a, std::span<const Vector> b, const WeightingSequence& w) {
    if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "windows differ in length");
    double d = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        require_dim(b[t].size(), a[t].size(), "weighted_distance entry");
        d = std::max(d, (a[t] - b[t]).norm() * w(t));
    }
    return d;
}

/// d_t = |x_t^a - x_t^b| for t = 0 .. inputs.size(), both runs driven by the same inputs.
[[nodiscard]] inline std::vector<double> esp_convergence(const StateMap& F, std::span<const Vector> inputs, const Vector& x0a,
                                                         const Vector& x0b) {
    require_dim(x0a.size(), F.state_dim(), "esp_convergence state");
    require_dim(x0b.size(), F.state_dim(), "esp_convergence state");
    std::vector<double> d;
    d.reserve(inputs.size() + 1);
    Vector a = x0a;
    Vector b = x0b;
    d.push_back((a - b).norm());
    for (const auto& z : inputs) {
        a = F.eval(a, z);
        b = F.eval(b, z);
        d.push_back((a - b).norm());
    }
    return d;
}

/// Largest d_{t+1} / d_t over steps with d_t above `floor`; 0 when there are none.
/// Below about 1e-13 the distance between states of order one is a handful of
/// ulps and the ratio measures rounding rather than the map.
[[nodiscard]] inline double max_contraction_ratio(std::span<const double> d, double floor = 1e-13) {
    double r = 0.0;
    for (std::size_t t = 0; t + 1 < d.size(); ++t) {
        if (d[t] > floor) r = std::max(r, d[t + 1] / d[t]);
    }
    return r;
}

struct ForgettingOptions {
    std::uint64_t seed = 1;
    std::size_t prefix_length = 50;  // independent inputs before the shared suffix
    std::optional<double> contraction;  // L_Fx on the region; estimated when absent
    LipschitzOptions lipschitz;
};

struct ForgettingResult {
    std::size_t k = 0;
    std::size_t trials = 0;
    double max_distance = 0.0;
    double L_Fx = 0.0;
    double diameter = 0.0;
    double bound = 0.0;  // L_Fx^k diam + 1e-12
    std::vector<double> distances;

    [[nodiscard]] bool within_bound() const noexcept { return max_distance <= bound; }
};

/// Two runs per trial from independent random states in the region, each fed
/// its own random prefix and then a common random suffix of length k.
[[nodiscard]] inline ForgettingResult input_forgetting(const StateMap& F, const InvariantRegion& region, const InputRange& range,
                                                       std::size_t k, std::size_t trials, const ForgettingOptions& opts = {}) {
    require_dim(region.dim(), F.state_dim(), "input_forgetting region");
    require_dim(range.dim(), F.input_dim(), "input_forgetting input range");
    if (trials == 0) throw Error(ErrorCode::InvalidArgument, "input_forgetting needs at least one trial");

    ForgettingResult out;
    out.k = k;
    out.trials = trials;
    out.L_Fx = opts.contraction ? *opts.contraction : lipschitz_bounds(F, region, range, opts.lipschitz).L_Fx();
    out.diameter = region.diameter();
    out.bound = std::pow(out.L_Fx, static_cast<double>(k)) * out.diameter + 1e-12;

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const AxisBox bb = region.bounding_box();
    const auto random_state = [&] {
        for (int attempt = 0; attempt < 10000; ++attempt) {
            Vector x(bb.lo.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = bb.lo(i) + unit(rng) * (bb.hi(i) - bb.lo(i));
            if (region.contains(x)) return x;
        }
        return region.center();
    };
    const auto random_input = [&] {
        Vector z(range.dim());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = range.lo(i) + unit(rng) * (range.hi(i) - range.lo(i));
        return z;
    };

    out.distances.reserve(trials);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Vector a = random_state();
        Vector b = random_state();
        for (std::size_t t = 0; t < opts.prefix_length; ++t) a = F.eval(a, random_input());
        for (std::size_t t = 0; t < opts.prefix_length; ++t) b = F.eval(b, random_input());
        for (std::size_t t = 0; t < k; ++t) {
            const Vector z = random_input();
            a = F.eval(a, z);
            b = F.eval(b, z);
        }
        const double d = (a - b).norm();
        if (!std::isfinite(d)) throw Error(ErrorCode::NonFinite, "input_forgetting state diverged", trial);
        out.distances.push_back(d);
        out.max_distance = std::max(out.max_distance, d);
    }
    return out;
}

// Regularity probes

struct PairOptions {
    std::size_t neighbors = 20;        // spatial nearest neighbors per point
    std::size_t min_separation = 10;   // temporal exclusion |i - j| >= this
    std::size_t pair_budget = 100000;  // keep at most this many closest pairs
};

struct SecantPair {
    std::size_t i = 0;
    std::size_t j = 0;
    double dm = 0.0;
    double df = 0.0;

    [[nodiscard]] double slope() const noexcept { return dm > 0.0 ? df / dm : 0.0; }
};

struct NeighborPairs {
    std::vector<SecantPair> pairs;  // sorted by dm
    double median_nn = 0.0;         // median distance to the nearest admissible neighbor
};

namespace detail {
[[nodiscard]] inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}
}  // namespace detail

/// Spatial k-nearest-neighbor pairs on the sampled base points, skipping
/// temporal neighbors. Brute force, O(n^2).
[[nodiscard]] inline NeighborPairs neighbor_pairs(const SampledGS& gs, const PairOptions& opts = {}) {
    const std::size_t n = gs.size();
    NeighborPairs out;
    std::vector<double> nn;
    std::vector<std::pair<double, std::size_t>> cand;
    std::vector<std::pair<std::size_t, std::size_t>> keys;
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t gap = i > j ? i - j : j - i;
            if (gap < std::max<std::size_t>(1, opts.min_separation)) continue;
            cand.emplace_back((gs.point(i) - gs.point(j)).norm(), j);
        }
        if (cand.empty()) continue;
        const std::size_t k = std::min(opts.neighbors, cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
        nn.push_back(cand.front().first);
        for (std::size_t r = 0; r < k; ++r) keys.emplace_back(std::min(i, cand[r].second), std::max(i, cand[r].second));
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    out.pairs.reserve(keys.size());
    for (const auto& [i, j] : keys) {
        out.pairs.push_back({i, j, (gs.point(i) - gs.point(j)).norm(), (gs.values[i] - gs.values[j]).norm()});
    }
    std::stable_sort(out.pairs.begin(), out.pairs.end(), [](const SecantPair& a, const SecantPair& b) { return a.dm < b.dm; });
    if (out.pairs.size() > opts.pair_budget) out.pairs.resize(opts.pair_budget);
    out.median_nn = detail::median(std::move(nn));
    return out;
}

struct SlopeBin {
    double dm_lo = 0.0;
    double dm_hi = 0.0;
    std::size_t count = 0;
    double median_slope = 0.0;
    double max_slope = 0.0;
};

struct DerivativeProfile {
    std::vector<SecantPair> pairs;
    std::vector<SlopeBin> bins;  // bins[0] has the smallest spacings
    double growth = 0.0;         // finest / coarsest median slope (1 when both vanish)
    double max_slope = 0.0;
};

struct ProfileOptions {
    PairOptions pairs;
    std::size_t bins = 5;               // equal-count bins over dm
    std::size_t min_finest_pairs = 50;
};

[[nodiscard]] inline DerivativeProfile derivative_profile(const SampledGS& gs, const ProfileOptions& opts = {}) {
    if (opts.bins == 0) throw Error(ErrorCode::InvalidArgument, "derivative_profile needs at least one bin");
    DerivativeProfile out;
    out.pairs = neighbor_pairs(gs, opts.pairs).pairs;
    const std::size_t total = out.pairs.size();
    const std::size_t finest = total / opts.bins;
    if (finest < opts.min_finest_pairs) {
        throw Error(ErrorCode::InsufficientPairs,
                    "finest bin has " + std::to_string(finest) + " pairs, need " + std::to_string(opts.min_finest_pairs));
    }
    for (std::size_t b = 0; b < opts.bins; ++b) {
        const std::size_t lo = b * total / opts.bins;
        const std::size_t hi = (b + 1) * total / opts.bins;
        SlopeBin bin;
        bin.dm_lo = out.pairs[lo].dm;
        bin.dm_hi = out.pairs[hi - 1].dm;
        bin.count = hi - lo;
        std::vector<double> s;
        s.reserve(bin.count);
        for (std::size_t p = lo; p < hi; ++p) s.push_back(out.pairs[p].slope());
        bin.max_slope = *std::max_element(s.begin(), s.end());
        bin.median_slope = detail::median(std::move(s));
        out.max_slope = std::max(out.max_slope, bin.max_slope);
        out.bins.push_back(bin);
    }
    const double f = out.bins.front().median_slope;
    const double c = out.bins.back().median_slope;
    out.growth = c > 0.0 ? f / c : (f > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
    return out;
}

struct HolderOptions {
    PairOptions pairs{40, 10, 200000};
    double window_decades = 1.0;  // fit over [median_nn / 10^decades, median_nn]
    std::size_t min_pairs = 50;
    double degenerate_df = 1e-300;
};

struct HolderFit {
    double gamma = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t pairs_used = 0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    double median_nn = 0.0;
    bool degenerate = false;  // every |df| vanished; gamma = +inf
};

/// Least-squares slope of log|df| against log|dm| over pairs in the window.
[[nodiscard]] inline HolderFit holder_exponent(const SampledGS& gs, const HolderOptions& opts = {}) {
    const NeighborPairs np = neighbor_pairs(gs, opts.pairs);
    HolderFit fit;
    fit.median_nn = np.median_nn;
    fit.window_hi = np.median_nn;
    fit.window_lo = np.median_nn * std::pow(10.0, -opts.window_decades);

    std::vector<const SecantPair*> in;
    for (const auto& p : np.pairs) {
        if (p.dm >= fit.window_lo && p.dm <= fit.window_hi && p.dm > 0.0) in.push_back(&p);
    }
    if (in.size() < opts.min_pairs) {
        throw Error(ErrorCode::InsufficientPairs,
                    std::to_string(in.size()) + " pairs in the fit window, need " + std::to_string(opts.min_pairs));
    }
    if (std::all_of(in.begin(), in.end(), [&](const SecantPair* p) { return p->df <= opts.degenerate_df; })) {
        fit.degenerate = true;
        fit.gamma = std::numeric_limits<double>::infinity();
        fit.r2 = 1.0;
        fit.pairs_used = in.size();
        return fit;
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0, n = 0;
    for (const auto* p : in) {
        if (p->df <= opts.degenerate_df) continue;
        const double x = std::log(p->dm);
        const double y = std::log(p->df);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        n += 1;
    }
    fit.pairs_used = static_cast<std::size_t>(n);
    if (fit.pairs_used < opts.min_pairs) {
        throw Error(ErrorCode::InsufficientPairs, "too few pairs with nonzero df in the fit window");
    }
    const double vx = sxx - sx * sx / n;
    const double vy = syy - sy * sy / n;
    const double cxy = sxy - sx * sy / n;
    if (!(vx > 0.0)) throw Error(ErrorCode::InsufficientPairs, "fit window has no spread in dm");
    fit.gamma = cxy / vx;
    fit.intercept = (sy - fit.gamma * sx) / n;
    fit.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
    return fit;
}

}  // namespace gsync
