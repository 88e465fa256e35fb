#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gsync {

/// Closed real interval [lo, hi]. Only the handful of operations needed for
/// exact images of the built-in state maps are provided; endpoints are
/// evaluated in ordinary floating point.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] double width() const noexcept { return hi - lo; }
    [[nodiscard]] bool contains(double x) const noexcept { return lo <= x && x <= hi; }
    [[nodiscard]] bool contains(const Interval& o) const noexcept { return lo <= o.lo && o.hi <= hi; }

    /// Smallest |x| over the interval.
    [[nodiscard]] double min_abs() const noexcept {
        if (lo <= 0.0 && hi >= 0.0) return 0.0;
        return std::min(std::abs(lo), std::abs(hi));
    }
    [[nodiscard]] double max_abs() const noexcept { return std::max(std::abs(lo), std::abs(hi)); }
};

[[nodiscard]] inline Interval operator+(const Interval& a, const Interval& b) noexcept {
    return {a.lo + b.lo, a.hi + b.hi};
}

[[nodiscard]] inline Interval scale(const Interval& a, double s) noexcept {
    return s >= 0.0 ? Interval{s * a.lo, s * a.hi} : Interval{s * a.hi, s * a.lo};
}

namespace detail {
// True if some point c + 2*pi*n lies in [a, b].
[[nodiscard]] inline bool hits_phase(double a, double b, double c) noexcept {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double n = std::ceil((a - c) / two_pi);
    return c + two_pi * n <= b;
}
}  // namespace detail

/// Exact range of sin over the interval.
[[nodiscard]] inline Interval sin_range(const Interval& x) noexcept {
    constexpr double pi = std::numbers::pi;
    if (x.width() >= 2.0 * pi) return {-1.0, 1.0};
    double lo = std::min(std::sin(x.lo), std::sin(x.hi));
    double hi = std::max(std::sin(x.lo), std::sin(x.hi));
    if (detail::hits_phase(x.lo, x.hi, 0.5 * pi)) hi = 1.0;
    if (detail::hits_phase(x.lo, x.hi, -0.5 * pi)) lo = -1.0;
    return {lo, hi};
}

[[nodiscard]] inline Interval cos_range(const Interval& x) noexcept {
    constexpr double half_pi = 0.5 * std::numbers::pi;
    return sin_range({x.lo + half_pi, x.hi + half_pi});
}

/// Range of sin^2 via sin^2 = (1 - cos 2x) / 2.
[[nodiscard]] inline Interval sin_squared_range(const Interval& x) noexcept {
    const Interval c = cos_range({2.0 * x.lo, 2.0 * x.hi});
    return {0.5 * (1.0 - c.hi), 0.5 * (1.0 - c.lo)};
}

/// Odd power sign(x)|x|^alpha, alpha > 0; monotone increasing on the reals.
[[nodiscard]] inline double odd_pow(double x, double alpha) noexcept {
    return std::copysign(std::pow(std::abs(x), alpha), x);
}

[[nodiscard]] inline Interval odd_pow_range(const Interval& x, double alpha) noexcept {
    return {odd_pow(x.lo, alpha), odd_pow(x.hi, alpha)};
}

}  // namespace gsync
