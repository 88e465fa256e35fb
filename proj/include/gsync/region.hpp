#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gsync/error.hpp"
#include "gsync/interval.hpp"
#include "gsync/linalg.hpp"

namespace gsync {

struct AxisBox {
    Vector lo;
    Vector hi;
};

struct Ball {
    Vector center;
    double radius = 0.0;
};

/// Closed convex set in state space: an optional axis-aligned box intersected
/// with any number of Euclidean balls.
class InvariantRegion {
public:
    enum class Kind { AxisBox, Ball, Intersection };

    [[nodiscard]] static InvariantRegion box(Vector lo, Vector hi, std::string label = "") {
        require_dim(hi.size(), lo.size(), "box bounds");
        if (lo.size() == 0) throw Error(ErrorCode::InvalidArgument, "box must have positive dimension");
        // Degenerate (lo == hi) axes are admitted so that singletons such as an
        // exact fixed point can be expressed.
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            if (!(lo(i) <= hi(i))) throw Error(ErrorCode::InvalidArgument, "box needs lo <= hi on every axis");
        }
        InvariantRegion r;
        r.box_ = AxisBox{std::move(lo), std::move(hi)};
        r.label_ = std::move(label);
        return r;
    }

    /// Box of half-width `half_width` about `center`.
    [[nodiscard]] static InvariantRegion cube(const Vector& center, double half_width, std::string label = "") {
        return box(center.array() - half_width, center.array() + half_width, std::move(label));
    }

    [[nodiscard]] static InvariantRegion ball(Vector center, double radius, std::string label = "") {
        if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "ball radius must be positive");
        InvariantRegion r;
        r.balls_.push_back(Ball{std::move(center), radius});
        r.label_ = std::move(label);
        return r;
    }

    [[nodiscard]] InvariantRegion intersected_with(const Ball& b) const {
        require_dim(b.center.size(), dim(), "ball intersection");
        InvariantRegion r = *this;
        r.balls_.push_back(b);
        return r;
    }

    [[nodiscard]] Kind kind() const noexcept {
        if (box_ && balls_.empty()) return Kind::AxisBox;
        if (!box_ && balls_.size() == 1) return Kind::Ball;
        return Kind::Intersection;
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return box_ ? box_->lo.size() : balls_.front().center.size(); }
    [[nodiscard]] bool convex() const noexcept { return true; }
    [[nodiscard]] const std::string& label() const noexcept { return label_; }
    void set_label(std::string label) { label_ = std::move(label); }
    [[nodiscard]] const std::optional<AxisBox>& box_part() const noexcept { return box_; }
    [[nodiscard]] const std::vector<Ball>& balls() const noexcept { return balls_; }

    [[nodiscard]] bool contains(const Vector& x, double slack = 0.0) const { return margin(x) >= -slack; }

    /// Signed clearance: the distance to the boundary for interior points
    /// (min over the constraints), negative when x violates a constraint.
    [[nodiscard]] double margin(const Vector& x) const {
        require_dim(x.size(), dim(), "region membership");
        double m = std::numeric_limits<double>::infinity();
        if (box_) {
            m = std::min(m, (x - box_->lo).minCoeff());
            m = std::min(m, (box_->hi - x).minCoeff());
        }
        for (const auto& b : balls_) m = std::min(m, b.radius - (x - b.center).norm());
        return m;
    }

    [[nodiscard]] AxisBox bounding_box() const {
        AxisBox bb;
        if (box_) {
            bb = *box_;
        } else {
            bb.lo = Vector::Constant(dim(), -std::numeric_limits<double>::infinity());
            bb.hi = Vector::Constant(dim(), std::numeric_limits<double>::infinity());
        }
        for (const auto& b : balls_) {
            bb.lo = bb.lo.cwiseMax((b.center.array() - b.radius).matrix());
            bb.hi = bb.hi.cwiseMin((b.center.array() + b.radius).matrix());
        }
        return bb;
    }

    /// Per-axis intervals of the bounding box.
    [[nodiscard]] std::vector<Interval> intervals() const {
        const AxisBox bb = bounding_box();
        std::vector<Interval> out;
        for (Eigen::Index i = 0; i < bb.lo.size(); ++i) out.push_back({bb.lo(i), bb.hi(i)});
        return out;
    }

    [[nodiscard]] Vector center() const {
        if (!balls_.empty() && contains(balls_.front().center)) return balls_.front().center;
        const AxisBox bb = bounding_box();
        return 0.5 * (bb.lo + bb.hi);
    }

    /// Upper bound on the diameter (exact for boxes and balls).
    [[nodiscard]] double diameter() const {
        const AxisBox bb = bounding_box();
        double d = (bb.hi - bb.lo).norm();
        for (const auto& b : balls_) d = std::min(d, 2.0 * b.radius);
        return d;
    }

    /// Deterministic sample of region points: a full grid with `per_axis`
    /// points per axis over the bounding box when it has at most `max_points`
    /// nodes, otherwise `max_points` Halton points; points outside the region
    /// are dropped and the center is always included.
    [[nodiscard]] std::vector<Vector> sample(std::size_t per_axis, std::size_t max_points = 250000) const {
        const AxisBox bb = bounding_box();
        const Eigen::Index n = dim();
        std::vector<Vector> out;
        out.push_back(center());

        double total = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) total *= static_cast<double>(per_axis);
        if (total <= static_cast<double>(max_points)) {
            std::vector<std::vector<double>> axes;
            for (Eigen::Index i = 0; i < n; ++i) axes.push_back(linspace(bb.lo(i), bb.hi(i), per_axis));
            std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
            while (true) {
                Vector x(n);
                for (Eigen::Index i = 0; i < n; ++i) x(i) = axes[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
                if (contains(x)) out.push_back(std::move(x));
                Eigen::Index k = 0;
                while (k < n && ++idx[static_cast<std::size_t>(k)] == per_axis) idx[static_cast<std::size_t>(k++)] = 0;
                if (k == n) break;
            }
        } else {
            for (std::size_t s = 1; s <= max_points; ++s) {
                Vector x(n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    x(i) = bb.lo(i) + radical_inverse(s, nth_prime(static_cast<std::size_t>(i))) * (bb.hi(i) - bb.lo(i));
                }
                if (contains(x)) out.push_back(std::move(x));
            }
        }
        return out;
    }

private:
    InvariantRegion() = default;

    std::optional<AxisBox> box_;
    std::vector<Ball> balls_;
    std::string label_;
};

}  // namespace gsync
