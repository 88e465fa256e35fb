#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "gsync/diagnostics.hpp"
#include "gsync/gs.hpp"

using namespace gsync;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

const Vector kTheta = vec({0.6180339887498949, 0.41421356237309503});
const StateMap kPowerSine = StateMap::power_sine(0.9, 0.009, 0.1);
const ObservationMap kU = ObservationMap::coordinate(0);

const DiscreteSystem& lorenz() {
    static const DiscreteSystem s = DiscreteSystem::lorenz();
    return s;
}

std::shared_ptr<const Trajectory> lorenz_base() {
    static const auto t = std::make_shared<const Trajectory>(trajectory(lorenz(), vec({0, 1, 1.05}), 4000));
    return t;
}

InvariantRegion box_around(const Vector& c, const std::string& label) { return InvariantRegion::cube(c, 0.1, label); }

// Closed-form synchronization of the shift register: f(m) = (w(m), w(phi^-1 m), ..., w(phi^-(N-1) m)).
Vector delay_vector(const DiscreteSystem& sys, const ObservationMap& w, const Vector& m, int n) {
    const Matrix rows = delay_window(sys, w, m, static_cast<std::size_t>(n));
    return rows.col(0);
}

}  // namespace

TEST(DriveGs, StaysInV1AfterWashout) {
    const auto V1 = box_around(vec({1, 1, 1}), "V1");
    const auto g = drive_gs(kPowerSine, lorenz_base(), kU, vec({1, 1, 1}), 2000, V1);
    ASSERT_EQ(g.size(), 2000u);
    EXPECT_EQ(g.first_index, 2001u);
    for (const auto& v : g.values) EXPECT_TRUE(V1.contains(v));
    EXPECT_LE(g.residual.max, 1e-13);
}

TEST(DriveGs, ConstantMapIgnoresInitialState) {
    const Vector w = vec({0.5, -0.25});
    const auto sys = DiscreteSystem::torus_rotation(kTheta);
    const auto g = drive_gs(StateMap::constant(w, 1), sys, kU, vec({0.1, 0.2}), vec({7, 7}), 0, 50);
    for (const auto& v : g.values) EXPECT_EQ(v, w);
}

TEST(DriveGs, InitialStatesForgotten) {
    const auto a = drive_gs(kPowerSine, lorenz_base(), kU, vec({1, 1, 1}), 2000);
    const auto b = drive_gs(kPowerSine, lorenz_base(), kU, vec({1.05, 0.95, 1.1}), 2000);
    EXPECT_LE(compare_gs(a, b), 1e-12);
}

TEST(DriveGs, RegionEscapeReportsIndex) {
    // Boxes far from the attracting fixed point are left immediately.
    const auto bad = InvariantRegion::cube(vec({2, 2, 2}), 0.05, "far");
    try {
        (void)drive_gs(kPowerSine, lorenz_base(), kU, vec({2, 2, 2}), 10, bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RegionEscape);
        ASSERT_TRUE(e.index().has_value());
        EXPECT_EQ(*e.index(), 11u);
    }
}

TEST(DriveGs, RedrivingReproducesValues) {
    const auto V1 = box_around(vec({1, 1, 1}), "V1");
    const auto a = drive_gs(kPowerSine, lorenz_base(), kU, vec({1, 1, 1}), 2000);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.9, 1.1);
    for (int i = 0; i < 5; ++i) {
        const auto b = drive_gs(kPowerSine, lorenz_base(), kU, vec({u(rng), u(rng), u(rng)}), 2000, V1);
        EXPECT_LE(compare_gs(a, b), 1e-10);
    }
}

TEST(PsiIterate, ConstantMapConvergesInOneSweep) {
    const Vector w = vec({0.5, -0.25});
    const auto base = std::make_shared<const Trajectory>(trajectory(DiscreteSystem::torus_rotation(kTheta), vec({0.1, 0.2}), 30));
    PsiOptions o;
    o.tol = 1e-15;
    const auto g = psi_iterate_gs(StateMap::constant(w, 1), base, kU, vec({3, 4}), o);
    ASSERT_TRUE(g.psi->converged);
    // The first sweep lands on w; the second only confirms it.
    EXPECT_EQ(g.psi->settled_after, 1u);
    for (const auto& v : g.values) EXPECT_EQ(v, w);
}

TEST(PsiIterate, TakensOracleOnBuiltInSystems) {
    const auto sine = ObservationMap::sine_sum({0, 1});
    const auto F = StateMap::linear_delay(3);
    const std::vector<DiscreteSystem> systems{DiscreteSystem::torus_rotation(kTheta), DiscreteSystem::cat_map()};
    for (const auto& sys : systems) {
        const auto base = std::make_shared<const Trajectory>(trajectory(sys, vec({0.1234, 0.5678}), 300));
        PsiOptions o;
        o.tol = 0.0;
        o.max_iters = 7;
        o.washout = 6;
        const auto g = psi_iterate_gs(F, base, sine, Vector::Zero(7), o);
        double worst = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            worst = std::max(worst, (g.values[i] - delay_vector(sys, sine, g.point(i), 7)).lpNorm<Eigen::Infinity>());
        }
        EXPECT_LE(worst, 1e-12) << sys.name();
    }
}

TEST(PsiIterate, TakensOracleOnLorenz) {
    const auto F = StateMap::linear_delay(3);
    PsiOptions o;
    o.tol = 0.0;
    o.max_iters = 7;
    o.washout = 2000;
    const auto g = psi_iterate_gs(F, lorenz_base(), kU, Vector::Zero(7), o);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); i += 10) {
        worst = std::max(worst, (g.values[i] - delay_vector(lorenz(), kU, g.point(i), 7)).lpNorm<Eigen::Infinity>());
    }
    // Stored predecessors vs inverse_step differ at the round-trip tolerance.
    EXPECT_LE(worst, 1e-8);
}

TEST(PsiIterate, AgreesWithDriveOnLorenz) {
    const auto V1 = box_around(vec({1, 1, 1}), "V1");
    const auto drive = drive_gs(kPowerSine, lorenz_base(), kU, vec({1, 1, 1}), 2000, V1);
    PsiOptions o;
    o.tol = 1e-12;
    o.washout = 2000;
    o.contraction = 0.9 * std::pow(0.9, -0.1);
    o.region = V1;
    const auto psi = psi_iterate_gs(kPowerSine, lorenz_base(), kU, vec({1, 1, 1}), o);
    ASSERT_TRUE(psi.psi->converged);
    EXPECT_LE(compare_gs(drive, psi), 1e-10);
    EXPECT_LE(psi.residual.max, 2e-12);
    EXPECT_LE(psi.residual.max, o.tol * (1 + *o.contraction));
    ASSERT_TRUE(psi.psi->predicted_iterations.has_value());
    const double ratio = static_cast<double>(psi.psi->iterations) / static_cast<double>(*psi.psi->predicted_iterations);
    EXPECT_GT(ratio, 0.5);
    EXPECT_LT(ratio, 2.0);
    // Sweep-to-sweep changes shrink by at most L_Fx while they are resolvable.
    const auto& ch = psi.psi->changes;
    for (std::size_t n = 1; n + 1 < ch.size(); ++n) {
        if (ch[n] > 1e-9) EXPECT_LE(ch[n + 1], (*o.contraction + 1e-6) * ch[n]) << n;
    }
    EXPECT_GE(psi.psi->apriori_bound, compare_gs(drive, psi) - 1e-12);
}

TEST(PsiIterate, NoConvergenceIsFlagged) {
    PsiOptions o;
    o.tol = 1e-12;
    o.max_iters = 5;
    o.washout = 2000;
    const auto g = psi_iterate_gs(kPowerSine, lorenz_base(), kU, vec({1, 1, 1}), o);
    EXPECT_FALSE(g.psi->converged);
    EXPECT_EQ(g.psi->iterations, 5u);
    EXPECT_EQ(g.psi->changes.size(), 5u);
}

TEST(PsiIterate, BitIdenticalAcrossRuns) {
    PsiOptions o;
    o.washout = 2000;
    const auto a = psi_iterate_gs(kPowerSine, lorenz_base(), kU, vec({1, 1, 1}), o);
    const auto b = psi_iterate_gs(kPowerSine, lorenz_base(), kU, vec({1, 1, 1}), o);
    EXPECT_EQ(compare_gs(a, b), 0.0);
}

TEST(Residual, DetectsCorruption) {
    auto g = drive_gs(kPowerSine, lorenz_base(), kU, vec({1, 1, 1}), 2000);
    const double L = 0.9 * std::pow(0.9, -0.1);
    g.values[700](1) += 0.01;
    EXPECT_GE(recursion_residual(g, kPowerSine, kU).max, 0.01 * (1 - L));
}

TEST(Residual, NeedsTwoPoints) {
    auto g = drive_gs(kPowerSine, lorenz_base(), kU, vec({1, 1, 1}), 2000);
    g.values.resize(1);
    EXPECT_THROW((void)recursion_residual(g, kPowerSine, kU), Error);
}

TEST(CompareGs, IdentityAndSeparatedBoxes) {
    const auto a = drive_gs(kPowerSine, lorenz_base(), kU, vec({1, 1, 1}), 2000);
    EXPECT_EQ(compare_gs(a, a), 0.0);
    const auto b = drive_gs(kPowerSine, lorenz_base(), kU, vec({-1, 1, 1}), 2000);
    EXPECT_GE(compare_gs(a, b), 1.7);
}

TEST(CompareGs, DisjointRanges) {
    const auto sys = DiscreteSystem::torus_rotation(kTheta);
    const auto F = StateMap::linear_delay(1);
    const auto a = drive_gs(F, sys, kU, vec({0.1, 0.2}), Vector::Zero(3), 0, 10);
    const auto b = drive_gs(F, sys, kU, vec({0.3, 0.2}), Vector::Zero(3), 0, 10);
    try {
        (void)compare_gs(a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DisjointRanges);
    }
    const auto base = std::make_shared<const Trajectory>(trajectory(sys, vec({0.1, 0.2}), 40));
    const auto early = drive_gs(F, base, kU, Vector::Zero(3), 0);
    auto late = drive_gs(F, base, kU, Vector::Zero(3), 20);
    EXPECT_LE(compare_gs(early, late), 1e-15);  // the shift register forgets after three steps
    late.values.resize(0);
    EXPECT_THROW((void)compare_gs(early, late), Error);
}

TEST(Sweep, EightBoxesEightSynchronizations) {
    std::vector<InvariantRegion> regions;
    int n = 0;
    for (double a : {1.0, -1.0})
        for (double b : {1.0, -1.0})
            for (double c : {1.0, -1.0}) regions.push_back(box_around(vec({a, b, c}), "V" + std::to_string(++n)));
    const auto s = multistability_sweep(kPowerSine, regions, lorenz(), kU, vec({0, 1, 1.05}), 2000, 2000);
    ASSERT_EQ(s.entries.size(), 8u);
    for (const auto& e : s.entries) EXPECT_TRUE(e.gs.has_value()) << e.region.label();
    EXPECT_EQ(s.distinct, 8u);
    EXPECT_EQ(s.escapes, 0u);
    EXPECT_GE(s.min_separation, 1.6);
}

TEST(Sweep, SingleAndDuplicatedRegions) {
    const auto V1 = box_around(vec({1, 1, 1}), "V1");
    const auto one = multistability_sweep(kPowerSine, {V1}, lorenz(), kU, vec({0, 1, 1.05}), 500, 200);
    EXPECT_EQ(one.entries.size(), 1u);
    EXPECT_TRUE(std::isinf(one.min_separation));
    const auto two = multistability_sweep(kPowerSine, {V1, V1}, lorenz(), kU, vec({0, 1, 1.05}), 500, 200);
    EXPECT_LE(two.min_separation, 1e-12);
    EXPECT_EQ(two.distinct, 1u);
}

TEST(Sweep, FailedRegionDoesNotStopSweep) {
    const auto V1 = box_around(vec({1, 1, 1}), "V1");
    const auto far = InvariantRegion::cube(vec({3, 3, 3}), 0.1, "far");
    const auto s = multistability_sweep(kPowerSine, {far, V1}, lorenz(), kU, vec({0, 1, 1.05}), 500, 200);
    EXPECT_FALSE(s.entries[0].gs.has_value());
    EXPECT_TRUE(s.entries[0].error.has_value());
    EXPECT_TRUE(s.entries[1].gs.has_value());
}

TEST(GsTable, ColumnsAndMetadata) {
    const auto g = drive_gs(kPowerSine, lorenz_base(), kU, vec({1, 1, 1}), 3990);
    std::ostringstream os;
    gs_table(g, kPowerSine, kU, {"u", "v", "w"}).write(os);
    const std::string s = os.str();
    EXPECT_NE(s.find("# method: drive"), std::string::npos);
    EXPECT_NE(s.find("t,u,v,w,x1,x2,x3,residual\n"), std::string::npos);
    EXPECT_NE(s.find("\n39.91"), std::string::npos);
}

TEST(Weighting, Validation) {
    EXPECT_THROW((void)WeightingSequence::geometric(1.0), Error);
    EXPECT_THROW((void)WeightingSequence::custom({0.9, 0.5}), Error);
    EXPECT_THROW((void)WeightingSequence::custom({1.0, 0.5, 0.5}), Error);
    const auto w = WeightingSequence::custom({1.0, 0.5, 0.1});
    EXPECT_EQ(w(2), 0.1);
}

TEST(WeightedDistance, Definition) {
    const auto w = WeightingSequence::geometric(0.5);
    std::vector<Vector> a(6, vec({1, 2})), b = a;
    EXPECT_EQ(weighted_distance(a, b, w), 0.0);
    b[3](1) += 0.8;
    EXPECT_NEAR(weighted_distance(a, b, w), 0.8 * 0.125, 1e-16);
    b = a;
    b[0](0) -= 0.3;
    EXPECT_NEAR(weighted_distance(a, b, w), 0.3, 1e-16);
    b.pop_back();
    try {
        (void)weighted_distance(a, b, w);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
    }
}

TEST(WeightedDistance, PseudoMetricProperty) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0.0, 1.0);
    const auto w = WeightingSequence::geometric(0.7);
    const auto window = [&] {
        std::vector<Vector> v;
        for (int i = 0; i < 12; ++i) v.push_back(vec({n(rng), n(rng)}));
        return v;
    };
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = window(), b = window(), c = window();
        const double ab = weighted_distance(a, b, w);
        EXPECT_EQ(ab, weighted_distance(b, a, w));
        EXPECT_LE(weighted_distance(a, c, w), ab + weighted_distance(b, c, w) + 1e-15);
        EXPECT_GT(ab, 0.0);
    }
}

TEST(Esp, IdenticalStatesStayTogether) {
    std::vector<Vector> inputs(50, vec({2.0}));
    for (double d : esp_convergence(kPowerSine, inputs, vec({1, 1, 1}), vec({1, 1, 1}))) EXPECT_EQ(d, 0.0);
}

TEST(Esp, PowerSineGeometricDecay) {
    std::vector<Vector> inputs;
    for (std::size_t k = 1; k < lorenz_base()->size(); ++k) inputs.push_back(kU((*lorenz_base())[k]));
    const double c = 0.9 * std::pow(0.9, -0.1);
    const auto d = esp_convergence(kPowerSine, inputs, vec({1, 1, 1}), vec({1.1, 1.1, 1.1}));
    for (std::size_t t = 0; t < 200; ++t) EXPECT_LE(d[t], d[0] * std::pow(c, static_cast<double>(t)) * (1 + 1e-9) + 1e-15);
    EXPECT_LT(d[300], 1e-12);
    EXPECT_LE(max_contraction_ratio(d), c + 1e-6);
}

TEST(Esp, EsnDecay) {
    Matrix A = Matrix::Zero(3, 3);
    A.diagonal() << 0.3, 0.2, 0.1;
    Matrix C(3, 1);
    C << 1, 0.5, -0.5;
    const auto F = StateMap::esn(A, C, Vector::Zero(3));
    std::vector<Vector> inputs;
    for (int i = 0; i < 40; ++i) inputs.push_back(vec({std::sin(0.7 * i)}));
    const auto d = esp_convergence(F, inputs, vec({0.9, -0.9, 0.5}), vec({-0.9, 0.9, -0.5}));
    for (std::size_t t = 0; t < d.size(); ++t) EXPECT_LE(d[t], d[0] * std::pow(0.3, static_cast<double>(t)) + 1e-15);
}

TEST(Forgetting, BoundsHoldAcrossSuffixLengths) {
    const auto V1 = box_around(vec({1, 1, 1}), "V1");
    const InputRange range = observed_range(kU, lorenz_base()->points);
    for (std::size_t k : {0u, 1u, 5u, 20u, 100u, 200u}) {
        const auto r = input_forgetting(kPowerSine, V1, range, k, 30);
        EXPECT_TRUE(r.within_bound()) << k << " " << r.max_distance << " " << r.bound;
    }
    EXPECT_NEAR(input_forgetting(kPowerSine, V1, range, 0, 5).bound, V1.diameter() + 1e-12, 1e-15);
}

TEST(Forgetting, EsnAtTwentySteps) {
    Matrix A = Matrix::Zero(3, 3);
    A.diagonal() << 0.3, 0.2, 0.1;
    Matrix C(3, 1);
    C << 1, 0.5, -0.5;
    const auto F = StateMap::esn(A, C, Vector::Zero(3));
    const auto box = InvariantRegion::cube(Vector::Zero(3), 1.0);
    const auto r = input_forgetting(F, box, {vec({-0.3}), vec({0.3})}, 20, 100);
    EXPECT_NEAR(r.bound, std::pow(0.3, 20) * box.diameter() + 1e-12, 1e-20);
    EXPECT_TRUE(r.within_bound());
}

TEST(Forgetting, SeededDeterminism) {
    const auto V1 = box_around(vec({1, 1, 1}), "V1");
    const InputRange range{vec({-17}), vec({19})};
    ForgettingOptions o;
    o.seed = 42;
    const auto a = input_forgetting(kPowerSine, V1, range, 5, 10, o);
    const auto b = input_forgetting(kPowerSine, V1, range, 5, 10, o);
    EXPECT_EQ(a.distances, b.distances);
}

TEST(Regularity, TorusDelayProfileIsBounded) {
    const auto sys = DiscreteSystem::torus_rotation(kTheta);
    const auto sine = ObservationMap::sine_sum({0, 1});
    const auto base = std::make_shared<const Trajectory>(trajectory(sys, vec({0.1, 0.2}), 3006));
    const auto g = drive_gs(StateMap::linear_delay(3), base, sine, Vector::Zero(7), 6);
    const auto prof = derivative_profile(g);
    // |Df| <= |D omega| sqrt(2q + 1) max(1, |T phi^-1|)^(2q) for the delay vector.
    const double cap = std::sqrt(2.0) * std::sqrt(7.0);
    EXPECT_LE(prof.max_slope, cap * 1.01);
    // The finest bin reproduces the differential: Df(m) v has entries
    // cos(2 pi (m1 - j theta1)) v1 + cos(2 pi (m2 - j theta2)) v2 for lags j = 0..6.
    const std::size_t finest = prof.bins.front().count;
    std::vector<double> exact;
    for (std::size_t p = 0; p < finest; ++p) {
        const auto& pr = prof.pairs[p];
        const Vector m = g.point(pr.i);
        const Vector v = g.point(pr.j) - m;
        double sq = 0.0;
        for (int j = 0; j < 7; ++j) {
            const double a = 2 * std::numbers::pi * (m(0) - j * kTheta(0));
            const double b = 2 * std::numbers::pi * (m(1) - j * kTheta(1));
            const double e = std::cos(a) * v(0) + std::cos(b) * v(1);
            sq += e * e;
        }
        exact.push_back(std::sqrt(sq) / v.norm());
    }
    std::nth_element(exact.begin(), exact.begin() + static_cast<std::ptrdiff_t>(exact.size() / 2), exact.end());
    const double oracle = exact[exact.size() / 2];
    EXPECT_NEAR(prof.bins.front().median_slope, oracle, 0.1 * oracle);
    EXPECT_LT(prof.growth, 1.2);
}

TEST(Regularity, ConstantMapDegenerate) {
    const Vector w = vec({0.5, -0.25});
    const auto sys = DiscreteSystem::torus_rotation(kTheta);
    const auto g = drive_gs(StateMap::constant(w, 1), sys, kU, vec({0.1, 0.2}), w, 10, 2000);
    const auto prof = derivative_profile(g);
    EXPECT_EQ(prof.max_slope, 0.0);
    const auto h = holder_exponent(g);
    EXPECT_TRUE(h.degenerate);
    EXPECT_TRUE(std::isinf(h.gamma));
}

TEST(Regularity, TorusHolderExponentNearOne) {
    const auto sys = DiscreteSystem::torus_rotation(kTheta);
    const auto sine = ObservationMap::sine_sum({0, 1});
    const auto g = drive_gs(StateMap::linear_delay(3), sys, sine, vec({0.1, 0.2}), Vector::Zero(7), 6, 4000);
    const auto h = holder_exponent(g);
    EXPECT_GE(h.gamma, 0.9);
    EXPECT_LE(h.gamma, 1.1);
    EXPECT_GE(h.r2, 0.8);
}

TEST(Regularity, InsufficientPairs) {
    const auto sys = DiscreteSystem::torus_rotation(kTheta);
    const auto g = drive_gs(StateMap::linear_delay(1), sys, kU, vec({0.1, 0.2}), Vector::Zero(3), 0, 30);
    try {
        (void)derivative_profile(g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientPairs);
    }
    EXPECT_THROW((void)holder_exponent(g), Error);
}
