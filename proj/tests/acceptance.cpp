// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "gsync/gsync.hpp"

using namespace gsync;
namespace fs = std::filesystem;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

const double kL = 0.9 * std::pow(0.9, -0.1);
const StateMap kF = StateMap::power_sine(0.9, 0.009, 0.1);
const ObservationMap kU = ObservationMap::coordinate(0);
const Vector kTheta = vec({0.6180339887498949, 0.41421356237309503});

struct Lorenz {
    DiscreteSystem sys = DiscreteSystem::lorenz();
    std::shared_ptr<const Trajectory> base;
    InputRange range;
    std::vector<InvariantRegion> boxes;
    Lorenz() {
        base = std::make_shared<const Trajectory>(trajectory(sys, vec({0, 1, 1.05}), 4000));
        range = observed_range(kU, base->points);
        for (const auto& r : config_detail::lorenz_boxes()) boxes.push_back(build_region(r));
    }
};

const Lorenz& lorenz() {
    static const Lorenz l;
    return l;
}

Outcome c1() {
    double worst = std::numeric_limits<double>::infinity();
    bool all = true;
    for (const auto& b : lorenz().boxes) {
        const auto c = check_invariance(kF, b, lorenz().range);
        all = all && c.ok && c.exact;
        worst = std::min(worst, c.margin);
    }
    // Interval oracle: image of [0.9, 1.1] is [0.9^0.9 - lambda, 1.1^0.9 + lambda] inside [0.9, 1.1].
    const double oracle = std::min(std::pow(0.9, 0.9) - 0.009 - 0.9, 1.1 - std::pow(1.1, 0.9) - 0.009);
    return {all && worst >= 4e-4 && std::abs(worst - oracle) < 1e-12,
            "8 boxes exact, min margin " + fmt("%.6g", worst) + ", oracle " + fmt("%.6g", oracle)};
}

Outcome c2() {
    LipschitzOptions o;
    o.per_axis = 50;
    bool ok = true;
    double worst_a = 0.0, worst_g = 0.0;
    for (const auto& b : lorenz().boxes) {
        const auto lb = lipschitz_bounds(kF, b, lorenz().range, o);
        worst_a = std::max(worst_a, std::abs(*lb.fx.analytic - kL));
        worst_g = std::max(worst_g, std::abs(lb.fx.grid - kL));
        ok = ok && lb.fx.analytic && std::abs(lb.L_Fx() - kL) <= 1e-6 && std::abs(lb.fx.grid - kL) <= 1e-3;
    }
    return {ok, "analytic error " + fmt("%.3g", worst_a) + ", grid error " + fmt("%.3g", worst_g)};
}

Outcome c3() {
    const auto a = drive_gs(kF, lorenz().base, kU, vec({1, 1, 1}), 2000);
    const auto b = drive_gs(kF, lorenz().base, kU, vec({1.1, 0.9, 1.05}), 2000);
    const double d = compare_gs(a, b);
    std::vector<Vector> inputs;
    for (std::size_t k = 1; k < lorenz().base->size(); ++k) inputs.push_back(kU((*lorenz().base)[k]));
    const double ratio = max_contraction_ratio(esp_convergence(kF, inputs, vec({1, 1, 1}), vec({1.1, 0.9, 1.05})));
    return {d <= 1e-12 && ratio <= 0.9096, "agreement " + fmt("%.3g", d) + ", max step ratio " + fmt("%.7f", ratio)};
}

Outcome c4() {
    const auto& V1 = lorenz().boxes.front();
    const auto drive = drive_gs(kF, lorenz().base, kU, vec({1, 1, 1}), 2000, V1);
    PsiOptions o;
    o.tol = 1e-12;
    o.washout = 2000;
    o.contraction = kL;
    o.region = V1;
    const auto psi = psi_iterate_gs(kF, lorenz().base, kU, vec({1, 1, 1}), o);
    const double d = compare_gs(drive, psi);
    const double n = static_cast<double>(psi.psi->iterations);
    const double p = psi.psi->predicted_iterations ? static_cast<double>(*psi.psi->predicted_iterations) : NAN;
    const bool ok = psi.psi->converged && d <= 1e-10 && n <= 2 * p && n >= p / 2;
    return {ok, "drive vs psi " + fmt("%.3g", d) + ", iterations " + fmt("%.0f", n) + " vs predicted " + fmt("%.0f", p)};
}

Outcome c5() {
    const auto s = multistability_sweep(kF, lorenz().boxes, lorenz().sys, kU, vec({0, 1, 1.05}), 2000, 2000);
    std::size_t built = 0;
    for (const auto& e : s.entries) built += e.gs ? 1 : 0;
    return {built == 8 && s.distinct == 8 && s.escapes == 0 && s.min_separation >= 1.6,
            std::to_string(built) + " GSs, " + std::to_string(s.distinct) + " distinct, min separation " +
                fmt("%.4f", s.min_separation) + ", escapes " + std::to_string(s.escapes)};
}

Outcome c6() {
    const auto sys = DiscreteSystem::torus_rotation(kTheta);
    const auto sine = ObservationMap::sine_sum({0, 1});
    const auto base = std::make_shared<const Trajectory>(trajectory(sys, vec({0.1, 0.2}), 2000));
    PsiOptions o;
    o.tol = 0.0;
    o.washout = 6;
    o.max_iters = 20;
    const auto g = psi_iterate_gs(StateMap::linear_delay(3), base, sine, Vector::Zero(7), o);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Matrix w = delay_window(sys, sine, g.point(i), 7);
        worst = std::max(worst, (g.values[i] - Vector(w.col(0))).lpNorm<Eigen::Infinity>());
    }
    const bool ok = worst <= 1e-12 && g.psi->settled_after == 7;
    return {ok, "max error " + fmt("%.3g", worst) + ", settled after " + std::to_string(g.psi->settled_after) + " sweeps"};
}

Outcome c7() {
    const auto sys = DiscreteSystem::cat_map();
    const auto t = trajectory(sys, vec({0.1234, 0.5678}), 500);
    const auto omega = ObservationMap::sine_sum({0, 1});
    const auto box = InvariantRegion::cube(Vector::Zero(3), 1.0);
    const auto esn = [](double s) {
        Matrix A = Matrix::Zero(3, 3);
        A.diagonal() << s, 0.2, 0.1;
        Matrix C(3, 1);
        C << 1, 0.5, -0.5;
        return StateMap::esn(A, C, vec({0.1, 0, -0.1}));
    };
    const auto a = certify(esn(0.3), box, sys, omega, t.points);
    const auto b = certify(esn(0.5), box, sys, omega, t.points);
    const double tau_err = std::abs(a.tangent_inv_norm() - (3 + std::sqrt(5.0)) / 2);
    const bool ok = a.esp_ok && a.diff_ok && b.esp_ok && !b.diff_ok && tau_err <= 1e-9;
    return {ok, std::string("0.3: esp ") + (a.esp_ok ? "yes" : "no") + " diff " + (a.diff_ok ? "yes" : "no") +
                    "; 0.5: esp " + (b.esp_ok ? "yes" : "no") + " diff " + (b.diff_ok ? "yes" : "no") +
                    "; tangent_inv error " + fmt("%.2g", tau_err)};
}

Outcome c8() {
    const auto& V1 = lorenz().boxes.front();
    const auto r = input_forgetting(kF, V1, lorenz().range, 200, 100);
    const double bound = std::pow(0.90953, 200) * V1.diameter() + 1e-12;
    return {r.max_distance <= bound && r.within_bound(),
            "max distance " + fmt("%.3g", r.max_distance) + ", bound " + fmt("%.3g", bound)};
}

Outcome c9() {
    const auto sys = DiscreteSystem::torus_rotation(kTheta);
    const auto torus = drive_gs(StateMap::linear_delay(3), sys, ObservationMap::sine_sum({0, 1}), vec({0.1, 0.2}),
                                Vector::Zero(7), 6, 4000);
    const auto h = holder_exponent(torus);
    const auto lor = drive_gs(kF, lorenz().base, kU, vec({1, 1, 1}), 2000, lorenz().boxes.front());
    const auto prof = derivative_profile(lor);
    // Bounded slopes: the finest bin does not blow up relative to the coarsest.
    const bool bounded = std::isfinite(prof.max_slope) && prof.growth <= 3.0;
    return {h.gamma >= 0.9 && h.r2 >= 0.8 && bounded,
            "torus gamma " + fmt("%.3f", h.gamma) + " r2 " + fmt("%.3f", h.r2) + "; lorenz slope growth " +
                fmt("%.2f", prof.growth) + " max slope " + fmt("%.3g", prof.max_slope)};
}

std::size_t rows(const fs::path& p) {
    std::ifstream is(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) n += (!line.empty() && line[0] != '#') ? 1 : 0;
    return n == 0 ? 0 : n - 1;
}

Outcome c10() {
    const fs::path out = fs::temp_directory_path() / "gsync_acceptance_figs";
    fs::remove_all(out);
    CommandOptions o;
    o.out = out.string();
    std::ostringstream sink;
    const int code = cmd_reproduce(lorenz_power_sine_config(), o, {sink, sink});
    if (code != kExitOk) return {false, "reproduce exit " + std::to_string(code)};
    bool files = true;
    for (const char* f : {"fig1.csv", "fig2.csv", "fig3.csv", "fig4.csv"}) files = files && fs::exists(out / f);

    std::ifstream is(out / "fig2.csv");
    std::string line;
    double t_first = NAN, t_last = NAN;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        const double t = std::stod(line.substr(0, line.find(',')));
        if (std::isnan(t_first)) t_first = t;
        t_last = t;
    }
    const std::size_t n2 = rows(out / "fig2.csv");
    const bool axis = n2 == 2000 && std::abs(t_first - 20.01) < 1e-9 && std::abs(t_last - 40.0) < 1e-9;

    std::ifstream f4(out / "fig4.csv");
    header = false;
    bool confined = true;
    std::size_t n4 = 0;
    const auto& V1 = lorenz().boxes[0];
    const auto& V2 = lorenz().boxes[1];
    while (std::getline(f4, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
        confined = confined && v.size() == 7 && V1.contains(vec({v[1], v[2], v[3]})) && V2.contains(vec({v[4], v[5], v[6]}));
        ++n4;
    }
    return {files && axis && confined && n4 > 0,
            "fig2 rows " + std::to_string(n2) + " t in [" + fmt("%.2f", t_first) + ", " + fmt("%.2f", t_last) +
                "], fig4 rows " + std::to_string(n4) + (confined ? " confined to V1/V2" : " NOT confined")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"invariance of the eight Lorenz boxes", c1},
        {"contraction constant", c2},
        {"echo state property after washout", c3},
        {"drive and psi agreement", c4},
        {"eight distinct synchronizations", c5},
        {"shift register delay oracle", c6},
        {"certificate logic on the cat map", c7},
        {"input forgetting at k = 200", c8},
        {"regularity", c9},
        {"figure reproduction", c10},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r = {false, std::string("threw ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %zu: %s (%s) [%.2f s]\n", r.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    r.detail.c_str(), secs);
        failed += r.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
