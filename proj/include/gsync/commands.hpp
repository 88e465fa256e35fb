#pragma once

// Batch subcommands behind the gsync tool. Each returns a process exit code:
// 0 success, 2 configuration error, 3 numerical failure, 4 condition fails.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gsync/config.hpp"
#include "gsync/contraction.hpp"
#include "gsync/diagnostics.hpp"
#include "gsync/gs.hpp"
#include "gsync/io.hpp"

#ifndef GSYNC_VERSION
#define GSYNC_VERSION "0.1.0"
#endif

namespace gsync {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumeric = 3, kExitCondition = 4 };

struct CommandOptions {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> require;
    std::optional<std::string> method;
    std::optional<std::string> figure;
};

struct CommandContext {
    std::ostream& out = std::cout;
    std::ostream& err = std::cerr;
};

/// Lorenz driven PowerSine with the eight boxes around the fixed points.
[[nodiscard]] inline RunConfig lorenz_power_sine_config() {
    RunConfig cfg;
    cfg.statemap.kind = "power_sine";
    cfg.regions = config_detail::lorenz_boxes();
    return cfg;
}

namespace cmd_detail {

inline RunConfig apply_overrides(RunConfig cfg, const CommandOptions& o) {
    if (o.out) cfg.run.out = *o.out;
    if (o.seed) cfg.run.seed = *o.seed;
    if (o.require) cfg.run.require = *o.require;
    if (o.method) cfg.run.method = *o.method;
    return cfg;
}

inline std::filesystem::path prepare_out(const RunConfig& cfg, const std::string& command) {
    const std::filesystem::path dir(cfg.run.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Config, "cannot create output directory " + dir.string());
    std::ofstream os(dir / "resolved.cfg");
    if (!os) throw Error(ErrorCode::Config, "cannot write " + (dir / "resolved.cfg").string());
    os << "# gsync " << GSYNC_VERSION << " " << command << '\n';
    write_config(os, cfg);
    return dir;
}

inline void stamp(CsvTable& t, const std::string& command) {
    t.meta("tool", std::string("gsync ") + GSYNC_VERSION);
    t.meta("command", command);
}

[[nodiscard]] inline std::vector<std::string> phase_names(const RunConfig& cfg, Eigen::Index dim) {
    if (cfg.system.kind == "lorenz" && dim == 3) return {"u", "v", "w"};
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < dim; ++i) out.push_back("m" + std::to_string(i + 1));
    return out;
}

[[nodiscard]] inline LipschitzOptions lipschitz_options(const RunConfig& cfg) {
    LipschitzOptions o;
    o.per_axis = cfg.run.grid;
    o.input_samples = cfg.run.input_samples;
    return o;
}

template <typename Body>
int guarded(const CommandContext& ctx, const std::string& command, Body&& body) {
    try {
        return body();
    } catch (const Error& e) {
        ctx.err << "gsync " << command << ": " << e.what() << '\n';
        return e.code() == ErrorCode::Config ? kExitConfig : kExitNumeric;
    } catch (const std::exception& e) {
        ctx.err << "gsync " << command << ": " << e.what() << '\n';
        return kExitNumeric;
    }
}

}  // namespace cmd_detail

/// trajectory.csv: t, phase coordinates, observation.
inline int cmd_simulate(const RunConfig& base_cfg, const CommandOptions& opts = {}, const CommandContext& ctx = {}) {
    using namespace cmd_detail;
    return guarded(ctx, "simulate", [&] {
        const RunConfig cfg = apply_overrides(base_cfg, opts);
        const Setup s = build_setup(cfg, false);
        const auto dir = prepare_out(cfg, "simulate");
        const Trajectory traj = trajectory(s.system, s.initial, cfg.run.steps);

        std::vector<std::string> cols{"t"};
        for (auto& n : phase_names(cfg, s.system.phase_dim())) cols.push_back(n);
        const Eigen::Index d = s.observation.obs_dim();
        for (Eigen::Index i = 0; i < d; ++i) cols.push_back(d == 1 ? "obs" : "obs" + std::to_string(i + 1));
        CsvTable t(cols);
        stamp(t, "simulate");
        t.meta("system", s.system.name());
        t.meta("observation", s.observation.name());
        t.meta("h", format_number(s.system.time_step()));
        t.meta("initial", format_vector(s.initial));
        t.meta("steps", std::to_string(cfg.run.steps));
        for (std::size_t k = 0; k < traj.size(); ++k) {
            std::vector<double> row{traj.time(k)};
            for (Eigen::Index i = 0; i < traj[k].size(); ++i) row.push_back(traj[k](i));
            const Vector z = s.observation(traj[k]);
            for (Eigen::Index i = 0; i < z.size(); ++i) row.push_back(z(i));
            t.row(row);
        }
        t.save((dir / "trajectory.csv").string());
        ctx.out << "wrote " << traj.size() << " rows to " << (dir / "trajectory.csv").string() << '\n';
        return static_cast<int>(kExitOk);
    });
}

/// certificate.txt and certificates.csv; exit 0 iff the required condition
/// (esp or diff) holds on every region.
inline int cmd_certify(const RunConfig& base_cfg, const CommandOptions& opts = {}, const CommandContext& ctx = {}) {
    using namespace cmd_detail;
    return guarded(ctx, "certify", [&] {
        const RunConfig cfg = apply_overrides(base_cfg, opts);
        const Setup s = build_setup(cfg, true);
        const auto dir = prepare_out(cfg, "certify");
        const Trajectory traj = trajectory(s.system, s.initial, cfg.run.steps);

        CertifyOptions co;
        co.lipschitz = lipschitz_options(cfg);
        co.invariance.per_axis = cfg.run.grid;
        co.invariance.input_samples = cfg.run.input_samples;

        std::ofstream report(dir / "certificate.txt");
        std::ofstream csv(dir / "certificates.csv");
        if (!report || !csv) throw Error(ErrorCode::Config, "cannot write certificate files in " + dir.string());
        csv << "# tool: gsync " << GSYNC_VERSION << "\n# command: certify\n# require: " << cfg.run.require << '\n';
        csv << certificate_csv_header() << '\n';

        bool all = true;
        for (const auto& region : s.regions) {
            const auto cert = certify(s.state_map, region, s.system, s.observation, traj.points, co);
            write_report(report, cert);
            report << '\n';
            csv << certificate_csv_row(cert) << '\n';
            const bool holds = cfg.run.require == "diff" ? cert.diff_ok : cert.esp_ok;
            all = all && holds;
            ctx.out << region.label() << ": esp_ok=" << (cert.esp_ok ? "true" : "false")
                    << " diff_ok=" << (cert.diff_ok ? "true" : "false") << " L_Fx=" << format_number(cert.L_Fx())
                    << " invariance_ok=" << (cert.invariance.ok ? "true" : "false") << '\n';
        }
        ctx.out << "require " << cfg.run.require << ": " << (all ? "holds" : "fails") << '\n';
        return static_cast<int>(all ? kExitOk : kExitCondition);
    });
}

/// gs_<label>.csv (drive) and gs_<label>_psi.csv per region plus synchronize.txt.
inline int cmd_synchronize(const RunConfig& base_cfg, const CommandOptions& opts = {}, const CommandContext& ctx = {}) {
    using namespace cmd_detail;
    return guarded(ctx, "synchronize", [&] {
        const RunConfig cfg = apply_overrides(base_cfg, opts);
        const Setup s = build_setup(cfg, true);
        const auto dir = prepare_out(cfg, "synchronize");
        const auto& run = cfg.run;
        const bool drive = run.method != "psi";
        const bool psi = run.method != "drive";
        const auto names = phase_names(cfg, s.system.phase_dim());

        SweepOptions so;
        so.invariance.per_axis = run.grid;
        so.invariance.input_samples = run.input_samples;
        const SweepResult sweep = multistability_sweep(s.state_map, s.regions, s.system, s.observation, s.initial,
                                                       run.washout, run.record, so);
        const InputRange range = observed_range(s.observation, sweep.base->points);

        std::ostringstream rep;
        rep << "method: " << run.method << "\nwashout: " << run.washout << "\nrecord: " << run.record << '\n';
        int code = kExitOk;
        std::vector<SampledGS> drives;
        for (const auto& e : sweep.entries) {
            const std::string label = e.region.label();
            rep << "\n[" << label << "]\n";
            rep << "invariance_ok: " << (e.invariance.ok ? "true" : "false") << '\n';
            rep << "invariance_margin: " << format_number(e.invariance.margin) << '\n';
            if (e.error) {
                rep << "error: " << *e.error << '\n';
                ctx.err << "gsync synchronize: " << label << ": " << *e.error << '\n';
                code = kExitNumeric;
                continue;
            }
            const SampledGS& g = *e.gs;
            if (drive) {
                CsvTable t = gs_table(g, s.state_map, s.observation, names);
                stamp(t, "synchronize");
                t.save((dir / ("gs_" + label + ".csv")).string());
                rep << "drive_residual_max: " << format_number(g.residual.max) << '\n';
                drives.push_back(g);
            }
            if (psi) {
                PsiOptions po;
                po.tol = run.tol;
                po.max_iters = run.max_iters;
                po.washout = run.washout;
                po.contraction = lipschitz_bounds(s.state_map, e.region, range, lipschitz_options(cfg)).L_Fx();
                po.region = e.region;
                const SampledGS p = psi_iterate_gs(s.state_map, sweep.base, s.observation, e.region.center(), po);
                CsvTable t = gs_table(p, s.state_map, s.observation, names);
                stamp(t, "synchronize");
                t.save((dir / ("gs_" + label + "_psi.csv")).string());
                rep << "psi_iterations: " << p.psi->iterations << '\n';
                rep << "psi_converged: " << (p.psi->converged ? "true" : "false") << '\n';
                rep << "psi_predicted_iterations: "
                    << (p.psi->predicted_iterations ? std::to_string(*p.psi->predicted_iterations) : std::string("none")) << '\n';
                rep << "psi_final_change: " << format_number(p.psi->final_change) << '\n';
                rep << "psi_apriori_bound: " << format_number(p.psi->apriori_bound) << '\n';
                rep << "psi_residual_max: " << format_number(p.residual.max) << '\n';
                if (!p.psi->converged) {
                    ctx.err << "gsync synchronize: " << label << ": NoConvergence after " << p.psi->iterations << " sweeps\n";
                    code = kExitNumeric;
                }
                if (drive) {
                    const double d = compare_gs(g, p);
                    rep << "agreement: " << format_number(d) << '\n';
                    rep << "agreement_ok: " << (d <= run.agreement_tol ? "true" : "false") << '\n';
                    if (d > run.agreement_tol && code == kExitOk) code = kExitCondition;
                }
            }
        }
        rep << "\nregion_escapes: " << sweep.escapes << '\n';
        rep << "distinct_synchronizations: " << sweep.distinct << '\n';
        rep << "min_pairwise_separation: " << format_number(sweep.min_separation) << '\n';
        std::ofstream os(dir / "synchronize.txt");
        if (!os) throw Error(ErrorCode::Config, "cannot write synchronize.txt");
        os << rep.str();
        ctx.out << rep.str();
        return code;
    });
}

/// esp.csv, forgetting.csv, slopes.csv and diagnose.txt.
inline int cmd_diagnose(const RunConfig& base_cfg, const CommandOptions& opts = {}, const CommandContext& ctx = {}) {
    using namespace cmd_detail;
    return guarded(ctx, "diagnose", [&] {
        const RunConfig cfg = apply_overrides(base_cfg, opts);
        const Setup s = build_setup(cfg, true);
        const auto dir = prepare_out(cfg, "diagnose");
        const auto& run = cfg.run;
        auto base = std::make_shared<const Trajectory>(trajectory(s.system, s.initial, run.washout + run.record));
        const InputRange range = observed_range(s.observation, base->points);
        std::vector<Vector> inputs;
        for (std::size_t k = 1; k < base->size(); ++k) inputs.push_back(s.observation((*base)[k]));

        std::ostringstream rep;
        bool ok = true;

        std::vector<std::string> esp_cols{"t"};
        std::vector<std::vector<double>> esp_series;
        CsvTable forget({"region", "k", "trials", "max_distance", "bound", "within_bound"});
        CsvTable slopes({"region", "bin", "dm_lo", "dm_hi", "count", "median_slope", "max_slope"});
        stamp(forget, "diagnose");
        stamp(slopes, "diagnose");
        forget.meta("seed", std::to_string(run.seed));

        for (std::size_t r = 0; r < s.regions.size(); ++r) {
            const auto& region = s.regions[r];
            const std::string label = region.label();
            const double lfx = lipschitz_bounds(s.state_map, region, range, lipschitz_options(cfg)).L_Fx();
            rep << "[" << label << "]\nL_Fx: " << format_number(lfx) << '\n';
            forget.meta("region_" + std::to_string(r), label);
            slopes.meta("region_" + std::to_string(r), label);

            // Two initial states: the center and the far corner of the bounding box.
            const Vector xa = region.center();
            Vector xb = region.bounding_box().hi;
            if (!region.contains(xb)) xb = xa;
            const auto d = esp_convergence(s.state_map, inputs, xa, xb);
            const double ratio = max_contraction_ratio(d);
            rep << "esp_max_ratio: " << format_number(ratio) << '\n';
            rep << "esp_final_distance: " << format_number(d.back()) << '\n';
            if (ratio > lfx + 1e-6) ok = false;
            esp_cols.push_back("d_" + label);
            esp_series.push_back(d);

            ForgettingOptions fo;
            fo.prefix_length = run.prefix;
            fo.contraction = lfx;
            for (std::size_t k : run.forgetting_k) {
                fo.seed = run.seed + 1000003ULL * r + k;
                const auto f = input_forgetting(s.state_map, region, range, k, run.trials, fo);
                forget.row({static_cast<double>(r), static_cast<double>(k), static_cast<double>(run.trials), f.max_distance,
                            f.bound, f.within_bound() ? 1.0 : 0.0});
                rep << "forgetting_k" << k << ": " << format_number(f.max_distance) << " <= " << format_number(f.bound)
                    << (f.within_bound() ? "" : "  VIOLATED") << '\n';
                ok = ok && f.within_bound();
            }

            const SampledGS g = drive_gs(s.state_map, base, s.observation, xa, run.washout);
            try {
                ProfileOptions po;
                po.pairs.neighbors = run.neighbors;
                po.pairs.pair_budget = run.pair_budget;
                po.bins = run.bins;
                const auto prof = derivative_profile(g, po);
                for (std::size_t b = 0; b < prof.bins.size(); ++b) {
                    const auto& bin = prof.bins[b];
                    slopes.row({static_cast<double>(r), static_cast<double>(b), bin.dm_lo, bin.dm_hi,
                                static_cast<double>(bin.count), bin.median_slope, bin.max_slope});
                }
                rep << "slope_max: " << format_number(prof.max_slope) << '\n';
                rep << "slope_growth: " << format_number(prof.growth) << '\n';

                HolderOptions ho;
                ho.pairs.neighbors = run.holder_neighbors;
                ho.pairs.pair_budget = run.pair_budget;
                ho.window_decades = run.holder_decades;
                const auto h = holder_exponent(g, ho);
                rep << "holder_gamma: " << format_number(h.gamma) << '\n';
                rep << "holder_r2: " << format_number(h.r2) << '\n';
                rep << "holder_degenerate: " << (h.degenerate ? "true" : "false") << '\n';
                rep << "holder_pairs: " << h.pairs_used << '\n';
                rep << "holder_window: " << format_number(h.window_lo) << " .. " << format_number(h.window_hi) << '\n';
            } catch (const Error& e) {
                if (e.code() != ErrorCode::InsufficientPairs) throw;
                rep << "regularity: " << e.what() << '\n';
            }
            rep << '\n';
        }

        CsvTable esp(esp_cols);
        stamp(esp, "diagnose");
        esp.meta("x0a", "region center");
        esp.meta("x0b", "upper corner of the region bounding box");
        for (std::size_t t = 0; t < inputs.size() + 1; ++t) {
            std::vector<double> row{static_cast<double>(t)};
            for (const auto& series : esp_series) row.push_back(series[t]);
            esp.row(row);
        }
        esp.save((dir / "esp.csv").string());
        forget.save((dir / "forgetting.csv").string());
        slopes.save((dir / "slopes.csv").string());
        rep << "bounds_hold: " << (ok ? "true" : "false") << '\n';
        std::ofstream os(dir / "diagnose.txt");
        if (!os) throw Error(ErrorCode::Config, "cannot write diagnose.txt");
        os << rep.str();
        ctx.out << rep.str();
        return static_cast<int>(ok ? kExitOk : kExitCondition);
    });
}

namespace cmd_detail {

inline void fig1(const RunConfig& cfg, const Setup& s, const std::filesystem::path& dir) {
    const Trajectory traj = trajectory(s.system, s.initial, cfg.run.steps);
    std::vector<std::string> cols{"t"};
    for (auto& n : phase_names(cfg, s.system.phase_dim())) cols.push_back(n);
    CsvTable t(cols);
    stamp(t, "reproduce fig1");
    t.meta("figure", "trajectory of the driving system");
    t.meta("initial", format_vector(s.initial));
    t.meta("h", format_number(s.system.time_step()));
    for (std::size_t k = 0; k < traj.size(); ++k) {
        std::vector<double> row{traj.time(k)};
        for (Eigen::Index i = 0; i < traj[k].size(); ++i) row.push_back(traj[k](i));
        t.row(row);
    }
    t.save((dir / "fig1.csv").string());
}

inline void fig2(const RunConfig& cfg, const Setup& s, const std::filesystem::path& dir) {
    const Trajectory traj = trajectory(s.system, s.initial, cfg.run.washout + cfg.run.record);
    const Eigen::Index d = s.observation.obs_dim();
    std::vector<std::string> cols{"t"};
    for (Eigen::Index i = 0; i < d; ++i) cols.push_back(d == 1 ? "obs" : "obs" + std::to_string(i + 1));
    CsvTable t(cols);
    stamp(t, "reproduce fig2");
    t.meta("figure", "observed component after the washout");
    t.meta("observation", s.observation.name());
    for (std::size_t k = cfg.run.washout + 1; k < traj.size(); ++k) {
        std::vector<double> row{traj.time(k)};
        const Vector z = s.observation(traj[k]);
        for (Eigen::Index i = 0; i < d; ++i) row.push_back(z(i));
        t.row(row);
    }
    t.save((dir / "fig2.csv").string());
}

/// One-step displacement of the autonomous (lambda = 0) map on the x3 = 1 plane.
inline void fig3(const RunConfig& cfg, const std::filesystem::path& dir) {
    if (cfg.statemap.kind != "power_sine") throw Error(ErrorCode::Config, "fig3 needs statemap.kind = power_sine");
    const StateMap F0 = StateMap::power_sine(cfg.statemap.alpha, 0.0, cfg.statemap.k, PowerBranch::OddExtension);
    CsvTable t({"x1", "x2", "dx1", "dx2"});
    stamp(t, "reproduce fig3");
    t.meta("figure", "phase portrait of the autonomous map at x3 = 1");
    t.meta("alpha", format_number(cfg.statemap.alpha));
    t.meta("stable_fixed_points", "(1,1,1) (-1,1,1) (1,-1,1) (-1,-1,1)");
    const Vector z = Vector::Zero(1);
    for (double x1 : linspace(-1.5, 1.5, 31)) {
        for (double x2 : linspace(-1.5, 1.5, 31)) {
            const Vector x = (Vector(3) << x1, x2, 1.0).finished();
            const Vector y = F0.eval(x, z);
            t.row({x1, x2, y(0) - x1, y(1) - x2});
        }
    }
    t.save((dir / "fig3.csv").string());
}

inline void fig4(const RunConfig& cfg, const Setup& s, const std::filesystem::path& dir) {
    if (s.regions.size() < 2) throw Error(ErrorCode::Config, "fig4 needs two regions");
    auto base = std::make_shared<const Trajectory>(trajectory(s.system, s.initial, cfg.run.washout + cfg.run.record));
    const SampledGS a = drive_gs(s.state_map, base, s.observation, s.regions[0].center(), cfg.run.washout, s.regions[0]);
    const SampledGS b = drive_gs(s.state_map, base, s.observation, s.regions[1].center(), cfg.run.washout, s.regions[1]);
    const std::string la = s.regions[0].label();
    const std::string lb = s.regions[1].label();
    std::vector<std::string> cols{"t"};
    for (Eigen::Index i = 0; i < s.state_map.state_dim(); ++i) cols.push_back(la + "_x" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < s.state_map.state_dim(); ++i) cols.push_back(lb + "_x" + std::to_string(i + 1));
    CsvTable t(cols);
    stamp(t, "reproduce fig4");
    t.meta("figure", "images of the trajectory under two synchronization maps");
    t.meta(la + "_x0", format_vector(a.x0));
    t.meta(lb + "_x0", format_vector(b.x0));
    t.meta("washout", std::to_string(cfg.run.washout));
    for (std::size_t i = 0; i < a.size(); ++i) {
        std::vector<double> row{base->time(a.base_index(i))};
        for (Eigen::Index j = 0; j < a.values[i].size(); ++j) row.push_back(a.values[i](j));
        for (Eigen::Index j = 0; j < b.values[i].size(); ++j) row.push_back(b.values[i](j));
        t.row(row);
    }
    t.save((dir / "fig4.csv").string());
}

}  // namespace cmd_detail

/// fig1.csv .. fig4.csv; `figure` selects one of them (all four by default).
inline int cmd_reproduce(const RunConfig& base_cfg, const CommandOptions& opts = {}, const CommandContext& ctx = {}) {
    using namespace cmd_detail;
    return guarded(ctx, "reproduce", [&] {
        const RunConfig cfg = apply_overrides(base_cfg, opts);
        const std::string which = opts.figure.value_or("all");
        if (which != "all" && which != "fig1" && which != "fig2" && which != "fig3" && which != "fig4") {
            throw Error(ErrorCode::Config, "unknown figure " + which + " (expected fig1, fig2, fig3, fig4 or all)");
        }
        const Setup s = build_setup(cfg, which == "fig4" || which == "all");
        const auto dir = prepare_out(cfg, "reproduce");
        if (which == "all" || which == "fig1") fig1(cfg, s, dir);
        if (which == "all" || which == "fig2") fig2(cfg, s, dir);
        if (which == "all" || which == "fig3") fig3(cfg, dir);
        if (which == "all" || which == "fig4") fig4(cfg, s, dir);
        ctx.out << "wrote " << which << " to " << dir.string() << '\n';
        return static_cast<int>(kExitOk);
    });
}

}  // namespace gsync
