#pragma once

// Run configuration: a flat `key = value` file with dotted section keys
// (system.*, observation.*, statemap.*, region.N.*, run.*) and `#` comments.
// Vectors are comma or space separated; matrices list rows separated by `;`
// or come from a CSV file.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gsync/dynsys.hpp"
#include "gsync/error.hpp"
#include "gsync/io.hpp"
#include "gsync/observation.hpp"
#include "gsync/region.hpp"
#include "gsync/statemaps.hpp"

namespace gsync {

struct SystemSpec {
    std::string kind = "lorenz";  // lorenz | torus | cat
    double h = 0.01;
    int substeps = 1;
    bool printed_sign = false;
    Vector angles;
    Vector initial;
};

struct ObservationSpec {
    std::string kind = "coordinate";  // coordinate | projection | linear | sine_sum
    std::vector<Eigen::Index> indices{0};
    Matrix matrix;
};

struct StateMapSpec {
    std::string kind;  // power_sine | linear_delay | esn | constant
    double alpha = 0.9;
    double lambda = 0.009;
    double k = 0.1;
    PowerBranch branch = PowerBranch::OddExtension;
    int q = 3;
    Matrix A;
    Matrix C;
    Vector zeta;
    Squashing squashing = Squashing::Tanh;
    Vector value;
};

struct RegionSpec {
    std::string kind = "box";  // box | ball
    Vector lo, hi, center;
    double radius = 0.0;
    std::string label;
};

struct RunSpec {
    std::size_t steps = 4000;  // simulate / certify trajectory length
    std::size_t washout = 2000;
    std::size_t record = 2000;
    std::string method = "drive";  // drive | psi | both
    double tol = 1e-12;
    std::size_t max_iters = 10000;
    double agreement_tol = 1e-8;
    std::size_t grid = 20;
    std::size_t input_samples = 200;
    std::uint64_t seed = 1;
    std::string require = "esp";  // esp | diff
    std::vector<std::size_t> forgetting_k{1, 5, 20, 100, 200};
    std::size_t trials = 100;
    std::size_t prefix = 50;
    std::size_t pair_budget = 100000;
    std::size_t neighbors = 20;
    std::size_t holder_neighbors = 40;
    double holder_decades = 1.0;
    std::size_t bins = 5;
    std::string out = "out";
};

struct RunConfig {
    SystemSpec system;
    ObservationSpec observation;
    StateMapSpec statemap;
    std::vector<RegionSpec> regions;
    RunSpec run;
    std::filesystem::path source;  // config file location, for relative CSV paths
};

namespace config_detail {

[[nodiscard]] inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[nodiscard]] inline Error config_error(const std::string& msg) { return Error(ErrorCode::Config, msg); }

[[nodiscard]] inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (trim(v.substr(pos)).empty()) return x;
    } catch (const std::exception&) {
    }
    throw config_error(key + ": expected a number, got '" + v + "'");
}

[[nodiscard]] inline std::size_t to_count(const std::string& key, const std::string& v) {
    const double x = to_double(key, v);
    if (!(x >= 0.0) || x != std::floor(x) || x > 1e15) throw config_error(key + ": expected a nonnegative integer");
    return static_cast<std::size_t>(x);
}

[[nodiscard]] inline std::vector<double> to_list(const std::string& key, std::string v) {
    std::replace(v.begin(), v.end(), ',', ' ');
    std::istringstream is(v);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) out.push_back(to_double(key, tok));
    return out;
}

[[nodiscard]] inline Vector to_vector(const std::string& key, const std::string& v) {
    const auto xs = to_list(key, v);
    if (xs.empty()) throw config_error(key + ": empty vector");
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

[[nodiscard]] inline Matrix rows_to_matrix(const std::string& key, const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) throw config_error(key + ": empty matrix");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) throw config_error(key + ": ragged matrix rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

[[nodiscard]] inline Matrix to_matrix(const std::string& key, const std::string& v) {
    std::vector<std::vector<double>> rows;
    std::istringstream is(v);
    std::string row;
    while (std::getline(is, row, ';')) {
        if (!trim(row).empty()) rows.push_back(to_list(key, row));
    }
    return rows_to_matrix(key, rows);
}

[[nodiscard]] inline Matrix load_csv_matrix(const std::string& key, const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw config_error(key + ": cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        rows.push_back(to_list(key, line));
    }
    return rows_to_matrix(key, rows);
}

[[nodiscard]] inline std::string matrix_text(const Matrix& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (i) out += "; ";
        out += format_vector(m.row(i).transpose(), ',');
    }
    return out;
}

[[nodiscard]] inline std::string list_text(const Vector& v) { return format_vector(v, ','); }

[[nodiscard]] inline std::vector<RegionSpec> lorenz_boxes() {
    // Fixed points of x -> sign(x)|x|^alpha, in the customary order.
    const double c[8][3] = {{1, 1, 1},  {-1, 1, 1},  {1, -1, 1},  {1, 1, -1},
                            {-1, -1, 1}, {-1, 1, -1}, {1, -1, -1}, {-1, -1, -1}};
    std::vector<RegionSpec> out;
    for (int i = 0; i < 8; ++i) {
        RegionSpec r;
        r.kind = "box";
        r.lo = Vector(3);
        r.hi = Vector(3);
        for (int j = 0; j < 3; ++j) {
            r.lo(j) = c[i][j] - 0.1;
            r.hi(j) = c[i][j] + 0.1;
        }
        r.label = "V" + std::to_string(i + 1);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace config_detail

/// Parses `key = value` lines; duplicate keys are rejected.
[[nodiscard]] inline std::map<std::string, std::string> parse_key_values(std::istream& is) {
    using namespace config_detail;
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw config_error("line " + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, trim(line.substr(eq + 1))).second) throw config_error("duplicate key " + key);
    }
    return kv;
}

/// Builds a RunConfig from parsed keys; unknown keys are errors.
[[nodiscard]] inline RunConfig resolve_config(const std::map<std::string, std::string>& kv,
                                              const std::filesystem::path& source = {}) {
    using namespace config_detail;
    RunConfig cfg;
    cfg.source = source;
    const auto base_dir = source.empty() ? std::filesystem::path(".") : source.parent_path();
    const auto path_of = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_absolute() ? p : base_dir / p;
    };

    std::map<std::size_t, std::map<std::string, std::string>> region_keys;
    std::optional<std::string> preset;

    for (const auto& [key, v] : kv) {
        auto& s = cfg.system;
        auto& o = cfg.observation;
        auto& f = cfg.statemap;
        auto& r = cfg.run;
        if (key == "system.kind") s.kind = v;
        else if (key == "system.h") s.h = to_double(key, v);
        else if (key == "system.substeps") s.substeps = static_cast<int>(to_count(key, v));
        else if (key == "system.sign") {
            if (v != "standard" && v != "printed") throw config_error(key + ": expected standard or printed");
            s.printed_sign = v == "printed";
        } else if (key == "system.angles") s.angles = to_vector(key, v);
        else if (key == "system.initial") s.initial = to_vector(key, v);
        else if (key == "observation.kind") o.kind = v;
        else if (key == "observation.indices") {
            o.indices.clear();
            for (double x : to_list(key, v)) {
                if (x < 0 || x != std::floor(x)) throw config_error(key + ": indices must be nonnegative integers");
                o.indices.push_back(static_cast<Eigen::Index>(x));
            }
        } else if (key == "observation.matrix") o.matrix = to_matrix(key, v);
        else if (key == "observation.matrix_csv") o.matrix = load_csv_matrix(key, path_of(v));
        else if (key == "statemap.kind") f.kind = v;
        else if (key == "statemap.alpha") f.alpha = to_double(key, v);
        else if (key == "statemap.lambda") f.lambda = to_double(key, v);
        else if (key == "statemap.k") f.k = to_double(key, v);
        else if (key == "statemap.branch") {
            if (v == "odd") f.branch = PowerBranch::OddExtension;
            else if (v == "positive") f.branch = PowerBranch::PositiveOnly;
            else throw config_error(key + ": expected odd or positive");
        } else if (key == "statemap.q") f.q = static_cast<int>(to_count(key, v));
        else if (key == "statemap.A") f.A = to_matrix(key, v);
        else if (key == "statemap.A_csv") f.A = load_csv_matrix(key, path_of(v));
        else if (key == "statemap.C") f.C = to_matrix(key, v);
        else if (key == "statemap.C_csv") f.C = load_csv_matrix(key, path_of(v));
        else if (key == "statemap.zeta") f.zeta = to_vector(key, v);
        else if (key == "statemap.squashing") {
            if (v == "tanh") f.squashing = Squashing::Tanh;
            else if (v == "logistic") f.squashing = Squashing::Logistic;
            else if (v == "identity") f.squashing = Squashing::Identity;
            else throw config_error(key + ": expected tanh, logistic or identity");
        } else if (key == "statemap.value") f.value = to_vector(key, v);
        else if (key == "regions.preset") preset = v;
        else if (key.rfind("region.", 0) == 0) {
            const auto dot = key.find('.', 7);
            if (dot == std::string::npos) throw config_error("malformed region key " + key);
            region_keys[to_count(key, key.substr(7, dot - 7))][key.substr(dot + 1)] = v;
        } else if (key == "run.steps") r.steps = to_count(key, v);
        else if (key == "run.washout") r.washout = to_count(key, v);
        else if (key == "run.record") r.record = to_count(key, v);
        else if (key == "run.method") r.method = v;
        else if (key == "run.tol") r.tol = to_double(key, v);
        else if (key == "run.max_iters") r.max_iters = to_count(key, v);
        else if (key == "run.agreement_tol") r.agreement_tol = to_double(key, v);
        else if (key == "run.grid") r.grid = to_count(key, v);
        else if (key == "run.input_samples") r.input_samples = to_count(key, v);
        else if (key == "run.seed") r.seed = static_cast<std::uint64_t>(to_count(key, v));
        else if (key == "run.require") r.require = v;
        else if (key == "run.forgetting_k") {
            r.forgetting_k.clear();
            for (double x : to_list(key, v)) r.forgetting_k.push_back(to_count(key, format_number(x)));
        } else if (key == "run.trials") r.trials = to_count(key, v);
        else if (key == "run.prefix") r.prefix = to_count(key, v);
        else if (key == "run.pair_budget") r.pair_budget = to_count(key, v);
        else if (key == "run.neighbors") r.neighbors = to_count(key, v);
        else if (key == "run.holder_neighbors") r.holder_neighbors = to_count(key, v);
        else if (key == "run.holder_decades") r.holder_decades = to_double(key, v);
        else if (key == "run.bins") r.bins = to_count(key, v);
        else if (key == "run.out") r.out = v;
        else throw config_error("unknown key " + key);
    }

    if (preset) {
        if (*preset != "lorenz_boxes") throw config_error("regions.preset: unknown preset " + *preset);
        cfg.regions = lorenz_boxes();
    }
    for (const auto& [index, rk] : region_keys) {
        RegionSpec reg;
        for (const auto& [k, v] : rk) {
            const std::string key = "region." + std::to_string(index) + "." + k;
            if (k == "kind") reg.kind = v;
            else if (k == "lo") reg.lo = to_vector(key, v);
            else if (k == "hi") reg.hi = to_vector(key, v);
            else if (k == "center") reg.center = to_vector(key, v);
            else if (k == "radius") reg.radius = to_double(key, v);
            else if (k == "label") reg.label = v;
            else throw config_error("unknown key " + key);
        }
        if (reg.label.empty()) reg.label = "R" + std::to_string(index);
        cfg.regions.push_back(std::move(reg));
    }
    return cfg;
}

[[nodiscard]] inline DiscreteSystem build_system(const RunConfig& cfg) {
    const auto& s = cfg.system;
    if (s.kind == "lorenz") {
        LorenzParams p;
        p.printed_sign = s.printed_sign;
        return DiscreteSystem::lorenz(s.h, s.substeps, p);
    }
    if (s.kind == "torus") return DiscreteSystem::torus_rotation(s.angles);
    if (s.kind == "cat") return DiscreteSystem::cat_map();
    throw Error(ErrorCode::Config, "system.kind: unknown system " + s.kind);
}

[[nodiscard]] inline Vector initial_point(const RunConfig& cfg, const DiscreteSystem& sys) {
    if (cfg.system.initial.size() > 0) return cfg.system.initial;
    if (cfg.system.kind == "lorenz") return (Vector(3) << 0.0, 1.0, 1.05).finished();
    return Vector::Constant(sys.phase_dim(), 0.1);
}

[[nodiscard]] inline ObservationMap build_observation(const RunConfig& cfg) {
    const auto& o = cfg.observation;
    if (o.kind == "coordinate") {
        if (o.indices.size() != 1) throw Error(ErrorCode::Config, "observation.indices: coordinate needs one index");
        return ObservationMap::coordinate(o.indices.front());
    }
    if (o.kind == "projection") return ObservationMap::projection(o.indices);
    if (o.kind == "sine_sum") return ObservationMap::sine_sum(o.indices);
    if (o.kind == "linear") {
        if (o.matrix.size() == 0) throw Error(ErrorCode::Config, "observation.matrix is required for linear observations");
        return ObservationMap::linear(o.matrix);
    }
    throw Error(ErrorCode::Config, "observation.kind: unknown observation " + o.kind);
}

[[nodiscard]] inline StateMap build_state_map(const RunConfig& cfg, Eigen::Index input_dim) {
    const auto& f = cfg.statemap;
    if (f.kind == "power_sine") return StateMap::power_sine(f.alpha, f.lambda, f.k, f.branch);
    if (f.kind == "linear_delay") return StateMap::linear_delay(f.q);
    if (f.kind == "constant") {
        if (f.value.size() == 0) throw Error(ErrorCode::Config, "statemap.value is required for constant maps");
        return StateMap::constant(f.value, input_dim);
    }
    if (f.kind == "esn") {
        if (f.A.size() == 0 || f.C.size() == 0) throw Error(ErrorCode::Config, "statemap.A and statemap.C are required for esn");
        const Vector zeta = f.zeta.size() ? f.zeta : Vector::Zero(f.A.rows());
        return StateMap::esn(f.A, f.C, zeta, f.squashing);
    }
    if (f.kind.empty()) throw Error(ErrorCode::Config, "statemap.kind is required");
    throw Error(ErrorCode::Config, "statemap.kind: unknown state map " + f.kind);
}

[[nodiscard]] inline InvariantRegion build_region(const RegionSpec& r) {
    if (r.kind == "box") {
        if (r.lo.size() == 0 || r.hi.size() == 0) throw Error(ErrorCode::Config, "region " + r.label + ": box needs lo and hi");
        return InvariantRegion::box(r.lo, r.hi, r.label);
    }
    if (r.kind == "ball") {
        if (r.center.size() == 0) throw Error(ErrorCode::Config, "region " + r.label + ": ball needs a center");
        return InvariantRegion::ball(r.center, r.radius, r.label);
    }
    throw Error(ErrorCode::Config, "region " + r.label + ": unknown kind " + r.kind);
}

/// Everything a command needs, cross-validated before any computation.
struct Setup {
    DiscreteSystem system;
    ObservationMap observation;
    StateMap state_map;
    std::vector<InvariantRegion> regions;
    Vector initial;
};

[[nodiscard]] inline Setup build_setup(const RunConfig& cfg, bool need_regions) {
    const auto fail = [](const std::string& m) { return Error(ErrorCode::Config, m); };
    try {
        DiscreteSystem sys = build_system(cfg);
        ObservationMap omega = build_observation(cfg);
        const Vector m0 = initial_point(cfg, sys);
        if (m0.size() != sys.phase_dim()) throw fail("system.initial has the wrong dimension");
        const Vector z0 = omega(m0);  // validates observation indices / matrix width
        StateMap F = build_state_map(cfg, z0.size());
        if (F.input_dim() != z0.size()) {
            throw fail("state map expects " + std::to_string(F.input_dim()) + " inputs, observation gives " +
                       std::to_string(z0.size()));
        }
        std::vector<InvariantRegion> regions;
        for (const auto& r : cfg.regions) {
            regions.push_back(build_region(r));
            if (regions.back().dim() != F.state_dim()) throw fail("region " + r.label + " has the wrong dimension");
        }
        if (need_regions && regions.empty()) throw fail("at least one region is required");
        const auto& run = cfg.run;
        if (run.method != "drive" && run.method != "psi" && run.method != "both") throw fail("run.method: expected drive, psi or both");
        if (run.require != "esp" && run.require != "diff") throw fail("run.require: expected esp or diff");
        if (run.record < 2) throw fail("run.record must be at least 2");
        if (run.steps < 1) throw fail("run.steps must be at least 1");
        if (!(run.tol > 0.0)) throw fail("run.tol must be positive");
        return Setup{std::move(sys), std::move(omega), std::move(F), std::move(regions), m0};
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Config) throw;
        throw fail(std::string("invalid configuration: ") + e.what());
    }
}

[[nodiscard]] inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::Config, "cannot open config " + path.string());
    return resolve_config(parse_key_values(is), path);
}

[[nodiscard]] inline RunConfig parse_config(const std::string& text) {
    std::istringstream is(text);
    return resolve_config(parse_key_values(is));
}

/// Canonical form: every key spelled out, matrices inlined, presets expanded.
inline void write_config(std::ostream& os, const RunConfig& cfg) {
    using namespace config_detail;
    const auto kv = [&](const std::string& k, const std::string& v) { os << k << " = " << v << '\n'; };
    const auto& s = cfg.system;
    kv("system.kind", s.kind);
    kv("system.h", format_number(s.h));
    kv("system.substeps", std::to_string(s.substeps));
    kv("system.sign", s.printed_sign ? "printed" : "standard");
    if (s.angles.size()) kv("system.angles", list_text(s.angles));
    if (s.initial.size()) kv("system.initial", list_text(s.initial));

    const auto& o = cfg.observation;
    kv("observation.kind", o.kind);
    if (o.kind == "linear") {
        kv("observation.matrix", matrix_text(o.matrix));
    } else {
        std::string idx;
        for (std::size_t i = 0; i < o.indices.size(); ++i) idx += (i ? "," : "") + std::to_string(o.indices[i]);
        kv("observation.indices", idx);
    }

    const auto& f = cfg.statemap;
    kv("statemap.kind", f.kind);
    if (f.kind == "power_sine") {
        kv("statemap.alpha", format_number(f.alpha));
        kv("statemap.lambda", format_number(f.lambda));
        kv("statemap.k", format_number(f.k));
        kv("statemap.branch", f.branch == PowerBranch::OddExtension ? "odd" : "positive");
    } else if (f.kind == "linear_delay") {
        kv("statemap.q", std::to_string(f.q));
    } else if (f.kind == "esn") {
        kv("statemap.A", matrix_text(f.A));
        kv("statemap.C", matrix_text(f.C));
        if (f.zeta.size()) kv("statemap.zeta", list_text(f.zeta));
        kv("statemap.squashing", to_string(f.squashing));
    } else if (f.kind == "constant") {
        kv("statemap.value", list_text(f.value));
    }

    for (std::size_t i = 0; i < cfg.regions.size(); ++i) {
        const auto& r = cfg.regions[i];
        const std::string p = "region." + std::to_string(i + 1) + ".";
        kv(p + "kind", r.kind);
        kv(p + "label", r.label);
        if (r.kind == "box") {
            kv(p + "lo", list_text(r.lo));
            kv(p + "hi", list_text(r.hi));
        } else {
            kv(p + "center", list_text(r.center));
            kv(p + "radius", format_number(r.radius));
        }
    }

    const auto& r = cfg.run;
    kv("run.steps", std::to_string(r.steps));
    kv("run.washout", std::to_string(r.washout));
    kv("run.record", std::to_string(r.record));
    kv("run.method", r.method);
    kv("run.tol", format_number(r.tol));
    kv("run.max_iters", std::to_string(r.max_iters));
    kv("run.agreement_tol", format_number(r.agreement_tol));
    kv("run.grid", std::to_string(r.grid));
    kv("run.input_samples", std::to_string(r.input_samples));
    kv("run.seed", std::to_string(r.seed));
    kv("run.require", r.require);
    std::string ks;
    for (std::size_t i = 0; i < r.forgetting_k.size(); ++i) ks += (i ? "," : "") + std::to_string(r.forgetting_k[i]);
    kv("run.forgetting_k", ks);
    kv("run.trials", std::to_string(r.trials));
    kv("run.prefix", std::to_string(r.prefix));
    kv("run.pair_budget", std::to_string(r.pair_budget));
    kv("run.neighbors", std::to_string(r.neighbors));
    kv("run.holder_neighbors", std::to_string(r.holder_neighbors));
    kv("run.holder_decades", format_number(r.holder_decades));
    kv("run.bins", std::to_string(r.bins));
    kv("run.out", r.out);
}

[[nodiscard]] inline std::string config_text(const RunConfig& cfg) {
    std::ostringstream os;
    write_config(os, cfg);
    return os.str();
}

}  // namespace gsync
