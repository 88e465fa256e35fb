#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "gsync/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generalized synchronization toolkit: simulate, certify, synchronize, diagnose, reproduce"};
    app.set_version_flag("--version", std::string("gsync ") + GSYNC_VERSION);
    app.require_subcommand(1, 1);

    std::string config_path;
    gsync::CommandOptions opts;
    std::string out;
    std::uint64_t seed = 0;
    std::string require;
    std::string method;
    std::string figure;

    const auto common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", config_path, "Run configuration file")->check(CLI::ExistingFile);
        if (config_required) c->required();
        sub->add_option("--out", out, "Output directory (overrides run.out)");
        sub->add_option("--seed", seed, "Random seed (overrides run.seed)");
    };

    auto* simulate = app.add_subcommand("simulate", "Write the driving trajectory and its observations");
    common(simulate, true);
    auto* certify = app.add_subcommand("certify", "Contraction certificate for every region");
    common(certify, true);
    certify->add_option("--require", require, "Condition that decides the exit code")->check(CLI::IsMember({"esp", "diff"}));
    auto* synchronize = app.add_subcommand("synchronize", "Sample the synchronization map on every region");
    common(synchronize, true);
    synchronize->add_option("--method", method, "Construction method")->check(CLI::IsMember({"drive", "psi", "both"}));
    auto* diagnose = app.add_subcommand("diagnose", "ESP, input-forgetting and regularity diagnostics");
    common(diagnose, true);
    auto* reproduce = app.add_subcommand("reproduce", "Figure data for the Lorenz example");
    common(reproduce, false);
    reproduce->add_option("--figure", figure, "fig1, fig2, fig3, fig4 or all")
        ->check(CLI::IsMember({"fig1", "fig2", "fig3", "fig4", "all"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : gsync::kExitConfig;
    }

    if (!out.empty()) opts.out = out;
    if (!require.empty()) opts.require = require;
    if (!method.empty()) opts.method = method;
    if (!figure.empty()) opts.figure = figure;

    gsync::RunConfig cfg;
    try {
        cfg = config_path.empty() ? gsync::lorenz_power_sine_config() : gsync::load_config(config_path);
    } catch (const gsync::Error& e) {
        std::cerr << "gsync: " << e.what() << '\n';
        return gsync::kExitConfig;
    }

    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed") > 0) opts.seed = seed;
    const std::string name = sub->get_name();
    if (name == "simulate") return gsync::cmd_simulate(cfg, opts);
    if (name == "certify") return gsync::cmd_certify(cfg, opts);
    if (name == "synchronize") return gsync::cmd_synchronize(cfg, opts);
    if (name == "diagnose") return gsync::cmd_diagnose(cfg, opts);
    return gsync::cmd_reproduce(cfg, opts);
}
