#include <iostream>
#include <utility>

#include "CLI11.hpp"
#include "stabcert/cli/run.hpp"

int main(int argc, char** argv) {
    using stabcert::cli::CliOptions;
    CLI::App app{"Stability certificates for dissipative evolution equations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(stabcert::cli::kVersion));

    CliOptions opts;
    std::uint64_t seed = 0;
    double rel_tol = 0.0;
    bool no_timestamp = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "override the configured seed");
        sub->add_option("--rel-tol", rel_tol, "override the integrator tolerance");
    };
    const std::pair<const char*, const char*> commands[] = {
        {"certify", "check the closed-form conditions and write certificate.json"},
        {"simulate", "integrate one system and check |u| against the envelope"},
        {"sweep", "seeded Monte Carlo over certified instances"},
        {"levinson", "asymptotic matching for an L1-perturbed constant system"},
        {"oracle", "integrate the scalar comparison equation"},
    };
    for (const auto& [name, about] : commands) {
        CLI::App* sub = app.add_subcommand(name, about);
        sub->add_option("--config", opts.config_path, "TOML config (or certificate JSON for certify)")
            ->required()
            ->check(CLI::ExistingFile);
        add_common(sub);
        if (std::string_view(name) == "sweep") sub->add_option("--jobs", opts.jobs, "worker threads (0 = all cores)");
        if (std::string_view(name) == "simulate") sub->add_flag("--write-states", opts.write_states, "also write states.csv");
    }
    CLI::App* plot = app.add_subcommand("plot", "render an SVG from a trajectory or matching CSV");
    plot->add_option("--csv", opts.csv_path, "trajectory.csv or matching.csv")->required()->check(CLI::ExistingFile);
    plot->add_option("--kind", opts.kind, "norm | matching")->capture_default_str();
    plot->add_option("--certificate", opts.certificate_path, "certificate.json (needed for norm)")->check(CLI::ExistingFile);
    plot->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    plot->add_flag("--no-timestamp", no_timestamp, "omit the generation time from the SVG");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        (void)app.exit(e);
        return 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    opts.command = sub->get_name();
    if (const CLI::Option* o = sub->get_option_no_throw("--seed"); o != nullptr && o->count() > 0) opts.seed = seed;
    if (const CLI::Option* o = sub->get_option_no_throw("--rel-tol"); o != nullptr && o->count() > 0)
        opts.rel_tol = rel_tol;
    opts.timestamp = !no_timestamp;
    return stabcert::cli::execute(opts, std::cout, std::cerr);
}
