#include "stabcert/cli/run.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "stabcert/asymptotic.hpp"
#include "stabcert/certificate.hpp"
#include "stabcert/cli/config.hpp"
#include "stabcert/cli/plot.hpp"
#include "stabcert/cli/sweep.hpp"
#include "stabcert/comparison.hpp"
#include "stabcert/errors.hpp"
#include "stabcert/evolution.hpp"
#include "stabcert/format.hpp"

namespace stabcert::cli {

namespace {

using nlohmann::json;

class Artifacts {
public:
    explicit Artifacts(std::string dir) : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& text) {
        const std::string path = dir_ + "/" + name;
        write_text_file(path, text);
        paths_.push_back(path);
    }
    void write(const std::string& name, const json& doc) { write(name, doc.dump(2) + "\n"); }

    void manifest(std::string_view command, std::string_view input, std::uint64_t seed) const {
        json doc;
        doc["command"] = command;
        doc["config_hash"] = sha256_hex(input);
        doc["seed"] = seed;
        doc["version"] = kVersion;
        doc["artifacts"] = paths_;
        write_text_file(dir_ + "/manifest.json", doc.dump(2) + "\n");
    }

private:
    std::string dir_;
    std::vector<std::string> paths_;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json dominance_json(const DominanceResult& d) {
    return {{"pass", d.pass}, {"max_product", d.max_product}, {"at", d.at}};
}

// Each command returns 0 or 2; input problems surface as exceptions.

int run_certify(const RunConfig& cfg, Artifacts& art, std::ostream& out) {
    const Certificate cert = build_certificate(cfg);
    art.write("certificate.json", to_json(cert));
    out << "certificate " << (cert.valid ? "valid" : "invalid") << " (branch " << to_string(cert.branch)
        << ", regime " << to_string(cert.regime) << ")\n";
    for (const auto& c : cert.checks) {
        out << "  " << (c.pass ? "pass" : "FAIL") << "  " << to_string(c.id) << ": " << c.text << "  ["
            << shortest(c.lhs) << (c.strict ? " < " : " <= ") << shortest(c.rhs) << "]\n";
    }
    return 0;
}

int run_simulate(RunConfig cfg, Artifacts& art, std::ostream& out) {
    const auto& s = cfg.system;
    Eigen::VectorXd u0;
    if (s.u0) {
        u0 = Eigen::Map<const Eigen::VectorXd>(s.u0->data(), static_cast<Eigen::Index>(s.u0->size()));
        if (cfg.g0 != 0.0 && std::abs(u0.norm() - cfg.g0) > 1e-12 * cfg.g0)
            throw ParameterError("[bound] g0 differs from |u0| in [system]");
        cfg.g0 = u0.norm();
    } else {
        u0 = random_state(s.dim, cfg.g0, cfg.seed);
        if (cfg.g0 == 0.0) u0.setZero();
    }

    SystemSpec spec;
    spec.dim = s.dim;
    spec.gamma = resolved_gamma(cfg);
    spec.omega = s.omega;
    spec.skew_seed = s.skew_seed;
    using K = Nonlinearity::Kind;
    switch (s.nonlinearity) {
        case K::None: spec.nonlinearity = Nonlinearity::none(); break;
        case K::Radial: spec.nonlinearity = Nonlinearity::radial(cfg.bound.c0, cfg.bound.p); break;
        case K::Rotated:
            spec.nonlinearity = Nonlinearity::rotated(cfg.bound.c0, cfg.bound.p, s.rotation_seed);
            break;
        case K::Truncated:
            spec.nonlinearity = Nonlinearity::truncated(cfg.bound.c0, cfg.bound.p, s.truncate_at);
            break;
        case K::Custom: throw ParameterError("custom nonlinearities cannot be configured from a file");
    }
    const TimeVaryingSystem system = build_system(spec);

    SimulateOptions opt;
    opt.rel_tol = cfg.rel_tol;
    opt.report_points = cfg.report_points;
    opt.rotating_frame = s.rotating_frame;
    const Trajectory traj = simulate(system, u0, cfg.T, opt);
    art.write("trajectory.csv", norms_csv(traj));
    if (cfg.write_states) art.write("states.csv", states_csv(traj));

    json check;
    check["final_time"] = traj.times.back();
    check["final_norm"] = traj.norms.back();
    check["final_log_norm"] = traj.log_norms.back();
    check["diagnostics"] = {{"steps_accepted", traj.diagnostics.steps_accepted},
                            {"renormalizations", traj.diagnostics.renormalizations},
                            {"steps_rejected", traj.diagnostics.steps_rejected},
                            {"min_step", traj.diagnostics.min_step},
                            {"truncated", traj.diagnostics.truncated},
                            {"rotating_frame", traj.diagnostics.rotating_frame},
                            {"message", traj.diagnostics.message}};
    check["hypothesis_verified"] = system.hypothesis_verified();

    int status = 0;
    if (!spec.gamma.is_power_law()) {
        check["checked"] = false;
        check["reason"] = "tabulated gamma carries no closed-form certificate";
    } else {
        const Certificate cert = certify(spec.gamma, cfg.bound, cfg.g0, cfg.mu0);
        art.write("certificate.json", to_json(cert));
        check["certificate_valid"] = cert.valid;
        if (!cert.valid) {
            check["checked"] = false;
            check["reason"] = "certificate is invalid; envelope check refused";
        } else {
            const DominanceResult dom = verify_trajectory_envelope(traj, cert);
            check["checked"] = true;
            check.update(dominance_json(dom));
            if (!dom.pass) status = 2;
            out << "envelope check " << (dom.pass ? "passed" : "FAILED") << ": max |u| mu = " << shortest(dom.max_product)
                << " at t = " << shortest(dom.at) << "\n";
        }
    }
    out << "final |u(" << shortest(traj.times.back()) << ")| = " << shortest(traj.norms.back()) << "\n";
    art.write("envelope_check.json", check);
    return status;
}

int run_oracle(const RunConfig& cfg, Artifacts& art, std::ostream& out) {
    const GammaModel gamma = resolved_gamma(cfg);
    const double a = cfg.oracle.a.value_or(cfg.bound.c0);
    const ScalarProblem problem{
        gamma, constant_function(a),
        cfg.oracle.beta > 0.0 ? ForcingBound(constant_function(cfg.oracle.beta)) : ForcingBound(), cfg.bound.p,
        cfg.g0};

    ScalarOptions opt;
    opt.blowup_threshold = cfg.oracle.blowup_threshold;
    opt.underflow_factor = cfg.oracle.underflow_factor;
    opt.report_times = log_report_times(cfg.T, cfg.report_points);
    const ScalarTrajectory traj = integrate_scalar(problem, cfg.T, cfg.rel_tol, opt);
    art.write("scalar.csv", to_csv(traj));
    art.write("scalar.json", sidecar_json(traj));

    json dom_doc;
    dom_doc["status"] = traj.status == ScalarStatus::Completed ? "Completed" : "BlowUp";
    bool certified = false;
    std::optional<Certificate> cert;
    if (gamma.is_power_law()) {
        cert = certify(gamma, {a, cfg.bound.p}, cfg.g0, cfg.mu0);
        certified = cert->valid;
        dom_doc["certificate_valid"] = cert->valid;
        if (certified && cfg.oracle.beta > 0.0) {
            // the closed-form ledger ignores forcing; check the general condition directly
            const auto general = verify_general_mu(
                canonical_mu_spec(cert->mu0, gamma, constant_function(a), problem.beta, cfg.bound.p));
            dom_doc["general_condition"] = {{"pass", general.pass},
                                            {"margin", general.margin},
                                            {"worst_t", general.worst_t},
                                            {"horizon", general.horizon}};
            certified = general.pass;
        }
    } else {
        dom_doc["certificate_valid"] = false;
    }
    int status = 0;
    if (!certified) {
        dom_doc["checked"] = false;
        dom_doc["reason"] = "no valid certificate for this problem; dominance check refused";
    } else {
        try {
            const DominanceResult dom = check_dominance(traj, *cert);
            dom_doc["checked"] = true;
            dom_doc.update(dominance_json(dom));
            if (!dom.pass) status = 2;
        } catch (const InvariantViolation& e) {
            dom_doc["checked"] = true;
            dom_doc["violation"] = e.what();
            art.write("dominance.json", dom_doc);
            throw;
        }
    }
    art.write("dominance.json", dom_doc);
    out << "scalar oracle: " << dom_doc["status"].get<std::string>() << ", g(" << shortest(traj.times.back())
        << ") = " << shortest(traj.values.back()) << "\n";
    return status;
}

int run_sweep_command(const RunConfig& cfg, Artifacts& art, std::size_t jobs, std::ostream& out) {
    const auto rows = run_sweep(cfg.sweep, cfg.seed, jobs);
    art.write("sweep.csv", sweep_csv(rows));
    std::size_t valid = 0, checked = 0, violations = 0;
    double worst = 0.0;
    for (const auto& r : rows) {
        valid += r.valid ? 1 : 0;
        if (r.checked) {
            ++checked;
            if (!r.dominance_pass) ++violations;
            worst = std::max(worst, r.max_product);
        }
    }
    json summary = {{"instances", rows.size()},
                    {"valid", valid},
                    {"checked", checked},
                    {"violations", violations},
                    {"max_product", worst}};
    art.write("sweep_summary.json", summary);
    out << "sweep: " << rows.size() << " instances, " << checked << " checked, " << violations
        << " envelope violations, max |u| mu = " << shortest(worst) << "\n";
    return violations == 0 ? 0 : 2;
}

int run_levinson(const RunConfig& cfg, Artifacts& art, std::ostream& out) {
    const LevinsonConfig& l = *cfg.levinson;
    const auto n = l.a.rows();
    Perturbation b = l.family == "zero"    ? Perturbation::zero(static_cast<std::size_t>(n))
                     : l.family == "power" ? Perturbation::power_decay(l.r, l.rate)
                                           : Perturbation::exp_decay(l.r, l.rate);
    const PerturbedSystem sys(l.a, std::move(b), l.c);
    const Eigen::VectorXd u0 = Eigen::Map<const Eigen::VectorXd>(l.u0.data(), n);
    LevinsonOptions opt;
    opt.tol = l.tol;
    opt.t_start = l.t_start;
    opt.t_max = l.t_max;
    const MatchedPair pair = levinson_match(sys, u0, opt);
    for (double t : l.sample_times)
        if (!(t >= 0.0 && t <= pair.t_max())) throw ParameterError("sample times must lie in [0, t_max]");
    constexpr double kRatioTol = 1e-6;
    const MatchingReport report = matching_error_report(pair, l.sample_times, kRatioTol);
    art.write("matching.csv", matching_csv(report));

    std::vector<double> grid;
    for (int k = 0; k <= 200; ++k) grid.push_back(pair.t_max() * k / 200.0);
    art.write("v_trajectory.csv", norms_csv(pair.v_trajectory(grid)));

    const auto& d = pair.diagnostics();
    const Eigen::VectorXd v0 = pair.v(0.0);
    json doc;
    doc["t_start"] = pair.t_start();
    doc["t_max"] = pair.t_max();
    doc["c"] = pair.two_sided_constant();
    doc["iterations"] = d.iterations;
    doc["differences"] = d.differences;
    doc["ratios"] = d.ratios;
    doc["contraction_bound"] = d.contraction_bound;
    doc["contraction_nominal"] = d.contraction_nominal;
    doc["panels"] = d.panels;
    doc["truncation_bound"] = d.truncation_bound;
    doc["residual"] = d.residual;
    doc["sup_v"] = pair.sup_v();
    doc["v0"] = std::vector<double>(v0.data(), v0.data() + v0.size());
    doc["chain_holds"] = report.chain_holds;
    doc["max_ratio"] = report.max_ratio;
    doc["limit"] = {{"pass", report.limit.pass},
                    {"worst_ratio", report.limit.worst_ratio},
                    {"spread", report.limit.spread}};
    art.write("levinson.json", doc);
    out << "matching: t_start = " << shortest(pair.t_start()) << ", " << d.iterations
        << " Picard iterations, max error/bound = " << shortest(report.max_ratio) << "\n";
    return report.chain_holds && report.max_ratio <= 1.0 + kRatioTol ? 0 : 2;
}

int run_plot(const CliOptions& o, Artifacts& art, std::string& input) {
    if (o.csv_path.empty()) throw ParameterError("plot needs --csv");
    const PlotKind kind = plot_kind_from_string(o.kind);
    PlotOptions opt;
    opt.timestamp = o.timestamp;
    const std::string csv = read_file(o.csv_path);
    input = csv;
    if (kind == PlotKind::NormVsEnvelope) {
        if (o.certificate_path.empty()) throw ParameterError("a norm plot needs --certificate");
        const std::string text = read_file(o.certificate_path);
        input += text;
        try {
            opt.certificate = recheck(certificate_from_json(json::parse(text)));
        } catch (const json::exception& e) {
            throw ParameterError(std::string("certificate JSON does not parse: ") + e.what());
        }
    }
    art.write(kind == PlotKind::NormVsEnvelope ? "norm_vs_envelope.svg" : "matching_error.svg",
              render_plot(csv, kind, opt));
    return 0;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xf];
    }
    return out;
}

int execute(const CliOptions& o, std::ostream& out, std::ostream& err) {
    Artifacts art(o.out_dir);
    std::string input;
    std::uint64_t seed = o.seed.value_or(0);
    int status = 1;
    try {
        if (o.command == "plot") {
            status = run_plot(o, art, input);
        } else {
            const Command command = command_from_string(o.command);
            if (o.config_path.empty()) throw ParameterError("--config is required");
            RunConfig cfg = load_config(o.config_path, command);
            input = cfg.source;
            if (o.seed) cfg.seed = *o.seed;
            seed = cfg.seed;
            if (o.rel_tol) {
                cfg.rel_tol = *o.rel_tol;
                cfg.sweep.rel_tol = *o.rel_tol;
            }
            if (o.write_states) cfg.write_states = true;
            switch (command) {
                case Command::Certify: status = run_certify(cfg, art, out); break;
                case Command::Simulate: status = run_simulate(cfg, art, out); break;
                case Command::Oracle: status = run_oracle(cfg, art, out); break;
                case Command::Sweep: status = run_sweep_command(cfg, art, o.jobs, out); break;
                case Command::Levinson: status = run_levinson(cfg, art, out); break;
            }
        }
    } catch (const InvariantViolation& e) {
        err << "invariant violation: " << e.what() << "\n";
        art.manifest(o.command, input, seed);
        return 2;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    art.manifest(o.command, input, seed);
    if (status == 2) err << "invariant violation: a certified envelope was breached\n";
    return status;
}

}  // namespace stabcert::cli
