#include "stabcert/cli/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

#include "stabcert/certificate.hpp"
#include "stabcert/errors.hpp"
#include "stabcert/format.hpp"

namespace stabcert::cli {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, Range r) {
    if (r.hi <= r.lo) return r.lo;
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

Nonlinearity make_nonlinearity(const SweepInstance& inst) {
    using K = Nonlinearity::Kind;
    switch (inst.nonlinearity) {
        case K::None: return Nonlinearity::none();
        case K::Radial: return Nonlinearity::radial(inst.c0, inst.p);
        case K::Rotated: return Nonlinearity::rotated(inst.c0, inst.p, inst.rotation_seed);
        case K::Truncated: return Nonlinearity::truncated(inst.c0, inst.p, inst.truncate_at);
        case K::Custom: break;
    }
    throw ParameterError("sweeps support none, radial, rotated and truncated nonlinearities");
}

void validate(const SweepConfig& cfg) {
    if (cfg.instances == 0) throw ParameterError("sweep needs at least one instance");
    if (cfg.dim_min == 0 || cfg.dim_max < cfg.dim_min) throw ParameterError("sweep dimension range is invalid");
    if (!(cfg.b0.lo > 0.0) || cfg.b0.hi < cfg.b0.lo) throw ParameterError("sweep b0 range must be positive");
    if (!(cfg.d.lo > 0.0) || cfg.d.hi > 1.0 || cfg.d.hi < cfg.d.lo)
        throw ParameterError("sweep d range must lie in (0, 1]");
    if (!(cfg.p.lo > 0.0) || cfg.p.hi < cfg.p.lo) throw ParameterError("sweep p range must be positive");
    if (cfg.c0.lo < 0.0 || cfg.c0.hi < cfg.c0.lo) throw ParameterError("sweep c0 range must be nonnegative");
    if (!(cfg.g0.lo > 0.0) || cfg.g0.hi < cfg.g0.lo) throw ParameterError("sweep g0 range must be positive");
    if (cfg.omega.lo < 0.0 || cfg.omega.hi < cfg.omega.lo) throw ParameterError("sweep omega range is invalid");
    if (cfg.nonlinearities.empty()) throw ParameterError("sweep needs at least one nonlinearity kind");
}

}  // namespace

std::uint64_t instance_seed(std::uint64_t seed, std::size_t index) {
    return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(index));
}

SweepInstance draw_instance(const SweepConfig& cfg, std::uint64_t seed, std::size_t index) {
    SweepInstance inst;
    inst.index = index;
    inst.seed = instance_seed(seed, index);
    std::mt19937_64 rng(inst.seed);
    inst.dim = std::uniform_int_distribution<std::size_t>(cfg.dim_min, cfg.dim_max)(rng);
    inst.b0 = std::exp(uniform(rng, {std::log(cfg.b0.lo), std::log(cfg.b0.hi)}));
    inst.d = uniform(rng, cfg.d);
    if (cfg.include_d1 && index % 4 == 3) inst.d = 1.0;
    inst.p = uniform(rng, cfg.p);
    inst.c0 = uniform(rng, cfg.c0);
    inst.g0 = uniform(rng, cfg.g0);
    inst.omega = uniform(rng, cfg.omega);
    inst.nonlinearity = cfg.nonlinearities[index % cfg.nonlinearities.size()];
    inst.truncate_at = inst.g0 * uniform(rng, {0.1, 1.0});
    inst.skew_seed = rng();
    inst.rotation_seed = rng();
    inst.state_seed = rng();
    inst.mu0 = (1.0 - kDefaultMu0Margin) / inst.g0;
    inst.b1 = search_b1(inst.b0, inst.d, {inst.c0, inst.p}, inst.mu0);
    return inst;
}

Eigen::VectorXd random_state(std::size_t dim, double norm, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd u(static_cast<Eigen::Index>(dim));
    do {
        for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = normal(rng);
    } while (u.norm() == 0.0);
    return u * (norm / u.norm());
}

SweepRow run_instance(const SweepConfig& cfg, const SweepInstance& inst) {
    SweepRow row;
    row.instance = inst;
    const PerturbationBound bound{inst.c0, inst.p};
    const GammaModel gamma = GammaModel::power_law(inst.b0, inst.b1, inst.d);
    const Certificate cert = certify(gamma, bound, inst.g0, inst.mu0);
    row.valid = cert.valid;

    SystemSpec spec;
    spec.dim = inst.dim;
    spec.gamma = gamma;
    spec.omega = inst.omega;
    spec.skew_seed = inst.skew_seed;
    spec.nonlinearity = make_nonlinearity(inst);
    const TimeVaryingSystem system = build_system(spec);

    SimulateOptions opt;
    opt.rel_tol = cfg.rel_tol;
    opt.report_points = cfg.report_points;
    opt.rotating_frame = cfg.rotating_frame;
    const Trajectory traj = simulate(system, random_state(inst.dim, inst.g0, inst.state_seed), cfg.T, opt);
    row.steps = traj.diagnostics.steps_accepted;
    if (cert.valid) {
        const DominanceResult dom = verify_trajectory_envelope(traj, cert);
        row.checked = true;
        row.dominance_pass = dom.pass;
        row.max_product = dom.max_product;
        row.at = dom.at;
    }
    return row;
}

std::vector<SweepRow> run_sweep(const SweepConfig& cfg, std::uint64_t seed, std::size_t jobs) {
    validate(cfg);
    if (jobs == 0) jobs = std::max(1U, std::thread::hardware_concurrency());
    jobs = std::min(jobs, cfg.instances);

    std::vector<SweepRow> rows(cfg.instances);
    std::vector<std::exception_ptr> errors(cfg.instances);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cfg.instances; i = next++) {
            try {
                rows[i] = run_instance(cfg, draw_instance(cfg, seed, i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "index,seed,dim,b0,b1,d,c0,p,g0,mu0,omega,nonlinearity,valid,dominance_pass,max_product,at\n";
    for (const auto& row : rows) {
        const auto& i = row.instance;
        out += std::to_string(i.index) + ',' + std::to_string(i.seed) + ',' + std::to_string(i.dim) + ',' +
               shortest(i.b0) + ',' + shortest(i.b1) + ',' + shortest(i.d) + ',' + shortest(i.c0) + ',' +
               shortest(i.p) + ',' + shortest(i.g0) + ',' + shortest(i.mu0) + ',' + shortest(i.omega) + ',' +
               std::string(to_string(i.nonlinearity)) + ',' + (row.valid ? "true" : "false") + ',' +
               (row.checked ? (row.dominance_pass ? "true" : "false") : "skipped") + ',' +
               shortest(row.max_product) + ',' + shortest(row.at) + '\n';
    }
    return out;
}

}  // namespace stabcert::cli
