#pragma once

// Seeded Monte Carlo sweep over certified instances: draw parameters, pick
// the minimal b1, simulate, and check the envelope. Instances run on a worker
// pool; rows come back in index order whatever the completion order.

#include <cstdint>
#include <string>
#include <vector>

#include "stabcert/evolution.hpp"

namespace stabcert::cli {

struct Range {
    double lo;
    double hi;
};

struct SweepConfig {
    std::size_t instances = 200;
    std::size_t dim_min = 1;
    std::size_t dim_max = 8;
    Range omega{0.0, 100.0};
    Range b0{0.1, 10.0};  // log-uniform
    Range d{0.05, 1.0};
    Range p{0.25, 3.0};
    Range c0{0.0, 5.0};
    Range g0{0.01, 2.0};
    double T = 1000.0;
    double rel_tol = 1e-6;
    std::size_t report_points = 200;
    bool rotating_frame = true;
    /// Every fourth instance uses d = 1 so both closed-form branches appear.
    bool include_d1 = true;
    std::vector<Nonlinearity::Kind> nonlinearities{Nonlinearity::Kind::Radial, Nonlinearity::Kind::Rotated,
                                                   Nonlinearity::Kind::Truncated};
};

struct SweepInstance {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::size_t dim = 1;
    double b0 = 1.0, b1 = 1.0, d = 1.0;
    double c0 = 0.0, p = 1.0;
    double g0 = 0.0, mu0 = 1.0;
    double omega = 0.0;
    Nonlinearity::Kind nonlinearity = Nonlinearity::Kind::Radial;
    double truncate_at = 1.0;
    std::uint64_t skew_seed = 0;
    std::uint64_t rotation_seed = 0;
    std::uint64_t state_seed = 0;
};

struct SweepRow {
    SweepInstance instance;
    bool valid = false;
    bool checked = false;
    bool dominance_pass = false;
    double max_product = 0.0;
    double at = 0.0;
    std::size_t steps = 0;
};

/// Per-instance seed derived from the run seed and the index (splitmix64).
[[nodiscard]] std::uint64_t instance_seed(std::uint64_t seed, std::size_t index);
[[nodiscard]] SweepInstance draw_instance(const SweepConfig& cfg, std::uint64_t seed, std::size_t index);
/// Seeded unit vector scaled to `norm`.
[[nodiscard]] Eigen::VectorXd random_state(std::size_t dim, double norm, std::uint64_t seed);
[[nodiscard]] SweepRow run_instance(const SweepConfig& cfg, const SweepInstance& inst);
/// jobs == 0 selects std::thread::hardware_concurrency().
[[nodiscard]] std::vector<SweepRow> run_sweep(const SweepConfig& cfg, std::uint64_t seed, std::size_t jobs = 0);

/// One row per instance: index, seed, parameters, valid, dominance_pass,
/// max_product, at.
[[nodiscard]] std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace stabcert::cli
