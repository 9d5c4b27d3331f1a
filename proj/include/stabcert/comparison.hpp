#pragma once

// Brute-force oracle for the comparison lemma: integrate the extremal scalar
// equation
//
//     g' = -gamma(t) g + a(t) g^{1+p} + beta(t),   g(0) = g0 >= 0,
//
// detect finite-time blow-up, and check that g(t) * mu(t) < 1 along the way.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stabcert/core.hpp"

namespace stabcert {

struct ScalarProblem {
    GammaModel gamma = GammaModel::power_law(1.0, 1.0, 1.0);
    TimeFunction a;  // >= 0
    ForcingBound beta;
    double p = 1.0;
    double g0 = 0.0;
};

/// a(t) == c0
[[nodiscard]] TimeFunction constant_function(double c);

struct ScalarOptions {
    double blowup_threshold = 1e12;
    /// Step underflow when h < underflow_factor * (t + 1); counts as blow-up.
    double underflow_factor = 1e-14;
    /// Optional dense-output times (sorted, within [0, T]).
    std::vector<double> report_times;
};

enum class ScalarStatus { Completed, BlowUp };

struct ScalarTrajectory {
    std::vector<double> times;   // t = 0 and every accepted step
    std::vector<double> values;      // g(t_i) >= 0, may underflow to 0
    std::vector<double> log_values;  // log g(t_i), exact across underflow
    ScalarStatus status = ScalarStatus::Completed;
    std::optional<double> tau;   // last accepted time before blow-up
    std::size_t steps_accepted = 0;
    std::size_t steps_rejected = 0;
    std::vector<double> report_times;
    std::vector<double> report_values;
    std::vector<double> report_log_values;
};

/// Adaptive Dormand-Prince solution of the equality ODE on [0, T]. g is
/// clamped at zero after every accepted step. The integrated variable is
/// 2^{-e} g with e moved in steps of 256 so that strongly damped solutions
/// stay representable; values are reported unscaled and as logarithms. Throws ParameterError unless
/// rel_tol is in [1e-12, 1e-2].
[[nodiscard]] ScalarTrajectory integrate_scalar(const ScalarProblem& problem, double T, double rel_tol,
                                                const ScalarOptions& options = {});

struct DominanceResult {
    bool pass = true;
    double max_product = 0.0;
    double at = 0.0;
};

/// pass iff g(t_i) * mu(t_i) < 1 at every accepted step and report time,
/// evaluated as log g + log mu.
/// Throws CertificateInvalid for an invalid certificate and
/// InvariantViolation when a valid certificate meets a blown-up trajectory.
[[nodiscard]] DominanceResult check_dominance(const ScalarTrajectory& traj, const Certificate& cert);

/// CSV with header `t,g`, one row per recorded step.
[[nodiscard]] std::string to_csv(const ScalarTrajectory& traj);
/// {status, tau, steps_accepted, steps_rejected}
[[nodiscard]] nlohmann::json sidecar_json(const ScalarTrajectory& traj);

}  // namespace stabcert
