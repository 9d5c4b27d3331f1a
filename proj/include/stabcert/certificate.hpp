#pragma once

// Closed-form stability certificates for u' = A(t)u + F(t,u) with
// Re(A(t)u,u) <= -gamma(t)|u|^2 and |F(t,u)| <= c0 |u|^{1+p}.
//
// With the canonical multiplier mu(t) = mu0 exp(0.5 * int_0^t gamma), the
// comparison condition
//
//     a(t) mu^{-1-p} + beta(t) <= mu^{-1} (gamma - mu'/mu),   mu0 g0 < 1
//
// reduces for power-law gamma to a handful of scalar inequalities in
// (b0, b1, d, c0, p, mu0). certify() evaluates them, search_b1() finds the
// smallest admissible b1, and verify_general_mu() checks the general
// condition pointwise on a grid for arbitrary mu, a and beta.

#include <cstddef>
#include <optional>

#include "json.hpp"
#include "stabcert/core.hpp"

namespace stabcert {

/// Margin for a defaulted mu0 = (1 - margin) / g0.
inline constexpr double kDefaultMu0Margin = 0.01;

/// Builds the certificate ledger. gamma must be a power law (Unsupported
/// otherwise). When mu0 is omitted it defaults to (1 - 0.01)/g0, or 1 for
/// g0 = 0.
///
/// Branches: d in (0,1) checks mu0 g0 < 1, 2d < p b1 b0^{1-d} and
/// 2 c0 mu0^{-p} <= b1 b0^{-d}; d = 1 checks mu0 g0 < 1, b1 p > 2 and
/// 2 c0 mu0^{-p} <= b1/b0. For d > 1 the certificate is invalid with regime
/// StabilityOnly. For g0 = 0 the solution is identically zero and the ledger
/// holds only mu0 g0 < 1.
[[nodiscard]] Certificate certify(const GammaModel& gamma, const PerturbationBound& bound, double g0,
                                  std::optional<double> mu0 = std::nullopt);

/// Recomputes the ledger of an existing certificate from its parameters. The
/// product mu0*g0 is taken from the stored Mu0Strict entry.
[[nodiscard]] Certificate recheck(const Certificate& cert);

/// Smallest b1 for which the branch conditions hold, found by doubling and
/// bisection to 1e-9; the returned value carries an extra margin of
/// max(1e-9, 1e-12 b1) so it certifies even when the binding inequality is
/// strict. Requires b0 > 0, d in (0,1], mu0 > 0.
[[nodiscard]] double search_b1(double b0, double d, const PerturbationBound& bound, double mu0);

/// Feasibility of the branch conditions alone (mu0 g0 < 1 excluded).
[[nodiscard]] bool branch_conditions_hold(const GammaModel& gamma, const PerturbationBound& bound, double mu0);

/// d <= 1: AsymptoticStability, d > 1: StabilityOnly. Tabulated gamma is
/// Unsupported (a tail integral cannot be decided from finite data).
[[nodiscard]] Regime classify_regime(const GammaModel& gamma);

struct GeneralMuSpec {
    TimeFunction mu;      // > 0
    TimeFunction mu_dot;  // >= 0
    TimeFunction a;       // >= 0
    ForcingBound beta;
    GammaModel gamma = GammaModel::power_law(1.0, 1.0, 1.0);
    double p = 1.0;
    double horizon = 0.0;         // 0 selects 1e4 * b0 (power law) or the table end
    std::size_t points = 100'000;
    /// Set when mu is mu0 exp(0.5 int gamma); evaluation then runs in the log
    /// domain and the monotone-factor decomposition is reported.
    std::optional<double> canonical_mu0;
};

/// Spec with the canonical mu(t) = mu0 exp(0.5 int_0^t gamma).
[[nodiscard]] GeneralMuSpec canonical_mu_spec(double mu0, const GammaModel& gamma, TimeFunction a, ForcingBound beta,
                                              double p, double horizon = 0.0, std::size_t points = 100'000);

struct GeneralMuResult {
    bool pass = false;
    double worst_t = 0.0;
    /// min over the grid of (gamma - mu'/mu) - (a mu^{-p} + beta mu), i.e. the
    /// general condition multiplied through by mu(t) > 0.
    double margin = 0.0;
    double lhs_at_worst = 0.0;
    double rhs_at_worst = 0.0;
    double horizon = 0.0;
    std::size_t points = 0;
    /// Canonical mu only: gamma(0) <= gamma(t) exp((p/2) int_0^t gamma) on the grid.
    std::optional<bool> monotone_factor;
    /// Canonical mu, beta == 0, monotone factor holding and still growing at
    /// the horizon: the grid verdict extends to all t >= 0.
    bool tail_certified = false;

    [[nodiscard]] ConditionReport as_condition() const;
};

/// Evaluates the general comparison condition on {0} plus `points - 1`
/// log-spaced times up to the horizon. Throws SpecInvariantError if mu <= 0,
/// mu' < 0 or a < 0 is seen on the grid.
[[nodiscard]] GeneralMuResult verify_general_mu(const GeneralMuSpec& spec);

/// JSON document {gamma, bound, mu0, branch, checks, valid, regime}.
/// Only power-law certificates serialize.
[[nodiscard]] nlohmann::json to_json(const Certificate& cert);
[[nodiscard]] Certificate certificate_from_json(const nlohmann::json& doc);

}  // namespace stabcert
