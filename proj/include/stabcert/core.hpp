#pragma once

// Domain types for decay rates, perturbation bounds and certificates, and the
// closed-form evaluation of gamma, its integral, mu and the decay envelope.
//
// The dissipation rate is gamma(t) = b1 / (b0 + t)^d (power law) or a
// nonnegative piecewise-linear table. The certified majorant of the solution
// norm is envelope(t) = 1 / mu(t) with
//
//     mu(t) = mu0 * exp( 0.5 * integral_0^t gamma(s) ds ).
//
// Everything here is an immutable value; all functions are pure.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace stabcert {

using TimeFunction = std::function<double(double)>;

/// Continuous piecewise-linear function on a strictly increasing grid.
/// Integrals from grid.front() are exact for the interpolant (trapezoid rule).
class PiecewiseLinear {
public:
    PiecewiseLinear(std::vector<double> grid, std::vector<double> values);

    /// Throws DomainError outside [grid.front(), grid.back()].
    [[nodiscard]] double operator()(double t) const;
    /// Integral of the interpolant over [grid.front(), t].
    [[nodiscard]] double integral(double t) const;

    [[nodiscard]] std::span<const double> grid() const noexcept { return grid_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] double front() const noexcept { return grid_.front(); }
    [[nodiscard]] double back() const noexcept { return grid_.back(); }

private:
    [[nodiscard]] std::size_t cell(double t) const;

    std::vector<double> grid_;
    std::vector<double> values_;
    std::vector<double> cumulative_;
};

struct PowerLaw {
    double b0;
    double b1;
    double d;
};

/// gamma(t) >= 0 with gamma -> 0; either b1/(b0+t)^d or a table starting at t = 0.
class GammaModel {
public:
    enum class Kind { PowerLaw, Tabulated };

    /// Requires b0 > 0, b1 > 0, d > 0. d > 1 is accepted (stability-only regime).
    static GammaModel power_law(double b0, double b1, double d);
    /// Requires grid[0] == 0, strictly increasing grid, at least two points,
    /// nonnegative values.
    static GammaModel tabulated(std::vector<double> grid, std::vector<double> values);

    [[nodiscard]] Kind kind() const noexcept;
    [[nodiscard]] bool is_power_law() const noexcept { return kind() == Kind::PowerLaw; }
    /// Throws Unsupported for tabulated models.
    [[nodiscard]] const PowerLaw& power_law_params() const;
    [[nodiscard]] const PiecewiseLinear& table() const;

    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] double integral(double t) const;
    /// Largest t at which the model can be evaluated (infinity for power laws).
    [[nodiscard]] double horizon() const;

private:
    explicit GammaModel(std::variant<PowerLaw, PiecewiseLinear> rep) : rep_(std::move(rep)) {}
    std::variant<PowerLaw, PiecewiseLinear> rep_;
};

/// ||F(t,u)|| <= c0 ||u||^{1+p}
struct PerturbationBound {
    double c0 = 0.0;
    double p = 1.0;

    /// Throws ParameterError unless c0 >= 0 and p > 0.
    void validate() const;
};

/// Nonnegative forcing term beta(t). Negative values are reported as errors
/// at evaluation time.
class ForcingBound {
public:
    ForcingBound();  // beta == 0
    explicit ForcingBound(TimeFunction beta);
    explicit ForcingBound(PiecewiseLinear table);

    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] bool is_zero() const noexcept { return zero_; }

private:
    TimeFunction beta_;
    bool zero_ = true;
};

enum class ConditionId { Mu0Strict, Dlt1_35, Dlt1_36, Deq1_41, Deq1_42, General_17, General_18, Regime };
enum class Branch { PowerLawDlt1, PowerLawDeq1, GeneralMu };
enum class Regime { AsymptoticStability, StabilityOnly };

[[nodiscard]] std::string_view to_string(ConditionId id);
[[nodiscard]] std::string_view to_string(Branch b);
[[nodiscard]] std::string_view to_string(Regime r);
/// Inverse of to_string; throw ParameterError on unknown names.
[[nodiscard]] ConditionId condition_id_from_string(std::string_view s);
[[nodiscard]] Branch branch_from_string(std::string_view s);
[[nodiscard]] Regime regime_from_string(std::string_view s);

struct ConditionReport {
    ConditionId id;
    std::string text;   // the inequality, human readable
    double lhs = 0.0;
    double rhs = 0.0;
    bool strict = false;
    bool pass = false;
    std::optional<double> worst_t;  // set for grid-checked conditions
    std::string note;

    /// pass <=> (strict ? lhs < rhs : lhs <= rhs)
    [[nodiscard]] static ConditionReport evaluate(ConditionId id, std::string text, double lhs, double rhs,
                                                  bool strict);
};

struct Certificate {
    double mu0 = 1.0;
    GammaModel gamma = GammaModel::power_law(1.0, 1.0, 1.0);
    PerturbationBound bound;
    Branch branch = Branch::PowerLawDlt1;
    Regime regime = Regime::AsymptoticStability;
    std::vector<ConditionReport> checks;
    bool valid = false;

    [[nodiscard]] const ConditionReport* find(ConditionId id) const;
};

/// A positive value that may exceed the double range. log_value is always
/// finite; value saturates at DBL_MAX when `saturated` is set.
struct MuValue {
    double value;
    double log_value;
    bool saturated;
};

/// Envelope 1/mu. `underflow` is set exactly when mu saturated; value is then
/// exp(-log mu), possibly zero.
struct EnvelopeValue {
    double value;
    double log_value;
    bool underflow;
};

[[nodiscard]] double gamma_eval(const GammaModel& model, double t);
[[nodiscard]] double gamma_integral(const GammaModel& model, double t);
/// integral_0^infinity gamma; nullopt when it diverges (power law with d <= 1)
/// or cannot be decided (tabulated).
[[nodiscard]] std::optional<double> gamma_total_integral(const GammaModel& model);

[[nodiscard]] MuValue mu_eval(double mu0, const GammaModel& model, double t);
/// Envelope 1/mu(t) without any certificate validity check.
[[nodiscard]] EnvelopeValue envelope_value(double mu0, const GammaModel& model, double t);
/// Throws CertificateInvalid unless cert.valid.
[[nodiscard]] EnvelopeValue envelope_eval(const Certificate& cert, double t);

/// Product g * mu(t) computed in the log domain so that neither factor has to
/// be representable. Returns 0 for g == 0.
[[nodiscard]] double mu_product(double g, double mu0, const GammaModel& model, double t);

}  // namespace stabcert
