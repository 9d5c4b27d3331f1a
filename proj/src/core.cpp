#include "stabcert/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stabcert/errors.hpp"

namespace stabcert {

namespace {

const double kLogMax = std::log(std::numeric_limits<double>::max());

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double power_law_integral(const PowerLaw& g, double t) {
    const double x = std::log1p(t / g.b0);
    if (g.d == 1.0) return g.b1 * x;
    // (b0+t)^{1-d} - b0^{1-d} without cancellation for d near 1
    const double one_minus_d = 1.0 - g.d;
    return g.b1 * std::pow(g.b0, one_minus_d) * std::expm1(one_minus_d * x) / one_minus_d;
}

void require_time(double t) {
    if (!(t >= 0.0)) {
        std::ostringstream msg;
        msg << "time must be nonnegative, got " << t;
        throw DomainError(msg.str());
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// PiecewiseLinear

PiecewiseLinear::PiecewiseLinear(std::vector<double> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (grid_.size() < 2) throw ParameterError("table needs at least two grid points");
    if (grid_.size() != values_.size()) throw ParameterError("table grid and values differ in length");
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        if (!std::isfinite(grid_[i]) || !std::isfinite(values_[i]))
            throw ParameterError("table entries must be finite");
        if (i > 0 && !(grid_[i] > grid_[i - 1])) throw ParameterError("table grid must be strictly increasing");
    }
    cumulative_.resize(grid_.size(), 0.0);
    for (std::size_t i = 1; i < grid_.size(); ++i) {
        cumulative_[i] = cumulative_[i - 1] + 0.5 * (grid_[i] - grid_[i - 1]) * (values_[i] + values_[i - 1]);
    }
}

std::size_t PiecewiseLinear::cell(double t) const {
    if (!(t >= grid_.front() && t <= grid_.back())) {
        std::ostringstream msg;
        msg << "t = " << t << " outside table range [" << grid_.front() << ", " << grid_.back() << "]";
        throw DomainError(msg.str());
    }
    auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - grid_.begin());
    return std::min(i == 0 ? 0 : i - 1, grid_.size() - 2);
}

double PiecewiseLinear::operator()(double t) const {
    const std::size_t i = cell(t);
    const double w = (t - grid_[i]) / (grid_[i + 1] - grid_[i]);
    return (1.0 - w) * values_[i] + w * values_[i + 1];
}

double PiecewiseLinear::integral(double t) const {
    const std::size_t i = cell(t);
    const double v = (*this)(t);
    return cumulative_[i] + 0.5 * (t - grid_[i]) * (values_[i] + v);
}

// ---------------------------------------------------------------------------
// GammaModel

GammaModel GammaModel::power_law(double b0, double b1, double d) {
    if (!(b0 > 0.0) || !std::isfinite(b0)) throw ParameterError("power-law gamma requires b0 > 0");
    if (!(b1 > 0.0) || !std::isfinite(b1)) throw ParameterError("power-law gamma requires b1 > 0");
    if (!(d > 0.0) || !std::isfinite(d)) throw ParameterError("power-law gamma requires d > 0");
    return GammaModel(PowerLaw{b0, b1, d});
}

GammaModel GammaModel::tabulated(std::vector<double> grid, std::vector<double> values) {
    for (double v : values) {
        if (v < 0.0) throw ParameterError("tabulated gamma must be nonnegative");
    }
    PiecewiseLinear table(std::move(grid), std::move(values));
    if (table.front() != 0.0) throw ParameterError("tabulated gamma grid must start at t = 0");
    return GammaModel(std::move(table));
}

GammaModel::Kind GammaModel::kind() const noexcept {
    return std::holds_alternative<PowerLaw>(rep_) ? Kind::PowerLaw : Kind::Tabulated;
}

const PowerLaw& GammaModel::power_law_params() const {
    if (const auto* p = std::get_if<PowerLaw>(&rep_)) return *p;
    throw Unsupported("operation requires a power-law gamma");
}

const PiecewiseLinear& GammaModel::table() const {
    if (const auto* p = std::get_if<PiecewiseLinear>(&rep_)) return *p;
    throw Unsupported("operation requires a tabulated gamma");
}

double GammaModel::operator()(double t) const {
    require_time(t);
    return std::visit(Overloaded{[t](const PowerLaw& g) { return g.b1 / std::pow(g.b0 + t, g.d); },
                                 [t](const PiecewiseLinear& tab) { return tab(t); }},
                      rep_);
}

double GammaModel::integral(double t) const {
    require_time(t);
    return std::visit(Overloaded{[t](const PowerLaw& g) { return power_law_integral(g, t); },
                                 [t](const PiecewiseLinear& tab) { return tab.integral(t); }},
                      rep_);
}

double GammaModel::horizon() const {
    return std::visit(Overloaded{[](const PowerLaw&) { return std::numeric_limits<double>::infinity(); },
                                 [](const PiecewiseLinear& tab) { return tab.back(); }},
                      rep_);
}

// ---------------------------------------------------------------------------

void PerturbationBound::validate() const {
    if (!(c0 >= 0.0) || !std::isfinite(c0)) throw ParameterError("perturbation bound requires c0 >= 0");
    if (!(p > 0.0) || !std::isfinite(p)) throw ParameterError("perturbation bound requires p > 0");
}

ForcingBound::ForcingBound() : beta_([](double) { return 0.0; }) {}

ForcingBound::ForcingBound(TimeFunction beta) : beta_(std::move(beta)), zero_(false) {
    if (!beta_) throw ParameterError("forcing function is empty");
}

ForcingBound::ForcingBound(PiecewiseLinear table) : zero_(false) {
    for (double v : table.values()) {
        if (v < 0.0) throw ParameterError("tabulated forcing must be nonnegative");
    }
    beta_ = [tab = std::move(table)](double t) { return tab(t); };
}

double ForcingBound::operator()(double t) const {
    if (zero_) return 0.0;
    const double b = beta_(t);
    if (!(b >= 0.0)) {
        std::ostringstream msg;
        msg << "forcing beta(" << t << ") = " << b << " is negative";
        throw SpecInvariantError(msg.str());
    }
    return b;
}

// ---------------------------------------------------------------------------
// Names

std::string_view to_string(ConditionId id) {
    switch (id) {
        case ConditionId::Mu0Strict: return "Mu0Strict";
        case ConditionId::Dlt1_35: return "Dlt1_35";
        case ConditionId::Dlt1_36: return "Dlt1_36";
        case ConditionId::Deq1_41: return "Deq1_41";
        case ConditionId::Deq1_42: return "Deq1_42";
        case ConditionId::General_17: return "General_17";
        case ConditionId::General_18: return "General_18";
        case ConditionId::Regime: return "Regime";
    }
    return "Unknown";
}

std::string_view to_string(Branch b) {
    switch (b) {
        case Branch::PowerLawDlt1: return "PowerLawDlt1";
        case Branch::PowerLawDeq1: return "PowerLawDeq1";
        case Branch::GeneralMu: return "GeneralMu";
    }
    return "Unknown";
}

std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::AsymptoticStability: return "AsymptoticStability";
        case Regime::StabilityOnly: return "StabilityOnly";
    }
    return "Unknown";
}

ConditionId condition_id_from_string(std::string_view s) {
    for (auto id : {ConditionId::Mu0Strict, ConditionId::Dlt1_35, ConditionId::Dlt1_36, ConditionId::Deq1_41,
                    ConditionId::Deq1_42, ConditionId::General_17, ConditionId::General_18, ConditionId::Regime}) {
        if (to_string(id) == s) return id;
    }
    throw ParameterError("unknown condition id '" + std::string(s) + "'");
}

Branch branch_from_string(std::string_view s) {
    for (auto b : {Branch::PowerLawDlt1, Branch::PowerLawDeq1, Branch::GeneralMu}) {
        if (to_string(b) == s) return b;
    }
    throw ParameterError("unknown branch '" + std::string(s) + "'");
}

Regime regime_from_string(std::string_view s) {
    for (auto r : {Regime::AsymptoticStability, Regime::StabilityOnly}) {
        if (to_string(r) == s) return r;
    }
    throw ParameterError("unknown regime '" + std::string(s) + "'");
}

ConditionReport ConditionReport::evaluate(ConditionId id, std::string text, double lhs, double rhs, bool strict) {
    ConditionReport r{id, std::move(text), lhs, rhs, strict, false, std::nullopt, {}};
    r.pass = strict ? (lhs < rhs) : (lhs <= rhs);
    return r;
}

const ConditionReport* Certificate::find(ConditionId id) const {
    auto it = std::find_if(checks.begin(), checks.end(), [id](const ConditionReport& c) { return c.id == id; });
    return it == checks.end() ? nullptr : &*it;
}

// ---------------------------------------------------------------------------
// Evaluation

double gamma_eval(const GammaModel& model, double t) { return model(t); }

double gamma_integral(const GammaModel& model, double t) { return model.integral(t); }

std::optional<double> gamma_total_integral(const GammaModel& model) {
    if (!model.is_power_law()) return std::nullopt;
    const PowerLaw& g = model.power_law_params();
    if (g.d <= 1.0) return std::nullopt;
    return g.b1 * std::pow(g.b0, 1.0 - g.d) / (g.d - 1.0);
}

MuValue mu_eval(double mu0, const GammaModel& model, double t) {
    if (!(mu0 > 0.0) || !std::isfinite(mu0)) throw ParameterError("mu0 must be positive and finite");
    const double log_mu = std::log(mu0) + 0.5 * model.integral(t);
    if (log_mu >= kLogMax) return {std::numeric_limits<double>::max(), log_mu, true};
    return {std::exp(log_mu), log_mu, false};
}

EnvelopeValue envelope_value(double mu0, const GammaModel& model, double t) {
    const MuValue mu = mu_eval(mu0, model, t);
    return {std::exp(-mu.log_value), -mu.log_value, mu.saturated};
}

EnvelopeValue envelope_eval(const Certificate& cert, double t) {
    if (!cert.valid) throw CertificateInvalid("envelope requested from an invalid certificate");
    return envelope_value(cert.mu0, cert.gamma, t);
}

double mu_product(double g, double mu0, const GammaModel& model, double t) {
    if (g <= 0.0) return 0.0;
    return std::exp(std::log(g) + mu_eval(mu0, model, t).log_value);
}

}  // namespace stabcert
