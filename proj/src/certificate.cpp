#include "stabcert/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stabcert/errors.hpp"

namespace stabcert {

namespace {

constexpr double kSearchTolerance = 1e-9;
constexpr double kSearchFloor = 1e-12;

std::vector<ConditionReport> branch_checks(const PowerLaw& g, const PerturbationBound& bound, double mu0) {
    std::vector<ConditionReport> out;
    const double forcing_side = 2.0 * bound.c0 * std::pow(mu0, -bound.p);
    if (g.d < 1.0) {
        auto monotone = ConditionReport::evaluate(ConditionId::Dlt1_35, "2 d < p b1 b0^(1-d)", 2.0 * g.d,
                                                  bound.p * g.b1 * std::pow(g.b0, 1.0 - g.d), true);
        monotone.note = "makes gamma(t) exp((p/2) int_0^t gamma) nondecreasing, so its minimum is at t = 0";
        auto start = ConditionReport::evaluate(ConditionId::Dlt1_36, "2 c0 mu0^(-p) <= b1 b0^(-d)", forcing_side,
                                               g.b1 * std::pow(g.b0, -g.d), false);
        start.note = "2 c0 mu0^(-p) <= gamma(0)";
        out.push_back(std::move(monotone));
        out.push_back(std::move(start));
    } else {
        // stored as 2 < b1 p so that every strict check reads lhs < rhs
        auto monotone = ConditionReport::evaluate(ConditionId::Deq1_41, "2 < b1 p", 2.0, g.b1 * bound.p, true);
        monotone.note = "makes gamma(t) ((b0+t)/b0)^(b1 p/2) nondecreasing";
        auto start = ConditionReport::evaluate(ConditionId::Deq1_42, "2 c0 mu0^(-p) <= b1/b0", forcing_side,
                                               g.b1 / g.b0, false);
        start.note = "2 c0 mu0^(-p) <= gamma(0)";
        out.push_back(std::move(monotone));
        out.push_back(std::move(start));
    }
    return out;
}

Certificate build(const GammaModel& gamma, const PerturbationBound& bound, double mu0, double product,
                  bool zero_data) {
    const PowerLaw& g = gamma.power_law_params();
    Certificate cert;
    cert.mu0 = mu0;
    cert.gamma = gamma;
    cert.bound = bound;
    cert.regime = classify_regime(gamma);

    auto start = ConditionReport::evaluate(ConditionId::Mu0Strict, "mu0 g0 < 1", product, 1.0, true);
    if (g.d > 1.0) {
        cert.branch = Branch::GeneralMu;
        cert.checks.push_back(std::move(start));
        auto regime = ConditionReport::evaluate(ConditionId::Regime, "d <= 1", g.d, 1.0, false);
        regime.note = "stability only: int_0^inf gamma < inf, the envelope tends to a positive limit";
        cert.checks.push_back(std::move(regime));
    } else {
        cert.branch = g.d < 1.0 ? Branch::PowerLawDlt1 : Branch::PowerLawDeq1;
        if (zero_data) start.note = "zero initial data: the solution is identically zero";
        cert.checks.push_back(std::move(start));
        if (!zero_data) {
            for (auto& c : branch_checks(g, bound, mu0)) cert.checks.push_back(std::move(c));
        }
    }
    cert.valid = std::all_of(cert.checks.begin(), cert.checks.end(), [](const ConditionReport& c) { return c.pass; });
    return cert;
}

std::vector<double> log_grid(double horizon, std::size_t points) {
    std::vector<double> t;
    t.reserve(points);
    t.push_back(0.0);
    if (points < 2) return t;
    const std::size_t m = points - 1;
    const double lo = std::log(horizon * 1e-8);
    const double hi = std::log(horizon);
    for (std::size_t k = 0; k < m; ++k) {
        const double x = m == 1 ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(m - 1);
        t.push_back(k + 1 == m ? horizon : std::exp(x));
    }
    return t;
}

}  // namespace

Regime classify_regime(const GammaModel& gamma) {
    if (!gamma.is_power_law()) {
        throw Unsupported("regime of a tabulated gamma cannot be decided from finite data");
    }
    return gamma.power_law_params().d <= 1.0 ? Regime::AsymptoticStability : Regime::StabilityOnly;
}

Certificate certify(const GammaModel& gamma, const PerturbationBound& bound, double g0, std::optional<double> mu0) {
    if (!gamma.is_power_law()) throw Unsupported("certify requires a power-law gamma");
    bound.validate();
    if (!(g0 >= 0.0) || !std::isfinite(g0)) throw ParameterError("g0 must be finite and nonnegative");
    double m = 1.0;
    if (mu0) {
        m = *mu0;
        if (!(m > 0.0) || !std::isfinite(m)) throw ParameterError("mu0 must be positive and finite");
    } else if (g0 > 0.0) {
        m = (1.0 - kDefaultMu0Margin) / g0;
    }
    return build(gamma, bound, m, m * g0, g0 == 0.0);
}

Certificate recheck(const Certificate& cert) {
    const ConditionReport* start = cert.find(ConditionId::Mu0Strict);
    if (start == nullptr) throw ParameterError("certificate lacks the Mu0Strict check");
    const bool zero_data = start->lhs == 0.0;
    return build(cert.gamma, cert.bound, cert.mu0, start->lhs, zero_data);
}

bool branch_conditions_hold(const GammaModel& gamma, const PerturbationBound& bound, double mu0) {
    const PowerLaw& g = gamma.power_law_params();
    if (g.d > 1.0) return false;
    auto checks = branch_checks(g, bound, mu0);
    return std::all_of(checks.begin(), checks.end(), [](const ConditionReport& c) { return c.pass; });
}

double search_b1(double b0, double d, const PerturbationBound& bound, double mu0) {
    bound.validate();
    if (!(b0 > 0.0)) throw ParameterError("search_b1 requires b0 > 0");
    if (!(d > 0.0 && d <= 1.0)) throw ParameterError("search_b1 requires d in (0, 1]");
    if (!(mu0 > 0.0) || !std::isfinite(mu0)) throw ParameterError("search_b1 requires mu0 > 0");

    auto ok = [&](double b1) { return branch_conditions_hold(GammaModel::power_law(b0, b1, d), bound, mu0); };

    double hi = 1.0;
    double lo = 0.0;
    if (ok(hi)) {
        lo = hi / 2.0;
        while (lo > kSearchFloor && ok(lo)) {
            hi = lo;
            lo /= 2.0;
        }
        if (lo <= kSearchFloor && ok(lo)) return lo;
    } else {
        while (!ok(hi)) {
            lo = hi;
            hi *= 2.0;
            if (!std::isfinite(hi)) throw Infeasible("no admissible b1 found below the double range");
        }
    }
    // invariant: ok(hi), !ok(lo)
    while (hi - lo > kSearchTolerance) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        (ok(mid) ? hi : lo) = mid;
    }
    return hi + std::max(kSearchTolerance, 1e-12 * hi);
}

// ---------------------------------------------------------------------------
// General mu

GeneralMuSpec canonical_mu_spec(double mu0, const GammaModel& gamma, TimeFunction a, ForcingBound beta, double p,
                                double horizon, std::size_t points) {
    if (!(mu0 > 0.0)) throw ParameterError("mu0 must be positive");
    GeneralMuSpec spec{
        [mu0, gamma](double t) { return mu_eval(mu0, gamma, t).value; },
        [mu0, gamma](double t) { return 0.5 * gamma(t) * mu_eval(mu0, gamma, t).value; },
        std::move(a),
        std::move(beta),
        gamma,
        p,
        horizon,
        points,
        mu0,
    };
    return spec;
}

ConditionReport GeneralMuResult::as_condition() const {
    auto r = ConditionReport::evaluate(ConditionId::General_17, "a mu^(-p) + beta mu <= gamma - mu'/mu", lhs_at_worst,
                                       rhs_at_worst, false);
    r.worst_t = worst_t;
    std::ostringstream note;
    if (tail_certified) {
        note << "verified for all t >= 0";
    } else {
        note << "grid-verified up to T = " << horizon;
    }
    note << " (" << points << " points)";
    r.note = note.str();
    return r;
}

GeneralMuResult verify_general_mu(const GeneralMuSpec& spec) {
    if (!(spec.p > 0.0)) throw ParameterError("p must be positive");
    if (spec.points < 2) throw ParameterError("general-mu grid needs at least two points");
    if (!spec.a) throw ParameterError("a(t) is empty");
    if (!spec.canonical_mu0 && (!spec.mu || !spec.mu_dot)) throw ParameterError("mu and mu' must be supplied");

    double horizon = spec.horizon;
    if (horizon <= 0.0) {
        horizon = spec.gamma.is_power_law() ? 1e4 * spec.gamma.power_law_params().b0 : spec.gamma.horizon();
    }
    if (horizon > spec.gamma.horizon()) throw DomainError("general-mu horizon exceeds the gamma table");

    GeneralMuResult res;
    res.horizon = horizon;
    res.points = spec.points;
    res.margin = std::numeric_limits<double>::infinity();

    const double gamma0 = spec.gamma(0.0);
    bool monotone = true;
    double prev_factor = -std::numeric_limits<double>::infinity();
    double last_factor = prev_factor;

    for (double t : log_grid(horizon, spec.points)) {
        const double g = spec.gamma(t);
        const double a = spec.a(t);
        const double b = spec.beta(t);
        if (!(a >= 0.0)) throw SpecInvariantError("a(t) must be nonnegative");

        double lhs;
        double rhs;
        if (spec.canonical_mu0) {
            const double log_mu = mu_eval(*spec.canonical_mu0, spec.gamma, t).log_value;
            lhs = a * std::exp(-spec.p * log_mu) + (b > 0.0 ? b * std::exp(log_mu) : 0.0);
            rhs = g - 0.5 * g;
            const double log_factor = (g > 0.0 ? std::log(g) : -std::numeric_limits<double>::infinity()) +
                                      0.5 * spec.p * spec.gamma.integral(t);
            if (!(std::log(gamma0) <= log_factor)) monotone = false;
            prev_factor = last_factor;
            last_factor = log_factor;
        } else {
            const double mu = spec.mu(t);
            const double mu_dot = spec.mu_dot(t);
            if (!(mu > 0.0)) {
                std::ostringstream msg;
                msg << "mu(" << t << ") = " << mu << " is not positive";
                throw SpecInvariantError(msg.str());
            }
            if (!(mu_dot >= 0.0)) {
                std::ostringstream msg;
                msg << "mu'(" << t << ") = " << mu_dot << " is negative";
                throw SpecInvariantError(msg.str());
            }
            lhs = a * std::pow(mu, -spec.p) + (b > 0.0 ? b * mu : 0.0);
            rhs = g - mu_dot / mu;
        }
        const double slack = rhs - lhs;
        if (slack < res.margin || std::isnan(slack)) {
            res.margin = std::isnan(slack) ? -std::numeric_limits<double>::infinity() : slack;
            res.worst_t = t;
            res.lhs_at_worst = lhs;
            res.rhs_at_worst = rhs;
        }
    }
    res.pass = res.margin >= 0.0;
    if (spec.canonical_mu0) {
        res.monotone_factor = monotone;
        res.tail_certified = res.pass && monotone && spec.beta.is_zero() && last_factor > prev_factor;
    }
    return res;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const Certificate& cert) {
    const PowerLaw& g = cert.gamma.power_law_params();
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : cert.checks) {
        checks.push_back({{"id", std::string(to_string(c.id))},
                          {"lhs", c.lhs},
                          {"rhs", c.rhs},
                          {"strict", c.strict},
                          {"pass", c.pass}});
    }
    return {
        {"gamma", {{"b0", g.b0}, {"b1", g.b1}, {"d", g.d}}},
        {"bound", {{"c0", cert.bound.c0}, {"p", cert.bound.p}}},
        {"mu0", cert.mu0},
        {"branch", std::string(to_string(cert.branch))},
        {"checks", checks},
        {"valid", cert.valid},
        {"regime", std::string(to_string(cert.regime))},
    };
}

Certificate certificate_from_json(const nlohmann::json& doc) {
    try {
        Certificate cert;
        const auto& g = doc.at("gamma");
        cert.gamma = GammaModel::power_law(g.at("b0").get<double>(), g.at("b1").get<double>(), g.at("d").get<double>());
        cert.bound = {doc.at("bound").at("c0").get<double>(), doc.at("bound").at("p").get<double>()};
        cert.bound.validate();
        cert.mu0 = doc.at("mu0").get<double>();
        cert.branch = branch_from_string(doc.at("branch").get<std::string>());
        cert.regime = regime_from_string(doc.at("regime").get<std::string>());
        cert.valid = doc.at("valid").get<bool>();
        for (const auto& c : doc.at("checks")) {
            ConditionReport r;
            r.id = condition_id_from_string(c.at("id").get<std::string>());
            r.lhs = c.at("lhs").get<double>();
            r.rhs = c.at("rhs").get<double>();
            r.strict = c.at("strict").get<bool>();
            r.pass = c.at("pass").get<bool>();
            cert.checks.push_back(std::move(r));
        }
        return cert;
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed certificate JSON: ") + e.what());
    }
}

}  // namespace stabcert
