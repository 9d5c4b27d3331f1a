#include "stabcert/comparison.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "stabcert/errors.hpp"
#include "stabcert/format.hpp"
#include "stabcert/ode.hpp"

namespace stabcert {

TimeFunction constant_function(double c) {
    return [c](double) { return c; };
}

ScalarTrajectory integrate_scalar(const ScalarProblem& problem, double T, double rel_tol,
                                  const ScalarOptions& options) {
    if (!(rel_tol >= 1e-12 && rel_tol <= 1e-2)) throw ParameterError("rel_tol must lie in [1e-12, 1e-2]");
    if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("T must be positive and finite");
    if (T > problem.gamma.horizon()) throw DomainError("T exceeds the gamma table");
    if (!(problem.p > 0.0)) throw ParameterError("p must be positive");
    if (!(problem.g0 >= 0.0) || !std::isfinite(problem.g0)) throw ParameterError("g0 must be finite and nonnegative");
    if (!problem.a) throw ParameterError("a(t) is empty");
    for (std::size_t i = 0; i < options.report_times.size(); ++i) {
        const double r = options.report_times[i];
        if (!(r >= 0.0 && r <= T) || (i > 0 && r < options.report_times[i - 1]))
            throw ParameterError("report times must be sorted and lie in [0, T]");
    }

    // g = 2^e y; the power-of-two rescaling keeps y inside the double range
    // when the damping drives g far below it
    int e = 0;
    const double exponent = 1.0 + problem.p;
    ode::Rhs rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        const double g = y[0];
        double growth = 0.0;
        const double a = problem.a(t);
        if (g > 0.0 && a != 0.0) {
            growth = e == 0 ? a * std::pow(g, exponent)
                            : a * std::exp(exponent * std::log(g) + problem.p * e * std::numbers::ln2);
        }
        double beta = problem.beta(t);
        if (beta != 0.0 && e != 0) beta = std::ldexp(beta, -e);
        dy[0] = -problem.gamma(t) * g + growth + beta;
    };

    ScalarTrajectory traj;
    auto record = [&](double t, double y) {
        traj.times.push_back(t);
        traj.values.push_back(std::ldexp(y, e));
        traj.log_values.push_back(std::log(y) + e * std::numbers::ln2);
    };
    record(0.0, problem.g0);
    traj.report_times = options.report_times;
    traj.report_values.assign(options.report_times.size(), 0.0);
    traj.report_log_values.assign(options.report_times.size(), -std::numeric_limits<double>::infinity());

    constexpr int kRescaleBits = 256;
    const double lo = std::ldexp(1.0, -kRescaleBits);
    const double hi = std::ldexp(1.0, kRescaleBits);
    auto on_step = [&](double t, Eigen::VectorXd& y) {
        ode::StepAction act = ode::StepAction::Continue;
        if (y[0] < 0.0) {
            y[0] = 0.0;
            act = ode::StepAction::Modified;
        }
        record(t, y[0]);
        if (traj.values.back() > options.blowup_threshold || !std::isfinite(y[0])) {
            return ode::StepAction::Stop;
        }
        int shift = 0;
        if (y[0] > 0.0 && y[0] < lo) shift = kRescaleBits;
        if (y[0] > hi && e < 0) shift = -kRescaleBits;
        if (shift != 0) {
            y[0] = std::ldexp(y[0], shift);
            e -= shift;
            act = ode::StepAction::Modified;
        }
        return act;
    };
    auto on_dense = [&](std::size_t i, double, const Eigen::VectorXd& y) {
        const double g = std::max(y[0], 0.0);
        traj.report_values[i] = std::ldexp(g, e);
        traj.report_log_values[i] = std::log(g) + e * std::numbers::ln2;
    };

    ode::Options opt;
    opt.rel_tol = 0.1 * rel_tol;  // per-step; keeps the global error within rel_tol
    opt.underflow_factor = options.underflow_factor;
    const auto res = ode::integrate(rhs, 0.0, T, Eigen::VectorXd::Constant(1, problem.g0), opt,
                                    options.report_times, on_step, on_dense);
    traj.steps_accepted = res.stats.accepted;
    traj.steps_rejected = res.stats.rejected;

    switch (res.status) {
        case ode::Status::Completed:
            break;
        case ode::Status::Stopped:
        case ode::Status::StepUnderflow:
            traj.status = ScalarStatus::BlowUp;
            traj.tau = res.t;
            break;
        case ode::Status::MaxSteps:
            throw ParameterError("scalar integration exhausted its step budget");
    }
    if (traj.status == ScalarStatus::BlowUp) {
        // dense values past the blow-up time are meaningless
        std::size_t keep = 0;
        while (keep < traj.report_times.size() && traj.report_times[keep] <= res.t) ++keep;
        traj.report_times.resize(keep);
        traj.report_values.resize(keep);
        traj.report_log_values.resize(keep);
    }
    return traj;
}

DominanceResult check_dominance(const ScalarTrajectory& traj, const Certificate& cert) {
    if (!cert.valid) throw CertificateInvalid("dominance check refused: certificate is invalid");
    if (traj.status == ScalarStatus::BlowUp) {
        std::ostringstream msg;
        msg << "comparison solution blew up at t = " << traj.tau.value_or(0.0) << " under a valid certificate";
        throw InvariantViolation(msg.str());
    }
    DominanceResult out;
    double worst = -std::numeric_limits<double>::infinity();
    auto visit = [&](double t, double log_g) {
        const double log_prod = log_g + mu_eval(cert.mu0, cert.gamma, t).log_value;
        if (log_prod > worst || (log_prod == worst && t < out.at) || std::isnan(log_prod)) {
            worst = log_prod;
            out.at = t;
        }
        if (!(log_prod < 0.0)) out.pass = false;
    };
    for (std::size_t i = 0; i < traj.times.size(); ++i) visit(traj.times[i], traj.log_values[i]);
    for (std::size_t i = 0; i < traj.report_times.size(); ++i)
        visit(traj.report_times[i], traj.report_log_values[i]);
    out.max_product = std::exp(worst);
    return out;
}

std::string to_csv(const ScalarTrajectory& traj) {
    std::string out = "t,g\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        out += shortest(traj.times[i]);
        out += ',';
        out += shortest(traj.values[i]);
        out += '\n';
    }
    return out;
}

nlohmann::json sidecar_json(const ScalarTrajectory& traj) {
    nlohmann::json doc;
    doc["status"] = traj.status == ScalarStatus::Completed ? "Completed" : "BlowUp";
    doc["tau"] = traj.tau ? nlohmann::json(*traj.tau) : nlohmann::json(nullptr);
    doc["steps_accepted"] = traj.steps_accepted;
    doc["steps_rejected"] = traj.steps_rejected;
    return doc;
}

}  // namespace stabcert
