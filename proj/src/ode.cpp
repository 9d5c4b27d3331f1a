#include "stabcert/ode.hpp"

#include <algorithm>
#include <cmath>

#include "stabcert/errors.hpp"

namespace stabcert::ode {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// continuous extension
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// PI controller constants (Hairer & Wanner, DOPRI5)
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;
constexpr double kSafe = 0.9;
constexpr double kMinFactor = 0.2;  // step may shrink to 1/5 ...
constexpr double kMaxFactor = 10.0;  // ... or grow tenfold

double initial_step(const Rhs& f, double t0, const Eigen::VectorXd& y0, const Eigen::VectorXd& f0,
                    const Options& opt, double span, Stats& stats) {
    const double sc = opt.abs_floor + opt.rel_tol * y0.norm();
    const double dnf = f0.norm() / sc;
    const double dny = y0.norm() / sc;
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
    h = std::min({h, opt.max_step, span});
    Eigen::VectorXd y1 = y0 + h * f0;
    Eigen::VectorXd f1(y0.size());
    f(t0 + h, y1, f1);
    ++stats.rhs_evaluations;
    const double der2 = (f1 - f0).norm() / sc / h;
    const double der = std::max(der2, dnf);
    const double h1 = der <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der, 0.2);
    return std::min({100.0 * h, h1, opt.max_step, span});
}

}  // namespace

Result integrate(const Rhs& f, double t0, double t1, Eigen::VectorXd y0, const Options& opt,
                 std::span<const double> dense_times, const StepObserver& on_step, const DenseObserver& on_dense) {
    if (!(t1 > t0)) throw ParameterError("integration interval must have t1 > t0");
    if (!(opt.rel_tol > 0.0)) throw ParameterError("rel_tol must be positive");

    Result res;
    const auto n = y0.size();
    Eigen::VectorXd y = std::move(y0);
    Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), stage(n), y_new(n), err(n);
    Eigen::VectorXd r1(n), r2(n), r3(n), r4(n), r5(n), dense(n);

    std::size_t next_dense = 0;
    while (next_dense < dense_times.size() && dense_times[next_dense] <= t0) {
        if (on_dense) on_dense(next_dense, dense_times[next_dense], y);
        ++next_dense;
    }

    double t = t0;
    f(t, y, k1);
    ++res.stats.rhs_evaluations;
    double h = opt.initial_step > 0.0 ? std::min(opt.initial_step, t1 - t0)
                                      : initial_step(f, t0, y, k1, opt, t1 - t0, res.stats);
    double err_old = 1e-4;
    bool last_rejected = false;

    while (t < t1) {
        if (res.stats.accepted + res.stats.rejected >= opt.max_steps) {
            res.status = Status::MaxSteps;
            break;
        }
        if (h < opt.underflow_factor * (std::abs(t) + 1.0)) {
            res.status = Status::StepUnderflow;
            break;
        }
        bool last = false;
        if (t + 1.01 * h >= t1) {
            h = t1 - t;
            last = true;
        }
        const double t_new = last ? t1 : t + h;
        auto at = [&](double c) { return std::min(t + c * h, t_new); };

        stage.noalias() = y + h * a21 * k1;
        f(at(c2), stage, k2);
        stage.noalias() = y + h * (a31 * k1 + a32 * k2);
        f(at(c3), stage, k3);
        stage.noalias() = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        f(at(c4), stage, k4);
        stage.noalias() = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        f(at(c5), stage, k5);
        stage.noalias() = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(t_new, stage, k6);
        y_new.noalias() = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        f(t_new, y_new, k7);
        res.stats.rhs_evaluations += 6;
        err.noalias() = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        const double sc = opt.abs_floor + opt.rel_tol * std::max(y.norm(), y_new.norm());
        double err_norm = err.norm() / sc;
        if (!std::isfinite(err_norm) || !y_new.allFinite()) err_norm = std::numeric_limits<double>::infinity();

        const double fac11 = std::pow(err_norm, kExpo);
        if (err_norm <= 1.0) {
            double fac = fac11 / std::pow(err_old, kBeta);
            fac = std::clamp(fac / kSafe, 1.0 / kMaxFactor, 1.0 / kMinFactor);
            double h_next = std::min(h / fac, opt.max_step);
            if (last_rejected) h_next = std::min(h_next, h);
            err_old = std::max(err_norm, 1e-4);
            last_rejected = false;

            ++res.stats.accepted;
            res.stats.min_step = std::min(res.stats.min_step, h);

            if (on_dense && next_dense < dense_times.size() && dense_times[next_dense] <= t_new) {
                r1 = y;
                r2 = y_new - y;
                r3 = h * k1 - r2;
                r4 = r2 - h * k7 - r3;
                r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                while (next_dense < dense_times.size() && dense_times[next_dense] <= t_new) {
                    const double theta = (dense_times[next_dense] - t) / h;
                    const double theta1 = 1.0 - theta;
                    dense = r1 + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
                    on_dense(next_dense, dense_times[next_dense], dense);
                    ++next_dense;
                }
            }

            t = t_new;
            y.swap(y_new);
            k1.swap(k7);
            h = h_next;
            if (on_step) {
                const StepAction act = on_step(t, y);
                if (act == StepAction::Stop) {
                    res.status = Status::Stopped;
                    break;
                }
                if (act == StepAction::Modified) {
                    f(t, y, k1);
                    ++res.stats.rhs_evaluations;
                }
            }
        } else {
            ++res.stats.rejected;
            last_rejected = true;
            const double shrink = std::isfinite(fac11) ? std::min(1.0 / kMinFactor, fac11 / kSafe) : 1.0 / kMinFactor;
            h /= shrink;
        }
    }
    res.t = t;
    res.y = std::move(y);
    return res;
}

}  // namespace stabcert::ode
