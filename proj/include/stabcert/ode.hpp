#pragma once

// Explicit Dormand-Prince 5(4) pair with PI step-size control and Hairer's
// fourth-order continuous extension. Error control is norm-based:
//
//     err = |e|_2 / (abs_floor + rel_tol * max(|y_n|_2, |y_{n+1}|_2))
//
// so the tolerance is relative to the size of the whole state, which is what
// envelope checks on |u(t)| need.

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>

namespace stabcert::ode {

using Rhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt)>;

struct Options {
    double rel_tol = 1e-8;
    double abs_floor = 1e-300;
    double initial_step = 0.0;  // 0: automatic
    double max_step = std::numeric_limits<double>::infinity();
    /// Step underflow when h < underflow_factor * (|t| + 1).
    double underflow_factor = 1e-14;
    std::size_t max_steps = 200'000'000;
};

enum class Status { Completed, Stopped, StepUnderflow, MaxSteps };

enum class StepAction {
    Continue,
    Modified,  // the observer changed y; the derivative is recomputed
    Stop,
};

/// Called after every accepted step with the new state.
using StepObserver = std::function<StepAction(double t, Eigen::VectorXd& y)>;
/// Called once per requested dense time, in order.
using DenseObserver = std::function<void(std::size_t index, double t, const Eigen::VectorXd& y)>;

struct Stats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_evaluations = 0;
    double min_step = std::numeric_limits<double>::infinity();
};

struct Result {
    Status status = Status::Completed;
    double t = 0.0;
    Eigen::VectorXd y;
    Stats stats;
};

/// Integrates y' = f(t, y) from t0 to t1 > t0. `dense_times` must be sorted
/// and lie in [t0, t1]; entries equal to t0 are reported with y0.
[[nodiscard]] Result integrate(const Rhs& f, double t0, double t1, Eigen::VectorXd y0, const Options& options,
                               std::span<const double> dense_times = {}, const StepObserver& on_step = {},
                               const DenseObserver& on_dense = {});

}  // namespace stabcert::ode
