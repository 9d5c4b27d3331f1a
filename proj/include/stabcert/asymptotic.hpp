#pragma once

// L1-perturbed constant-coefficient systems
//
//     u' = A u,            u(0) = u0
//     v' = (A + B(t)) v,   integral_0^inf |B(s)| ds < inf
//
// Two questions are answered numerically: boundedness of v under a
// dissipative A (|v(t)| <= exp(integral |B|) |v0|), and asymptotic matching,
// where v is the solution of
//
//     v(t) = e^{tA} u0 - integral_t^inf e^{(t-s)A} B(s) v(s) ds
//
// obtained by Picard iteration, so that |v(t) - u(t)| <= C integral_t^inf |B|
// with C = c sup|v| and c >= sup_t |e^{tA}|.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stabcert/evolution.hpp"
#include "stabcert/expm.hpp"

namespace stabcert {

/// max |e^{tA}| over t = 0 and `samples` log-spaced times in [horizon * 1e-6,
/// horizon], times 1.01. A sampled estimate, not a proof. Throws
/// UnboundedSemigroup when |e^{horizon A}| exceeds the maximum over
/// [0, horizon / 10].
[[nodiscard]] double propagator_bound(const Eigen::MatrixXd& a, double horizon = 1e3, std::size_t samples = 200);

/// B(t) families. The built-in ones carry closed-form norm tails.
struct Perturbation {
    enum class Kind {
        Zero,
        ExpDecay,    // e^{-alpha t} R
        PowerDecay,  // (1 + t)^{-q} R, q > 1
        User,        // arbitrary B(t) with its norm integral supplied
    };
    Kind kind = Kind::Zero;
    Eigen::MatrixXd r;
    double rate = 1.0;  // alpha or q
    MatrixFunction user;
    double user_norm_integral = 0.0;

    static Perturbation zero(std::size_t n);
    static Perturbation exp_decay(Eigen::MatrixXd r, double alpha);
    static Perturbation power_decay(Eigen::MatrixXd r, double q);
    static Perturbation user_defined(MatrixFunction b, double norm_integral);
};

class PerturbedSystem {
public:
    /// `c` defaults to propagator_bound(a). A supplied `c` is trusted as a
    /// bound on |e^{tA}| for all real t, which levinson_match needs.
    PerturbedSystem(Eigen::MatrixXd a, Perturbation b, std::optional<double> c = std::nullopt);

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(a_.rows()); }
    [[nodiscard]] const Eigen::MatrixXd& a() const noexcept { return a_; }
    [[nodiscard]] const Perturbation& perturbation() const noexcept { return b_; }
    [[nodiscard]] double propagator_constant() const noexcept { return c_; }
    [[nodiscard]] bool propagator_constant_supplied() const noexcept { return c_supplied_; }
    [[nodiscard]] double b_norm_integral() const noexcept { return b_norm_integral_; }

    [[nodiscard]] Eigen::MatrixXd b(double t) const;
    [[nodiscard]] double b_norm(double t) const;
    /// integral_t^inf |B(s)| ds; throws Unsupported for user-defined B.
    [[nodiscard]] double b_norm_tail(double t) const;
    [[nodiscard]] bool has_closed_form_tail() const noexcept { return b_.kind != Perturbation::Kind::User; }

private:
    Eigen::MatrixXd a_;
    Perturbation b_;
    double c_ = 1.0;
    bool c_supplied_ = false;
    double r_norm_ = 0.0;
    double b_norm_integral_ = 0.0;
};

/// c1 |v0| with c1 = exp(integral_0^inf |B|). Requires the numerical abscissa
/// of A to be <= 0 (throws ParameterError otherwise).
[[nodiscard]] double perturbed_stability_bound(const PerturbedSystem& sys, const Eigen::VectorXd& v0);

/// Trajectory of v' = (A + B(t)) v on [0, T].
[[nodiscard]] Trajectory simulate_perturbed(const PerturbedSystem& sys, const Eigen::VectorXd& v0, double T,
                                            const SimulateOptions& options = {});

struct CauchyCheck {
    bool pass = true;
    double worst_ratio = 0.0;  // |d|v|| / allowance, maximized over pairs
    double spread = 0.0;       // max - min of |v| on the tail
};

/// For consecutive samples with t >= from:
///   |v(t2)| - |v(t1)| <= integral_{t1}^{t2} |B| * sup|v| + tol * sup|v|
/// and decreases are allowed an extra rho (t2 - t1) sup|v|, rho = |(A + A^T)/2|.
/// With a skew A this is the two-sided bound |d|v|/dt| <= |B| |v|. Increases
/// are summable and |v| >= 0, so passing implies |v(t)| has a finite limit. The
/// tol slack absorbs integrator drift.
[[nodiscard]] CauchyCheck limit_cauchy_check(const PerturbedSystem& sys, const Trajectory& traj, double from,
                                             double tol = 1e-6);

struct LevinsonOptions {
    double tol = 1e-10;
    /// Left end of the Picard domain; chosen automatically when absent as the
    /// smallest multiple of 0.25 with c * integral_t^inf |B| < 0.9.
    std::optional<double> t_start;
    /// Right end; beyond it the integral is bounded analytically. Chosen
    /// automatically when absent so that this bound stays below tol, or as
    /// far as max_panels reaches (the bound is then reported as
    /// truncation_bound and included in kernel_integral).
    std::optional<double> t_max;
    std::size_t nodes_per_panel = 16;
    std::size_t max_panels = 4000;
    std::size_t max_iterations = 200;
};

struct PicardDiagnostics {
    std::size_t iterations = 0;
    std::vector<double> differences;  // sup-norm of successive iterates
    std::vector<double> ratios;       // differences[k+1] / differences[k]
    /// sup_t integral_t^{t_max} |e^{(t-s)A}| |B(s)| ds + c * tail(t_max):
    /// an operator-norm bound for the iteration map.
    double contraction_bound = 0.0;
    /// c * integral_{t_start}^inf |B|
    double contraction_nominal = 0.0;
    std::size_t panels = 0;
    double truncation_bound = 0.0;  // neglected integral beyond t_max
    double residual = 0.0;          // max |v' - (A + B) v| over the nodes
};

/// Solution of the tail integral equation, defined for all t >= 0.
class MatchedPair {
public:
    [[nodiscard]] const PerturbedSystem& system() const noexcept { return *sys_; }
    [[nodiscard]] const Eigen::VectorXd& u0() const noexcept { return u0_; }
    [[nodiscard]] double t_start() const noexcept { return t_start_; }
    [[nodiscard]] double t_max() const noexcept { return t_max_; }
    [[nodiscard]] const PicardDiagnostics& diagnostics() const noexcept { return diag_; }

    /// u(t) = e^{tA} u0
    [[nodiscard]] Eigen::VectorXd u(double t) const;
    /// Piecewise Chebyshev interpolant on [0, t_max]. Node values come from
    /// the Picard iteration on [t_start, t_max] and from backward integration
    /// of v' = (A + B) v below t_start. Throws DomainError outside [0, t_max].
    [[nodiscard]] Eigen::VectorXd v(double t) const;
    /// v(t) - u(t). On the Picard domain it is evaluated from the integral
    /// equation (Nystrom), so it stays accurate relative to its own size
    /// where v(t) - u(t) formed by subtraction would be rounding noise.
    [[nodiscard]] Eigen::VectorXd difference(double t) const;
    /// sup |v| over all interpolation nodes.
    [[nodiscard]] double sup_v() const noexcept { return sup_v_; }
    /// Bound on |e^{tA}| over all real t used for matching.
    [[nodiscard]] double two_sided_constant() const noexcept { return c_; }
    [[nodiscard]] double tolerance() const noexcept { return tol_; }
    /// C * integral_t^inf |B| with C = c * sup|v|.
    [[nodiscard]] double tail_bound(double t) const;
    /// integral_t^inf |e^{(t-s)A}| |B(s)| |v(s)| ds (truncated at t_max, plus
    /// the analytic bound for the remainder).
    [[nodiscard]] double kernel_integral(double t) const;

    [[nodiscard]] Trajectory v_trajectory(const std::vector<double>& times) const;

private:
    friend MatchedPair levinson_match(const PerturbedSystem&, const Eigen::VectorXd&, const LevinsonOptions&);

    [[nodiscard]] std::size_t panel_of(double t) const;

    std::shared_ptr<const PerturbedSystem> sys_;
    std::shared_ptr<const ExponentialOperator> exp_;
    Eigen::VectorXd u0_;
    double t_start_ = 0.0;
    double t_max_ = 0.0;
    double c_ = 1.0;
    double tol_ = 0.0;
    std::vector<double> breaks_;      // panel boundaries from 0 to t_max
    std::vector<double> cheb_;        // reference nodes on [-1, 1], ascending
    std::vector<double> bary_;        // barycentric weights
    std::vector<Eigen::VectorXd> nodes_v_;  // panel-major node values
    std::vector<Eigen::VectorXd> nodes_w_;  // u - v on the forward panels
    std::size_t back_panels_ = 0;
    double sup_v_ = 0.0;
    PicardDiagnostics diag_;
};

/// Picard iteration on [t_start, t_max] with backward extension to 0. The
/// kernel e^{(t-s)A} runs backwards in time, so unless the system carries a
/// supplied `c` the bound is also estimated for -A (UnboundedSemigroup when
/// that fails). Throws Unsupported for user-defined B and Infeasible when no
/// admissible t_start exists or the iteration does not converge.
[[nodiscard]] MatchedPair levinson_match(const PerturbedSystem& sys, const Eigen::VectorXd& u0,
                                         const LevinsonOptions& options = {});

struct MatchingRow {
    double t = 0.0;
    double error = 0.0;   // |v(t) - u(t)|, from MatchedPair::difference
    double kernel = 0.0;  // integral_t^inf |e^{(t-s)A}| |B| |v| ds
    double bound = 0.0;   // C integral_t^inf |B|
    double ratio = 0.0;   // error / bound (0 when both vanish)
};

struct MatchingReport {
    std::vector<MatchingRow> rows;
    /// error <= kernel <= bound at every row, each up to `tol` relative.
    bool chain_holds = true;
    double max_ratio = 0.0;
    CauchyCheck limit;
};

[[nodiscard]] MatchingReport matching_error_report(const MatchedPair& pair, const std::vector<double>& sample_times,
                                                   double tol = 1e-6);

/// CSV `t,error,bound,ratio`.
[[nodiscard]] std::string matching_csv(const MatchingReport& report);

}  // namespace stabcert
