#pragma once

// Finite-dimensional realizations of u' = A(t)u + F(t,u) on R^n with the
// Euclidean inner product.
//
// The built-in family A(t) = -gamma(t) I + omega K (K skew-symmetric, unit
// spectral norm) has symmetric part exactly -gamma(t) I, so
// (A(t)u, u) = -gamma(t)|u|^2 holds with equality: the worst case allowed by
// the dissipativity hypothesis.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "stabcert/comparison.hpp"
#include "stabcert/core.hpp"

namespace stabcert {

using MatrixFunction = std::function<Eigen::MatrixXd(double t)>;
using VectorField = std::function<void(double t, const Eigen::VectorXd& u, Eigen::VectorXd& out)>;

struct Nonlinearity {
    enum class Kind {
        None,       // F = 0
        Radial,     // F = c0 |u|^p u, saturates the bound
        Rotated,    // F = c0 |u|^p Q u, Q orthogonal (seeded)
        Truncated,  // F = c0 min(|u|, M)^p u
        Custom,     // user field, bound checked by sampling
    };
    Kind kind = Kind::None;
    double c0 = 0.0;
    double p = 1.0;
    double truncate_at = 1.0;        // M for Truncated
    std::uint64_t rotation_seed = 0;  // Q for Rotated
    VectorField custom;

    static Nonlinearity none() { return {}; }
    static Nonlinearity radial(double c0, double p);
    static Nonlinearity rotated(double c0, double p, std::uint64_t seed);
    static Nonlinearity truncated(double c0, double p, double m);
    static Nonlinearity custom_field(VectorField f, double c0, double p);
};

[[nodiscard]] std::string_view to_string(Nonlinearity::Kind k);
[[nodiscard]] Nonlinearity::Kind nonlinearity_kind_from_string(std::string_view s);

/// Parameters of the built-in DissipativePlusSkew family.
struct SystemSpec {
    std::size_t dim = 1;
    GammaModel gamma = GammaModel::power_law(1.0, 1.0, 1.0);
    double omega = 0.0;
    std::uint64_t skew_seed = 0;
    Nonlinearity nonlinearity;
};

class TimeVaryingSystem {
public:
    enum class Construction { DissipativePlusSkew, UserMatrix };

    static TimeVaryingSystem dissipative_plus_skew(const SystemSpec& spec);
    /// `claimed_gamma`, when given, is checked against the numerical abscissa
    /// at 100 sampled times in [0, check_horizon]; failure (or no claim) marks
    /// the system "hypothesis unverified" with a warning instead of throwing.
    static TimeVaryingSystem user_matrix(std::size_t dim, MatrixFunction a_of_t,
                                         std::optional<GammaModel> claimed_gamma, Nonlinearity f,
                                         double check_horizon = 1e3);

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] Construction construction() const noexcept { return construction_; }
    [[nodiscard]] Eigen::MatrixXd a_of_t(double t) const;
    /// out = A(t) u + F(t, u)
    void rhs(double t, const Eigen::VectorXd& u, Eigen::VectorXd& out) const;
    void apply_linear(double t, const Eigen::VectorXd& u, Eigen::VectorXd& out) const;
    void apply_nonlinear(double t, const Eigen::VectorXd& u, Eigen::VectorXd& out) const;
    /// out = 2^{-e} F(t, 2^e y), evaluated without forming 2^e y, for the
    /// built-in nonlinearities. Custom fields require e = 0.
    void apply_nonlinear_scaled(double t, const Eigen::VectorXd& y, int e, Eigen::VectorXd& out) const;

    [[nodiscard]] const PerturbationBound& f_bound() const noexcept { return f_bound_; }
    [[nodiscard]] const Nonlinearity& nonlinearity() const noexcept { return f_; }
    [[nodiscard]] const std::optional<GammaModel>& gamma() const noexcept { return gamma_; }
    /// Unit-norm skew part K (DissipativePlusSkew only; zero for n = 1).
    [[nodiscard]] const Eigen::MatrixXd& skew() const noexcept { return skew_; }
    [[nodiscard]] double omega() const noexcept { return omega_; }
    [[nodiscard]] bool hypothesis_verified() const noexcept { return hypothesis_verified_; }
    [[nodiscard]] const std::vector<std::string>& warnings() const noexcept { return warnings_; }

private:
    TimeVaryingSystem() = default;
    void init_nonlinearity(Nonlinearity f);

    std::size_t dim_ = 0;
    Construction construction_ = Construction::DissipativePlusSkew;
    std::optional<GammaModel> gamma_;
    double omega_ = 0.0;
    Eigen::MatrixXd skew_;
    MatrixFunction user_a_;
    Nonlinearity f_;
    Eigen::MatrixXd rotation_;
    PerturbationBound f_bound_;
    bool hypothesis_verified_ = true;
    std::vector<std::string> warnings_;
};

[[nodiscard]] TimeVaryingSystem build_system(const SystemSpec& spec);

/// Seeded skew-symmetric matrix with unit spectral norm (zero for n = 1).
[[nodiscard]] Eigen::MatrixXd random_skew(std::size_t n, std::uint64_t seed);
/// Seeded orthogonal matrix.
[[nodiscard]] Eigen::MatrixXd random_orthogonal(std::size_t n, std::uint64_t seed);

/// Largest singular value; infinite when an entry is not finite.
[[nodiscard]] double spectral_norm(const Eigen::MatrixXd& m);

/// Largest eigenvalue of the symmetric part (A + A^T)/2.
[[nodiscard]] double numerical_abscissa(const Eigen::MatrixXd& a);
[[nodiscard]] double numerical_abscissa(const TimeVaryingSystem& system, double t);

struct TrajectoryDiagnostics {
    std::size_t steps_accepted = 0;
    std::size_t steps_rejected = 0;
    double min_step = 0.0;
    bool truncated = false;
    bool rotating_frame = false;
    int renormalizations = 0;
    std::string message;
};

struct Trajectory {
    std::size_t dim = 0;
    std::vector<double> times;
    std::vector<double> states;  // row-major, dim entries per time
    std::vector<double> norms;      // may underflow to 0 long before the state does
    std::vector<double> log_norms;  // natural log of |u|, exact across underflow
    std::vector<bool> is_report;  // dense-output sample rather than an accepted step
    TrajectoryDiagnostics diagnostics;

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
    [[nodiscard]] Eigen::Map<const Eigen::VectorXd> state(std::size_t i) const {
        return {states.data() + i * dim, static_cast<Eigen::Index>(dim)};
    }
};

struct SimulateOptions {
    double rel_tol = 1e-8;
    /// Log-spaced dense report times in [T * 1e-5, T], in addition to t = 0.
    std::size_t report_points = 200;
    std::vector<double> extra_report_times;
    bool record_steps = true;
    /// For DissipativePlusSkew systems whose F commutes with rotations (none,
    /// radial, truncated), integrate w = e^{-omega K t} u, which removes the
    /// skew oscillation exactly, and map back at output. Ignored otherwise.
    bool rotating_frame = false;
    double max_step = std::numeric_limits<double>::infinity();
};

/// Report grid used by simulate(): 0 plus `points` log-spaced times ending at T.
[[nodiscard]] std::vector<double> log_report_times(double T, std::size_t points);

/// Adaptive Dormand-Prince trajectory on [0, T]. Requires rel_tol in
/// [1e-12, 1e-2]. A step underflow truncates the trajectory and sets the
/// diagnostic instead of throwing.
///
/// With strong damping |u| leaves the double range long before T, so the
/// integrated state is y = 2^{-e} u with e adjusted in steps of 256 whenever
/// |y| drifts out of [2^-256, 2^256]. The power-of-two rescaling is exact and
/// the rescaled equation is the same ODE up to the scale, so step control is
/// unaffected. Custom nonlinearities are integrated unscaled.
[[nodiscard]] Trajectory simulate(const TimeVaryingSystem& system, const Eigen::VectorXd& u0, double T,
                                  const SimulateOptions& options = {});

/// As check_dominance but over |u(t_i)|, evaluated as log|u| + log mu so
/// that underflow of |u| cannot hide a breach. Throws CertificateInvalid for an
/// invalid certificate, InvariantViolation for a truncated trajectory.
[[nodiscard]] DominanceResult verify_trajectory_envelope(const Trajectory& traj, const Certificate& cert);

/// CSV `t,norm`.
[[nodiscard]] std::string norms_csv(const Trajectory& traj);
/// CSV `t,u_1,...,u_n`.
[[nodiscard]] std::string states_csv(const Trajectory& traj);

}  // namespace stabcert
