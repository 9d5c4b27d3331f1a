#include "stabcert/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "stabcert/errors.hpp"
#include "stabcert/expm.hpp"
#include "stabcert/format.hpp"
#include "stabcert/ode.hpp"

namespace stabcert {

namespace {

constexpr std::uint64_t kBoundCheckSeed = 0x5eedf00dULL;
constexpr int kBoundCheckSamples = 1000;
constexpr double kBoundCheckTolerance = 1e-10;
// Per-step tolerance relative to the requested one, so that the accumulated
// global error stays within rel_tol.
constexpr double kLocalTolerance = 0.1;

}  // namespace

// ---------------------------------------------------------------------------
// Nonlinearities

Nonlinearity Nonlinearity::radial(double c0, double p) {
    Nonlinearity f;
    f.kind = Kind::Radial;
    f.c0 = c0;
    f.p = p;
    return f;
}

Nonlinearity Nonlinearity::rotated(double c0, double p, std::uint64_t seed) {
    Nonlinearity f = radial(c0, p);
    f.kind = Kind::Rotated;
    f.rotation_seed = seed;
    return f;
}

Nonlinearity Nonlinearity::truncated(double c0, double p, double m) {
    if (!(m > 0.0 && std::isfinite(m))) throw ParameterError("truncation level M must be positive and finite");
    Nonlinearity f = radial(c0, p);
    f.kind = Kind::Truncated;
    f.truncate_at = m;
    return f;
}

Nonlinearity Nonlinearity::custom_field(VectorField field, double c0, double p) {
    Nonlinearity f = radial(c0, p);
    f.kind = Kind::Custom;
    f.custom = std::move(field);
    return f;
}

std::string_view to_string(Nonlinearity::Kind k) {
    switch (k) {
        case Nonlinearity::Kind::None: return "none";
        case Nonlinearity::Kind::Radial: return "radial";
        case Nonlinearity::Kind::Rotated: return "rotated";
        case Nonlinearity::Kind::Truncated: return "truncated";
        case Nonlinearity::Kind::Custom: return "custom";
    }
    return "unknown";
}

Nonlinearity::Kind nonlinearity_kind_from_string(std::string_view s) {
    using K = Nonlinearity::Kind;
    for (K k : {K::None, K::Radial, K::Rotated, K::Truncated}) {
        if (to_string(k) == s) return k;
    }
    throw ParameterError("unknown nonlinearity '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Matrices

Eigen::MatrixXd random_skew(std::size_t n, std::uint64_t seed) {
    const auto m = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
    if (n < 2) return k;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::MatrixXd raw(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) raw(i, j) = unif(rng);
    k = 0.5 * (raw - raw.transpose());
    const double norm = spectral_norm(k);
    if (norm > 0.0) k /= norm;
    return k;
}

Eigen::MatrixXd random_orthogonal(std::size_t n, std::uint64_t seed) {
    const auto m = static_cast<Eigen::Index>(n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd raw(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) raw(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
    return qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
}

double spectral_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    if (!m.allFinite()) return std::numeric_limits<double>::infinity();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

double numerical_abscissa(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols() || a.rows() == 0) throw ParameterError("numerical abscissa needs a square matrix");
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff();
}

double numerical_abscissa(const TimeVaryingSystem& system, double t) { return numerical_abscissa(system.a_of_t(t)); }

// ---------------------------------------------------------------------------
// TimeVaryingSystem

void TimeVaryingSystem::init_nonlinearity(Nonlinearity f) {
    using K = Nonlinearity::Kind;
    if (f.kind == K::None) {
        f.c0 = 0.0;
    }
    f_bound_ = {f.c0, f.p};
    f_bound_.validate();
    if (f.kind == K::Truncated && !(f.truncate_at > 0.0)) throw ParameterError("truncation radius must be positive");
    if (f.kind == K::Custom && !f.custom) throw ParameterError("custom nonlinearity is empty");
    if (f.kind == K::Rotated) rotation_ = random_orthogonal(dim_, f.rotation_seed);
    f_ = std::move(f);

    if (f_.kind == K::None) return;
    // |F(t,u)| <= c0 |u|^{1+p} on random samples
    std::mt19937_64 rng(kBoundCheckSeed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(dim_);
    Eigen::VectorXd u(n), out(n);
    for (int s = 0; s < kBoundCheckSamples; ++s) {
        for (Eigen::Index i = 0; i < n; ++i) u[i] = normal(rng);
        if (u.norm() == 0.0) continue;
        const double radius = std::pow(10.0, -3.0 + 6.0 * unif(rng));
        u *= radius / u.norm();
        const double t = 100.0 * unif(rng);
        apply_nonlinear(t, u, out);
        const double bound = f_bound_.c0 * std::pow(u.norm(), 1.0 + f_bound_.p);
        if (!(out.norm() <= bound * (1.0 + kBoundCheckTolerance) + 1e-300)) {
            std::ostringstream msg;
            msg << "nonlinearity violates |F| <= c0 |u|^(1+p) at t = " << t << ", |u| = " << u.norm();
            throw ParameterError(msg.str());
        }
    }
}

TimeVaryingSystem TimeVaryingSystem::dissipative_plus_skew(const SystemSpec& spec) {
    if (spec.dim == 0) throw ParameterError("system dimension must be positive");
    if (!std::isfinite(spec.omega)) throw ParameterError("omega must be finite");
    TimeVaryingSystem sys;
    sys.dim_ = spec.dim;
    sys.construction_ = Construction::DissipativePlusSkew;
    sys.gamma_ = spec.gamma;
    sys.omega_ = spec.omega;
    sys.skew_ = random_skew(spec.dim, spec.skew_seed);
    sys.init_nonlinearity(spec.nonlinearity);
    return sys;
}

TimeVaryingSystem TimeVaryingSystem::user_matrix(std::size_t dim, MatrixFunction a_of_t,
                                                 std::optional<GammaModel> claimed_gamma, Nonlinearity f,
                                                 double check_horizon) {
    if (dim == 0) throw ParameterError("system dimension must be positive");
    if (!a_of_t) throw ParameterError("matrix function is empty");
    TimeVaryingSystem sys;
    sys.dim_ = dim;
    sys.construction_ = Construction::UserMatrix;
    sys.user_a_ = std::move(a_of_t);
    sys.gamma_ = std::move(claimed_gamma);
    const Eigen::MatrixXd a0 = sys.user_a_(0.0);
    if (a0.rows() != static_cast<Eigen::Index>(dim) || a0.cols() != static_cast<Eigen::Index>(dim))
        throw ParameterError("matrix function returns the wrong shape");
    sys.init_nonlinearity(std::move(f));

    if (!sys.gamma_) {
        sys.hypothesis_verified_ = false;
        sys.warnings_.emplace_back("no dissipation rate supplied: hypothesis unverified");
        return sys;
    }
    const double horizon = std::min(check_horizon, sys.gamma_->horizon());
    for (double t : log_report_times(horizon, 99)) {
        const Eigen::MatrixXd a = sys.user_a_(t);
        const double abscissa = numerical_abscissa(a);
        const double g = (*sys.gamma_)(t);
        const double slack = 1e-10 * std::max(1.0, a.norm());
        if (abscissa > -g + slack) {
            std::ostringstream msg;
            msg << "hypothesis unverified: numerical abscissa " << abscissa << " > -gamma(" << t << ") = " << -g;
            sys.warnings_.push_back(msg.str());
            sys.hypothesis_verified_ = false;
            break;
        }
    }
    return sys;
}

TimeVaryingSystem build_system(const SystemSpec& spec) { return TimeVaryingSystem::dissipative_plus_skew(spec); }

Eigen::MatrixXd TimeVaryingSystem::a_of_t(double t) const {
    if (construction_ == Construction::UserMatrix) return user_a_(t);
    const auto n = static_cast<Eigen::Index>(dim_);
    return -(*gamma_)(t) * Eigen::MatrixXd::Identity(n, n) + omega_ * skew_;
}

void TimeVaryingSystem::apply_linear(double t, const Eigen::VectorXd& u, Eigen::VectorXd& out) const {
    if (construction_ == Construction::UserMatrix) {
        out.noalias() = user_a_(t) * u;
        return;
    }
    out = -(*gamma_)(t) * u;
    if (omega_ != 0.0 && dim_ > 1) out.noalias() += omega_ * (skew_ * u);
}

void TimeVaryingSystem::apply_nonlinear(double t, const Eigen::VectorXd& u, Eigen::VectorXd& out) const {
    using K = Nonlinearity::Kind;
    switch (f_.kind) {
        case K::None:
            out.setZero(u.size());
            return;
        case K::Radial:
            out = f_.c0 * std::pow(u.norm(), f_.p) * u;
            return;
        case K::Rotated:
            out.noalias() = (f_.c0 * std::pow(u.norm(), f_.p)) * (rotation_ * u);
            return;
        case K::Truncated:
            out = f_.c0 * std::pow(std::min(u.norm(), f_.truncate_at), f_.p) * u;
            return;
        case K::Custom:
            out.resize(u.size());
            f_.custom(t, u, out);
            return;
    }
}

void TimeVaryingSystem::apply_nonlinear_scaled(double t, const Eigen::VectorXd& y, int e,
                                               Eigen::VectorXd& out) const {
    using K = Nonlinearity::Kind;
    if (e == 0 || f_.kind == K::None) {
        apply_nonlinear(t, y, out);
        return;
    }
    if (f_.kind == K::Custom) throw ParameterError("custom nonlinearities cannot be evaluated on a rescaled state");
    const double ny = y.norm();
    if (ny == 0.0) {
        out.setZero(y.size());
        return;
    }
    // |u|^p = exp(p (log|y| + e log 2)), capped at M^p when truncated
    double log_r = std::log(ny) + e * std::numbers::ln2;
    if (f_.kind == K::Truncated) log_r = std::min(log_r, std::log(f_.truncate_at));
    const double factor = f_.c0 * std::exp(f_.p * log_r);
    if (f_.kind == K::Rotated) {
        out.noalias() = factor * (rotation_ * y);
    } else {
        out = factor * y;
    }
}

void TimeVaryingSystem::rhs(double t, const Eigen::VectorXd& u, Eigen::VectorXd& out) const {
    apply_linear(t, u, out);
    if (f_.kind == Nonlinearity::Kind::None) return;
    using K = Nonlinearity::Kind;
    if (f_.kind == K::Radial) {
        out += f_.c0 * std::pow(u.norm(), f_.p) * u;
        return;
    }
    Eigen::VectorXd nl(u.size());
    apply_nonlinear(t, u, nl);
    out += nl;
}

// ---------------------------------------------------------------------------
// Simulation

std::vector<double> log_report_times(double T, std::size_t points) {
    std::vector<double> out{0.0};
    if (points == 0) return out;
    const double lo = std::log(T * 1e-5);
    const double hi = std::log(T);
    for (std::size_t k = 0; k < points; ++k) {
        if (k + 1 == points) {
            out.push_back(T);
        } else {
            const double frac = points == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(points - 1);
            out.push_back(std::exp(lo + (hi - lo) * frac));
        }
    }
    return out;
}

Trajectory simulate(const TimeVaryingSystem& system, const Eigen::VectorXd& u0, double T,
                    const SimulateOptions& options) {
    if (static_cast<std::size_t>(u0.size()) != system.dim()) throw ParameterError("initial state has wrong dimension");
    if (!(options.rel_tol >= 1e-12 && options.rel_tol <= 1e-2))
        throw ParameterError("rel_tol must lie in [1e-12, 1e-2]");
    if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("T must be positive and finite");
    if (system.gamma() && T > system.gamma()->horizon()) throw DomainError("T exceeds the gamma table");

    std::vector<double> reports = log_report_times(T, options.report_points);
    for (double r : options.extra_report_times) {
        if (!(r >= 0.0 && r <= T)) throw ParameterError("extra report times must lie in [0, T]");
        reports.push_back(r);
    }
    std::sort(reports.begin(), reports.end());
    reports.erase(std::unique(reports.begin(), reports.end()), reports.end());

    using K = Nonlinearity::Kind;
    const K kind = system.nonlinearity().kind;
    const bool rotating = options.rotating_frame &&
                          system.construction() == TimeVaryingSystem::Construction::DissipativePlusSkew &&
                          system.omega() != 0.0 && system.dim() > 1 &&
                          (kind == K::None || kind == K::Radial || kind == K::Truncated);
    std::optional<ExponentialOperator> frame;
    if (rotating) frame.emplace(system.omega() * system.skew());

    Trajectory traj;
    traj.dim = system.dim();
    traj.diagnostics.rotating_frame = rotating;
    const bool rescale = kind != K::Custom;
    int e = 0;  // u = 2^e y
    Eigen::VectorXd mapped(u0.size());
    auto push = [&](double t, const Eigen::VectorXd& y, bool report) {
        if (!traj.times.empty() && traj.times.back() == t) {
            if (report) traj.is_report.back() = true;
            return;
        }
        const Eigen::VectorXd& v = rotating ? (mapped = (*frame)(t) * y) : y;
        traj.times.push_back(t);
        for (Eigen::Index i = 0; i < v.size(); ++i) traj.states.push_back(std::ldexp(v[i], e));
        const double ny = v.norm();
        traj.norms.push_back(std::ldexp(ny, e));
        traj.log_norms.push_back(std::log(ny) + e * std::numbers::ln2);
        traj.is_report.push_back(report);
    };

    ode::Rhs rhs;
    Eigen::VectorXd nl(u0.size());
    if (rotating) {
        // rotations commute with F, so w' = -gamma(t) w + F(t, w)
        rhs = [&system, &e](double t, const Eigen::VectorXd& w, Eigen::VectorXd& out) {
            system.apply_nonlinear_scaled(t, w, e, out);
            out -= (*system.gamma())(t) * w;
        };
    } else {
        rhs = [&system, &e, &nl](double t, const Eigen::VectorXd& y, Eigen::VectorXd& out) {
            if (e == 0) {
                system.rhs(t, y, out);
                return;
            }
            system.apply_linear(t, y, out);
            system.apply_nonlinear_scaled(t, y, e, nl);
            out += nl;
        };
    }
    auto on_dense = [&](std::size_t, double t, const Eigen::VectorXd& y) { push(t, y, true); };
    constexpr int kRescaleBits = 256;
    const double lo = std::ldexp(1.0, -kRescaleBits);
    const double hi = std::ldexp(1.0, kRescaleBits);
    auto on_step = [&](double t, Eigen::VectorXd& y) {
        if (options.record_steps) push(t, y, false);
        if (!rescale) return ode::StepAction::Continue;
        const double ny = y.norm();
        int shift = 0;
        if (ny > 0.0 && ny < lo) shift = kRescaleBits;
        if (ny > hi) shift = -kRescaleBits;
        if (shift == 0) return ode::StepAction::Continue;
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = std::ldexp(y[i], shift);
        e -= shift;
        ++traj.diagnostics.renormalizations;
        return ode::StepAction::Modified;
    };

    ode::Options opt;
    opt.rel_tol = kLocalTolerance * options.rel_tol;
    opt.max_step = options.max_step;
    // reports always contain t = 0, so u0 is the first sample
    const auto res = ode::integrate(rhs, 0.0, T, u0, opt, reports, on_step, on_dense);

    traj.diagnostics.steps_accepted = res.stats.accepted;
    traj.diagnostics.steps_rejected = res.stats.rejected;
    traj.diagnostics.min_step = res.stats.min_step;
    if (res.status != ode::Status::Completed) {
        traj.diagnostics.truncated = true;
        std::ostringstream msg;
        msg << (res.status == ode::Status::StepUnderflow ? "step underflow" : "step budget exhausted") << " at t = "
            << res.t;
        traj.diagnostics.message = msg.str();
    }
    return traj;
}

DominanceResult verify_trajectory_envelope(const Trajectory& traj, const Certificate& cert) {
    if (!cert.valid) throw CertificateInvalid("envelope check refused: certificate is invalid");
    if (traj.diagnostics.truncated) {
        throw InvariantViolation("trajectory truncated under a valid certificate: " + traj.diagnostics.message);
    }
    DominanceResult out;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double log_prod = traj.log_norms[i] + mu_eval(cert.mu0, cert.gamma, traj.times[i]).log_value;
        if (log_prod > worst || std::isnan(log_prod)) {
            worst = log_prod;
            out.at = traj.times[i];
        }
        if (!(log_prod < 0.0)) out.pass = false;
    }
    out.max_product = std::exp(worst);
    return out;
}

std::string norms_csv(const Trajectory& traj) {
    std::string out = "t,norm\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out += shortest(traj.times[i]);
        out += ',';
        out += shortest(traj.norms[i]);
        out += '\n';
    }
    return out;
}

std::string states_csv(const Trajectory& traj) {
    std::string out = "t";
    for (std::size_t j = 0; j < traj.dim; ++j) out += ",u_" + std::to_string(j + 1);
    out += '\n';
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out += shortest(traj.times[i]);
        for (std::size_t j = 0; j < traj.dim; ++j) {
            out += ',';
            out += shortest(traj.states[i * traj.dim + j]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace stabcert
