#include "stabcert/asymptotic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "stabcert/errors.hpp"
#include "stabcert/format.hpp"
#include "stabcert/ode.hpp"

namespace stabcert {

namespace {

struct Rule {
    std::vector<double> x;
    std::vector<double> w;
};

Rule gauss_legendre(std::size_t q) {
    Rule r{std::vector<double>(q), std::vector<double>(q)};
    const auto nq = static_cast<double>(q);
    for (std::size_t i = 0; i < (q + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nq + 0.5));
        double pp = 1.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0, p2 = 0.0;
            for (std::size_t j = 1; j <= q; ++j) {
                const double p3 = p2;
                p2 = p1;
                const auto dj = static_cast<double>(j);
                p1 = ((2.0 * dj - 1.0) * z * p2 - (dj - 1.0) * p3) / dj;
            }
            pp = nq * (z * p1 - p2) / (z * z - 1.0);
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        r.x[i] = -z;
        r.x[q - 1 - i] = z;
        r.w[i] = r.w[q - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return r;
}

// Chebyshev-Lobatto points on [-1, 1], ascending, with barycentric weights.
struct Chebyshev {
    std::vector<double> x;
    std::vector<double> w;
    Eigen::MatrixXd diff;  // differentiation matrix on [-1, 1]

    explicit Chebyshev(std::size_t m) : x(m + 1), w(m + 1), diff(m + 1, m + 1) {
        for (std::size_t k = 0; k <= m; ++k) {
            x[k] = -std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(m));
            w[k] = (k % 2 == 0) ? 1.0 : -1.0;
        }
        w[0] *= 0.5;
        w[m] *= 0.5;
        for (std::size_t i = 0; i <= m; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j <= m; ++j) {
                if (i == j) continue;
                const double d = (w[j] / w[i]) / (x[i] - x[j]);
                diff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
                sum += d;
            }
            diff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = -sum;
        }
    }

    [[nodiscard]] std::vector<double> row(double at) const {
        std::vector<double> out(x.size(), 0.0);
        for (std::size_t k = 0; k < x.size(); ++k) {
            if (at == x[k]) {
                out[k] = 1.0;
                return out;
            }
        }
        double total = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            out[k] = w[k] / (at - x[k]);
            total += out[k];
        }
        for (double& v : out) v /= total;
        return out;
    }
};

double map_to(double a, double b, double x) { return a + 0.5 * (b - a) * (x + 1.0); }

double to_reference(double a, double b, double t) { return std::clamp(2.0 * (t - a) / (b - a) - 1.0, -1.0, 1.0); }

}  // namespace

// ---------------------------------------------------------------------------
// Propagator bound

double propagator_bound(const Eigen::MatrixXd& a, double horizon, std::size_t samples) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ParameterError("horizon must be positive and finite");
    if (samples < 2) throw ParameterError("propagator_bound needs at least two samples");
    const ExponentialOperator exp_a(a);
    double best = 1.0;  // |e^{0A}|
    double best_early = 1.0;
    double last = 0.0;
    const double lo = std::log(horizon * 1e-6);
    const double hi = std::log(horizon);
    for (std::size_t k = 0; k < samples; ++k) {
        const double t = k + 1 == samples
                             ? horizon
                             : std::exp(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(samples - 1));
        const double norm = spectral_norm(exp_a(t));
        if (!std::isfinite(norm)) {
            throw UnboundedSemigroup("unbounded semigroup suspected: |e^{tA}| is not finite at t = " + shortest(t));
        }
        best = std::max(best, norm);
        if (t <= horizon / 10.0) best_early = std::max(best_early, norm);
        last = norm;
    }
    if (last > best_early * (1.0 + 1e-6)) {
        std::ostringstream msg;
        msg << "unbounded semigroup suspected: |e^{tA}| = " << last << " at t = " << horizon
            << " exceeds the maximum " << best_early << " over [0, " << horizon / 10.0 << "]";
        throw UnboundedSemigroup(msg.str());
    }
    return 1.01 * best;
}

// ---------------------------------------------------------------------------
// Perturbations

Perturbation Perturbation::zero(std::size_t n) {
    Perturbation b;
    b.r = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    return b;
}

Perturbation Perturbation::exp_decay(Eigen::MatrixXd r, double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("decay rate alpha must be positive");
    Perturbation b;
    b.kind = Kind::ExpDecay;
    b.r = std::move(r);
    b.rate = alpha;
    return b;
}

Perturbation Perturbation::power_decay(Eigen::MatrixXd r, double q) {
    if (!(q > 1.0) || !std::isfinite(q)) throw ParameterError("power decay needs q > 1 for an integrable norm");
    Perturbation b;
    b.kind = Kind::PowerDecay;
    b.r = std::move(r);
    b.rate = q;
    return b;
}

Perturbation Perturbation::user_defined(MatrixFunction fn, double norm_integral) {
    if (!fn) throw ParameterError("perturbation function is empty");
    if (!(norm_integral >= 0.0) || !std::isfinite(norm_integral))
        throw ParameterError("integral of |B| must be finite and nonnegative");
    Perturbation b;
    b.kind = Kind::User;
    b.user = std::move(fn);
    b.user_norm_integral = norm_integral;
    return b;
}

PerturbedSystem::PerturbedSystem(Eigen::MatrixXd a, Perturbation b, std::optional<double> c)
    : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() == 0 || a_.rows() != a_.cols()) throw ParameterError("A must be a nonempty square matrix");
    if (!a_.allFinite()) throw ParameterError("A has non-finite entries");
    const auto n = a_.rows();
    switch (b_.kind) {
        case Perturbation::Kind::Zero:
            b_.r = Eigen::MatrixXd::Zero(n, n);
            b_norm_integral_ = 0.0;
            break;
        case Perturbation::Kind::ExpDecay:
        case Perturbation::Kind::PowerDecay:
            if (b_.r.rows() != n || b_.r.cols() != n) throw ParameterError("R must have the shape of A");
            r_norm_ = spectral_norm(b_.r);
            b_norm_integral_ = b_.kind == Perturbation::Kind::ExpDecay ? r_norm_ / b_.rate : r_norm_ / (b_.rate - 1.0);
            break;
        case Perturbation::Kind::User: {
            const Eigen::MatrixXd b0 = b_.user(0.0);
            if (b0.rows() != n || b0.cols() != n) throw ParameterError("B(t) must have the shape of A");
            b_norm_integral_ = b_.user_norm_integral;
            break;
        }
    }
    if (c) {
        if (!(*c >= 1.0) || !std::isfinite(*c)) throw ParameterError("propagator constant c must be >= 1");
        c_ = *c;
        c_supplied_ = true;
    } else {
        c_ = propagator_bound(a_);
    }
}

Eigen::MatrixXd PerturbedSystem::b(double t) const {
    switch (b_.kind) {
        case Perturbation::Kind::Zero: return b_.r;
        case Perturbation::Kind::ExpDecay: return std::exp(-b_.rate * t) * b_.r;
        case Perturbation::Kind::PowerDecay: return std::pow(1.0 + t, -b_.rate) * b_.r;
        case Perturbation::Kind::User: return b_.user(t);
    }
    return b_.r;
}

double PerturbedSystem::b_norm(double t) const {
    switch (b_.kind) {
        case Perturbation::Kind::Zero: return 0.0;
        case Perturbation::Kind::ExpDecay: return std::exp(-b_.rate * t) * r_norm_;
        case Perturbation::Kind::PowerDecay: return std::pow(1.0 + t, -b_.rate) * r_norm_;
        case Perturbation::Kind::User: return spectral_norm(b_.user(t));
    }
    return 0.0;
}

double PerturbedSystem::b_norm_tail(double t) const {
    switch (b_.kind) {
        case Perturbation::Kind::Zero: return 0.0;
        case Perturbation::Kind::ExpDecay: return std::exp(-b_.rate * t) * r_norm_ / b_.rate;
        case Perturbation::Kind::PowerDecay: return r_norm_ * std::pow(1.0 + t, 1.0 - b_.rate) / (b_.rate - 1.0);
        case Perturbation::Kind::User: break;
    }
    throw Unsupported("user-defined B carries no closed-form tail integral");
}

namespace {

// integral_{t1}^{t2} |B(s)| ds
double b_norm_between(const PerturbedSystem& sys, double t1, double t2) {
    if (sys.has_closed_form_tail()) return std::max(0.0, sys.b_norm_tail(t1) - sys.b_norm_tail(t2));
    static const Rule rule = gauss_legendre(8);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.x.size(); ++i) sum += rule.w[i] * sys.b_norm(map_to(t1, t2, rule.x[i]));
    return 0.5 * (t2 - t1) * sum;
}

}  // namespace

double perturbed_stability_bound(const PerturbedSystem& sys, const Eigen::VectorXd& v0) {
    if (v0.size() != sys.a().rows()) throw ParameterError("v0 has the wrong dimension");
    const double abscissa = numerical_abscissa(sys.a());
    if (abscissa > 1e-12 * std::max(1.0, spectral_norm(sys.a()))) {
        std::ostringstream msg;
        msg << "perturbed stability bound needs (Av, v) <= 0, but the numerical abscissa of A is " << abscissa
            << "; a bounded semigroup alone is not enough for this route";
        throw ParameterError(msg.str());
    }
    return std::exp(sys.b_norm_integral()) * v0.norm();
}

Trajectory simulate_perturbed(const PerturbedSystem& sys, const Eigen::VectorXd& v0, double T,
                              const SimulateOptions& options) {
    const auto copy = std::make_shared<PerturbedSystem>(sys);
    const auto system = TimeVaryingSystem::user_matrix(
        sys.dim(), [copy](double t) -> Eigen::MatrixXd { return copy->a() + copy->b(t); }, std::nullopt,
        Nonlinearity::none());
    return simulate(system, v0, T, options);
}

CauchyCheck limit_cauchy_check(const PerturbedSystem& sys, const Trajectory& traj, double from, double tol) {
    CauchyCheck out;
    if (traj.size() == 0) return out;
    const double sup = *std::max_element(traj.norms.begin(), traj.norms.end());
    // |(Av, v)| <= rho |v|^2 bounds how fast the dissipative part can shrink |v|
    const double rho = spectral_norm(0.5 * (sys.a() + sys.a().transpose()));
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.times[i] < from) continue;
        lo = std::min(lo, traj.norms[i]);
        hi = std::max(hi, traj.norms[i]);
        if (i + 1 >= traj.size() || traj.times[i + 1] <= traj.times[i]) continue;
        const double delta = traj.norms[i + 1] - traj.norms[i];
        const double change = std::abs(delta);
        double allowance = sup * b_norm_between(sys, traj.times[i], traj.times[i + 1]) + tol * sup;
        if (delta < 0.0) allowance += sup * rho * (traj.times[i + 1] - traj.times[i]);
        if (allowance <= 0.0) {
            if (change > 0.0) out.pass = false;
            continue;
        }
        const double ratio = change / allowance;
        out.worst_ratio = std::max(out.worst_ratio, ratio);
        if (ratio > 1.0) out.pass = false;
    }
    out.spread = hi >= lo ? hi - lo : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Levinson matching

Eigen::VectorXd MatchedPair::u(double t) const { return (*exp_)(t) * u0_; }

std::size_t MatchedPair::panel_of(double t) const {
    if (!(t >= 0.0 && t <= t_max_)) throw DomainError("matched solution is available on [0, t_max] only");
    const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    const auto idx = static_cast<std::size_t>(it - breaks_.begin());
    const std::size_t panels = breaks_.size() - 1;
    return std::min(idx == 0 ? 0 : idx - 1, panels - 1);
}

Eigen::VectorXd MatchedPair::v(double t) const {
    const std::size_t p = panel_of(t);
    const std::size_t m1 = cheb_.size();
    const double x = to_reference(breaks_[p], breaks_[p + 1], t);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(u0_.size());
    bool exact = false;
    for (std::size_t k = 0; k < m1; ++k) {
        if (x == cheb_[k]) {
            out = nodes_v_[p * m1 + k];
            exact = true;
            break;
        }
    }
    if (exact) return out;
    double total = 0.0;
    for (std::size_t k = 0; k < m1; ++k) {
        const double c = bary_[k] / (x - cheb_[k]);
        out += c * nodes_v_[p * m1 + k];
        total += c;
    }
    return out / total;
}

Eigen::VectorXd MatchedPair::difference(double t) const {
    const std::size_t p = panel_of(t);
    if (p < back_panels_) return v(t) - u(t);
    // u - v = integral_t^b e^{(t-s)A} B(s) v(s) ds + e^{(t-b)A} (u - v)(b)
    static const Rule rule = gauss_legendre(20);
    const std::size_t m1 = cheb_.size();
    const double b = breaks_[p + 1];
    Eigen::VectorXd w = (*exp_)(t - b) * nodes_w_[(p - back_panels_) * m1 + m1 - 1];
    if (b > t) {
        const double half = 0.5 * (b - t);
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            const double s = map_to(t, b, rule.x[i]);
            w += (rule.w[i] * half) * ((*exp_)(t - s) * (sys_->b(s) * v(s)));
        }
    }
    return -w;
}

double MatchedPair::tail_bound(double t) const { return c_ * sup_v_ * sys_->b_norm_tail(t); }

double MatchedPair::kernel_integral(double t) const {
    if (!(t >= 0.0 && t <= t_max_)) throw DomainError("kernel integral is available on [0, t_max] only");
    static const Rule rule = gauss_legendre(20);
    double sum = 0.0;
    for (std::size_t p = panel_of(t); p + 1 < breaks_.size(); ++p) {
        const double lo = std::max(breaks_[p], t);
        const double hi = breaks_[p + 1];
        if (hi <= lo) continue;
        double panel = 0.0;
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            const double s = map_to(lo, hi, rule.x[i]);
            const double b = sys_->b_norm(s);
            if (b == 0.0) continue;
            panel += rule.w[i] * spectral_norm((*exp_)(t - s)) * b * v(s).norm();
        }
        sum += 0.5 * (hi - lo) * panel;
    }
    return sum + diag_.truncation_bound;
}

Trajectory MatchedPair::v_trajectory(const std::vector<double>& times) const {
    Trajectory traj;
    traj.dim = static_cast<std::size_t>(u0_.size());
    for (double t : times) {
        const Eigen::VectorXd x = v(t);
        traj.times.push_back(t);
        traj.norms.push_back(x.norm());
        traj.log_norms.push_back(std::log(x.norm()));
        traj.is_report.push_back(true);
    }
    return traj;
}

MatchedPair levinson_match(const PerturbedSystem& sys, const Eigen::VectorXd& u0, const LevinsonOptions& options) {
    const auto n = sys.a().rows();
    if (u0.size() != n) throw ParameterError("u0 has the wrong dimension");
    if (!(options.tol > 0.0)) throw ParameterError("tol must be positive");
    if (options.nodes_per_panel < 2) throw ParameterError("nodes_per_panel must be at least 2");
    if (!sys.has_closed_form_tail())
        throw Unsupported("matching needs a built-in B family with a closed-form tail; user-defined B is rejected");

    MatchedPair pair;
    pair.sys_ = std::make_shared<PerturbedSystem>(sys);
    pair.exp_ = std::make_shared<ExponentialOperator>(sys.a());
    pair.u0_ = u0;
    pair.tol_ = options.tol;
    const ExponentialOperator& expo = *pair.exp_;

    double c = sys.propagator_constant();
    if (!sys.propagator_constant_supplied()) {
        try {
            c = std::max(c, propagator_bound(-sys.a()));
        } catch (const UnboundedSemigroup& e) {
            throw UnboundedSemigroup(std::string("matching needs |e^{tA}| bounded for negative t as well: ") +
                                     e.what());
        }
    }
    pair.c_ = c;
    auto tail = [&](double t) { return sys.b_norm_tail(t); };

    // t_start
    double t_start = 0.0;
    if (options.t_start) {
        t_start = *options.t_start;
        if (!(t_start >= 0.0) || !std::isfinite(t_start)) throw ParameterError("t_start must be finite and >= 0");
        if (!(c * tail(t_start) < 1.0)) {
            std::ostringstream msg;
            msg << "contraction factor c * tail = " << c * tail(t_start) << " >= 1 at t_start = " << t_start;
            throw Infeasible(msg.str());
        }
    } else {
        constexpr double kMaxStart = 1e4;
        while (!(c * tail(t_start) < 0.9)) {
            t_start += 0.25;
            if (t_start > kMaxStart) throw Infeasible("no t_start <= 1e4 gives a contraction factor below 0.9");
        }
    }
    const double nominal = c * tail(t_start);
    pair.diag_.contraction_nominal = nominal;

    const double scale = std::max(1.0, u0.norm());
    const double tol_abs = options.tol * scale;

    const std::size_t m = options.nodes_per_panel;
    const Chebyshev cheb(m);
    pair.cheb_ = cheb.x;
    pair.bary_ = cheb.w;

    // forward panels: geometric seed, then bisection until v0 = e^{tA} u0 and
    // B v0 are resolved by the interpolant
    const double a_norm = spectral_norm(sys.a());
    const double first_width = a_norm > 1.0 ? 1.0 / a_norm : 1.0;
    const double panel_tol = 0.1 * tol_abs;
    auto resolved = [&](double a, double b) {
        std::vector<Eigen::VectorXd> f(m + 1), g(m + 1);
        for (std::size_t k = 0; k <= m; ++k) {
            const double t = map_to(a, b, cheb.x[k]);
            f[k] = expo(t) * u0;
            g[k] = sys.b(t) * f[k];
        }
        for (std::size_t k = 0; k < m; ++k) {
            const double x = 0.5 * (cheb.x[k] + cheb.x[k + 1]);
            const auto row = cheb.row(x);
            Eigen::VectorXd fi = Eigen::VectorXd::Zero(n), gi = Eigen::VectorXd::Zero(n);
            for (std::size_t l = 0; l <= m; ++l) {
                fi += row[l] * f[l];
                gi += row[l] * g[l];
            }
            const double t = map_to(a, b, x);
            const Eigen::VectorXd fe = expo(t) * u0;
            const Eigen::VectorXd ge = sys.b(t) * fe;
            if ((fi - fe).norm() > panel_tol) return false;
            if ((gi - ge).norm() * std::max(1.0, b - a) > panel_tol) return false;
        }
        return true;
    };
    // panels are accepted left to right, so when the budget runs out the
    // accepted prefix is returned together with exhausted = true
    bool exhausted = false;
    auto build_panels = [&](double t_max) -> std::vector<double> {
        std::vector<double> seed{t_start};
        for (double w = first_width; seed.back() < t_max; w *= 2.0) seed.push_back(std::min(seed.back() + w, t_max));
        std::vector<double> forward{t_start};
        std::vector<std::pair<double, double>> stack;
        for (std::size_t i = seed.size() - 1; i > 0; --i) stack.emplace_back(seed[i - 1], seed[i]);
        while (!stack.empty()) {
            const auto [a, b] = stack.back();
            stack.pop_back();
            if (b - a > 1e-6 * std::max(1.0, a) && !resolved(a, b)) {
                if (forward.size() + stack.size() + 2 > options.max_panels + 1) {
                    exhausted = true;
                    return forward;
                }
                const double mid = 0.5 * (a + b);
                stack.emplace_back(mid, b);
                stack.emplace_back(a, mid);
                continue;
            }
            forward.push_back(b);
        }
        return forward;
    };

    // t_max: far enough that the neglected tail is below tol, pulled back to
    // where the panel budget runs out; the remaining tail is then carried by
    // truncation_bound
    double t_max = 0.0;
    if (options.t_max) {
        t_max = *options.t_max;
        if (!(t_max > t_start) || !std::isfinite(t_max)) throw ParameterError("t_max must exceed t_start");
    } else {
        const double sup_guess = c * u0.norm() / (1.0 - nominal);
        double span = 1.0;
        while (c * sup_guess * tail(t_start + span) > 0.1 * tol_abs && span < 1e6) span *= 2.0;
        t_max = t_start + span;
    }
    const std::vector<double> forward = build_panels(t_max);
    if (exhausted) {
        if (options.t_max || forward.size() < 2)
            throw Infeasible("panel budget exhausted while resolving e^{tA} u0 and B(t)");
        t_max = forward.back();
    }
    pair.t_start_ = t_start;
    pair.t_max_ = t_max;
    const std::size_t panels = forward.size() - 1;
    pair.diag_.panels = panels;
    pair.diag_.truncation_bound = 0.0;

    // node values of u on the forward panels
    const std::size_t m1 = m + 1;
    const auto block = static_cast<Eigen::Index>(n * static_cast<Eigen::Index>(m1));
    Eigen::MatrixXd u_nodes(block, static_cast<Eigen::Index>(panels));
    for (std::size_t j = 0; j < panels; ++j)
        for (std::size_t k = 0; k < m1; ++k)
            u_nodes.col(static_cast<Eigen::Index>(j)).segment(static_cast<Eigen::Index>(k) * n, n) =
                expo(map_to(forward[j], forward[j + 1], cheb.x[k])) * u0;

    Eigen::MatrixXd v_nodes = u_nodes;
    // u - v at the nodes, kept from the last sweep so that it does not suffer
    // cancellation where it is far smaller than |u|
    Eigen::MatrixXd w_nodes = Eigen::MatrixXd::Zero(block, static_cast<Eigen::Index>(panels));
    if (sys.perturbation().kind != Perturbation::Kind::Zero) {
        // kernel weights: w(t_k) = e^{(t_k - b)A} w(b) + K_{jk} [v_0; ...; v_m]
        const Rule gl = gauss_legendre(m + 4);
        std::vector<Eigen::MatrixXd> interp(m);  // (m+4) x (m+1) per node
        for (std::size_t k = 0; k < m; ++k) {
            interp[k].resize(static_cast<Eigen::Index>(gl.x.size()), static_cast<Eigen::Index>(m1));
            for (std::size_t i = 0; i < gl.x.size(); ++i) {
                const double x = cheb.x[k] + 0.5 * (1.0 - cheb.x[k]) * (gl.x[i] + 1.0);
                const auto row = cheb.row(x);
                for (std::size_t l = 0; l < m1; ++l)
                    interp[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = row[l];
            }
        }
        std::vector<Eigen::MatrixXd> kernel(panels * m), carry(panels * m);
        for (std::size_t j = 0; j < panels; ++j) {
            const double b = forward[j + 1];
            for (std::size_t k = 0; k < m; ++k) {
                const double tk = map_to(forward[j], b, cheb.x[k]);
                const double half = 0.5 * (b - tk);
                Eigen::MatrixXd kk = Eigen::MatrixXd::Zero(n, block);
                for (std::size_t i = 0; i < gl.x.size(); ++i) {
                    const double s = tk + half * (gl.x[i] + 1.0);
                    const Eigen::MatrixXd mi = (gl.w[i] * half) * (expo(tk - s) * sys.b(s));
                    for (std::size_t l = 0; l < m1; ++l) {
                        const double coef = interp[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
                        kk.middleCols(static_cast<Eigen::Index>(l) * n, n) += coef * mi;
                    }
                }
                kernel[j * m + k] = std::move(kk);
                carry[j * m + k] = expo(tk - b);
            }
        }

        bool converged = false;
        Eigen::MatrixXd next(block, static_cast<Eigen::Index>(panels));
        for (std::size_t it = 1; it <= options.max_iterations; ++it) {
            Eigen::VectorXd w = Eigen::VectorXd::Zero(n);  // integral from t_max onwards is dropped
            for (std::size_t jj = panels; jj-- > 0;) {
                const auto col = static_cast<Eigen::Index>(jj);
                const Eigen::VectorXd stacked = v_nodes.col(col);
                next.col(col).segment(static_cast<Eigen::Index>(m) * n, n) =
                    u_nodes.col(col).segment(static_cast<Eigen::Index>(m) * n, n) - w;
                w_nodes.col(col).segment(static_cast<Eigen::Index>(m) * n, n) = w;
                Eigen::VectorXd w_first;
                for (std::size_t k = 0; k < m; ++k) {
                    const Eigen::VectorXd wk = carry[jj * m + k] * w + kernel[jj * m + k] * stacked;
                    next.col(col).segment(static_cast<Eigen::Index>(k) * n, n) =
                        u_nodes.col(col).segment(static_cast<Eigen::Index>(k) * n, n) - wk;
                    w_nodes.col(col).segment(static_cast<Eigen::Index>(k) * n, n) = wk;
                    if (k == 0) w_first = wk;
                }
                w = w_first;
            }
            double diff = 0.0;
            for (Eigen::Index col = 0; col < next.cols(); ++col)
                for (std::size_t k = 0; k < m1; ++k)
                    diff = std::max(diff, (next.col(col).segment(static_cast<Eigen::Index>(k) * n, n) -
                                           v_nodes.col(col).segment(static_cast<Eigen::Index>(k) * n, n))
                                              .norm());
            v_nodes.swap(next);
            pair.diag_.differences.push_back(diff);
            const auto& d = pair.diag_.differences;
            if (d.size() >= 2 && d[d.size() - 2] > 0.0) pair.diag_.ratios.push_back(d.back() / d[d.size() - 2]);
            pair.diag_.iterations = it;
            if (diff <= tol_abs) {
                converged = true;
                break;
            }
        }
        if (!converged) throw Infeasible("Picard iteration did not reach the requested tolerance");
    }

    // backward panels on [0, t_start], filled by integrating v' = (A + B) v
    std::vector<double> breaks;
    std::size_t back_panels = 0;
    if (t_start > 0.0) {
        const double width = std::min(forward[1] - forward[0], 0.5);
        back_panels = static_cast<std::size_t>(std::ceil(t_start / width));
        for (std::size_t j = 0; j < back_panels; ++j)
            breaks.push_back(t_start * static_cast<double>(j) / static_cast<double>(back_panels));
    }
    breaks.insert(breaks.end(), forward.begin(), forward.end());
    pair.breaks_ = breaks;
    pair.nodes_v_.assign((back_panels + panels) * m1, Eigen::VectorXd());
    pair.back_panels_ = back_panels;
    pair.nodes_w_.assign(panels * m1, Eigen::VectorXd());
    for (std::size_t j = 0; j < panels; ++j)
        for (std::size_t k = 0; k < m1; ++k) {
            const auto seg = static_cast<Eigen::Index>(k) * n;
            const auto col = static_cast<Eigen::Index>(j);
            pair.nodes_v_[(back_panels + j) * m1 + k] = v_nodes.col(col).segment(seg, n);
            pair.nodes_w_[j * m1 + k] = w_nodes.col(col).segment(seg, n);
        }

    if (back_panels > 0) {
        // reversed time s = t_start - t
        std::vector<std::pair<double, std::size_t>> wanted;
        for (std::size_t j = 0; j < back_panels; ++j)
            for (std::size_t k = 0; k < m1; ++k)
                wanted.emplace_back(t_start - map_to(breaks[j], breaks[j + 1], cheb.x[k]), j * m1 + k);
        std::sort(wanted.begin(), wanted.end());
        std::vector<double> s_times;
        for (const auto& w : wanted) s_times.push_back(std::max(0.0, w.first));
        const auto rhs = [&](double s, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
            const double t = t_start - s;
            dy.noalias() = -(sys.a() * y + sys.b(t) * y);
        };
        ode::Options opt;
        opt.rel_tol = 1e-12;
        const auto on_dense = [&](std::size_t i, double, const Eigen::VectorXd& y) {
            pair.nodes_v_[wanted[i].second] = y;
        };
        const auto res =
            ode::integrate(rhs, 0.0, t_start, pair.nodes_v_[back_panels * m1], opt, s_times, nullptr, on_dense);
        if (res.status != ode::Status::Completed) throw Infeasible("backward extension of v failed");
    }

    for (const auto& x : pair.nodes_v_) pair.sup_v_ = std::max(pair.sup_v_, x.norm());
    pair.diag_.truncation_bound = c * pair.sup_v_ * tail(t_max);

    // residual of v' = (A + B) v from the derivative of the interpolant
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double a = breaks[p], b = breaks[p + 1];
        for (std::size_t k = 0; k < m1; ++k) {
            Eigen::VectorXd dv = Eigen::VectorXd::Zero(n);
            for (std::size_t l = 0; l < m1; ++l)
                dv += cheb.diff(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) * pair.nodes_v_[p * m1 + l];
            dv *= 2.0 / (b - a);
            const double t = map_to(a, b, cheb.x[k]);
            const Eigen::VectorXd& x = pair.nodes_v_[p * m1 + k];
            pair.diag_.residual = std::max(pair.diag_.residual, (dv - sys.a() * x - sys.b(t) * x).norm());
        }
    }

    // operator-norm bound of the iteration map at the first few panel starts
    {
        const Rule gl = gauss_legendre(20);
        double bound = 0.0;
        for (std::size_t j = 0; j < std::min<std::size_t>(panels, 8); ++j) {
            const double t = forward[j];
            double sum = 0.0;
            for (std::size_t p = j; p < panels; ++p) {
                double panel = 0.0;
                for (std::size_t i = 0; i < gl.x.size(); ++i) {
                    const double s = map_to(forward[p], forward[p + 1], gl.x[i]);
                    const double bn = sys.b_norm(s);
                    if (bn > 0.0) panel += gl.w[i] * spectral_norm(expo(t - s)) * bn;
                }
                sum += 0.5 * (forward[p + 1] - forward[p]) * panel;
            }
            bound = std::max(bound, sum + c * tail(t_max));
        }
        pair.diag_.contraction_bound = bound;
    }
    return pair;
}

MatchingReport matching_error_report(const MatchedPair& pair, const std::vector<double>& sample_times, double tol) {
    MatchingReport report;
    const double slack = 10.0 * pair.tolerance() * std::max(1.0, pair.sup_v());
    for (double t : sample_times) {
        MatchingRow row;
        row.t = t;
        row.error = pair.difference(t).norm();
        row.kernel = pair.kernel_integral(t);
        row.bound = pair.tail_bound(t);
        row.ratio = row.bound > 0.0 ? row.error / row.bound : 0.0;
        if (row.error > row.kernel * (1.0 + tol) + slack) report.chain_holds = false;
        if (row.kernel > row.bound * (1.0 + tol) + slack) report.chain_holds = false;
        report.max_ratio = std::max(report.max_ratio, row.ratio);
        report.rows.push_back(row);
    }
    // |v| on the second half of the Picard domain
    std::vector<double> tail_times;
    const double from = 0.5 * (pair.t_start() + pair.t_max());
    for (int k = 0; k <= 100; ++k) tail_times.push_back(from + (pair.t_max() - from) * k / 100.0);
    report.limit = limit_cauchy_check(pair.system(), pair.v_trajectory(tail_times), from, tol);
    return report;
}

std::string matching_csv(const MatchingReport& report) {
    std::string out = "t,error,bound,ratio\n";
    for (const auto& row : report.rows) {
        out += shortest(row.t) + ',' + shortest(row.error) + ',' + shortest(row.bound) + ',' + shortest(row.ratio) + '\n';
    }
    return out;
}

}  // namespace stabcert
