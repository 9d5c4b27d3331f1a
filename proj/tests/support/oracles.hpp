#pragma once

// Reference computations that share no code with the library: textbook
// closed forms, adaptive Simpson quadrature, fixed-step RK4 and Eigen's own
// matrix exponential.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

/// integral_0^t b1 (b0 + s)^{-d} ds
inline double power_law_integral(double b0, double b1, double d, double t) {
    if (d == 1.0) return b1 * std::log1p(t / b0);
    return b1 * (std::pow(b0 + t, 1.0 - d) - std::pow(b0, 1.0 - d)) / (1.0 - d);
}

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                      double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50);
}

using Field = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

/// Classical fourth-order Runge-Kutta with `steps` equal steps; t1 < t0 runs backwards.
inline Eigen::VectorXd rk4(const Field& f, Eigen::VectorXd y, double t0, double t1, int steps) {
    const double h = (t1 - t0) / steps;
    double t = t0;
    for (int k = 0; k < steps; ++k) {
        const Eigen::VectorXd k1 = f(t, y);
        const Eigen::VectorXd k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
        const Eigen::VectorXd k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
        const Eigen::VectorXd k4 = f(t + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = t0 + (k + 1) * h;
    }
    return y;
}

inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a, double t) { return (t * a).exp(); }

inline double spectral_norm(const Eigen::MatrixXd& m) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

/// Seeded draws for hand-rolled property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    std::uint64_t bits() { return rng_(); }

    Eigen::VectorXd gaussian(Eigen::Index n) {
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng_);
        return v;
    }
    Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c) {
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng_);
        return m;
    }

private:
    std::mt19937_64 rng_;
};

inline double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace oracle
