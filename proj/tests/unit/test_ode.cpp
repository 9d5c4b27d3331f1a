#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "stabcert/ode.hpp"

using namespace stabcert;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

const ode::Rhs decay = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = -y; };

}  // namespace

TEST(Integrate, LinearDecayWithinTolerance) {
    for (double tol : {1e-4, 1e-6, 1e-8, 1e-10}) {
        ode::Options opt;
        opt.rel_tol = tol;
        const auto res = ode::integrate(decay, 0.0, 5.0, vec({1.0}), opt);
        ASSERT_EQ(res.status, ode::Status::Completed);
        EXPECT_EQ(res.t, 5.0);
        EXPECT_LT(std::abs(res.y[0] - std::exp(-5.0)) / std::exp(-5.0), 10.0 * tol) << tol;
    }
}

TEST(Integrate, ErrorDecreasesWithTolerance) {
    // y' = -2 y / (1 + t): y(3) = 1/16
    const ode::Rhs f = [](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = -2.0 / (1.0 + t) * y; };
    double prev = 1.0;
    for (double tol : {1e-4, 1e-6, 1e-8, 1e-10}) {
        ode::Options opt;
        opt.rel_tol = tol;
        const double err = std::abs(ode::integrate(f, 0.0, 3.0, vec({1.0}), opt).y[0] - 0.0625);
        EXPECT_LT(err, prev);
        prev = err;
    }
}

TEST(Integrate, DenseOutputIsFourthOrderAccurate) {
    // rotation: y = (cos t, -sin t)
    const ode::Rhs f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = vec({y[1], -y[0]}); };
    std::vector<double> times;
    for (int k = 0; k <= 100; ++k) times.push_back(0.2 * k);
    std::vector<Eigen::VectorXd> seen;
    ode::Options opt;
    opt.rel_tol = 1e-9;
    const auto res = ode::integrate(f, 0.0, 20.0, vec({1.0, 0.0}), opt, times, {},
                                    [&](std::size_t i, double t, const Eigen::VectorXd& y) {
                                        EXPECT_EQ(t, times[i]);
                                        seen.push_back(y);
                                    });
    ASSERT_EQ(seen.size(), times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        EXPECT_NEAR(seen[i][0], std::cos(times[i]), 1e-7);
        EXPECT_NEAR(seen[i][1], -std::sin(times[i]), 1e-7);
    }
    EXPECT_GT(res.stats.accepted, 0u);
}

TEST(Integrate, BlowUpEndsInStepUnderflow) {
    // y' = y^2, y(0) = 1 escapes at t = 1
    const ode::Rhs f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = y.cwiseProduct(y); };
    ode::Options opt;
    const auto res = ode::integrate(f, 0.0, 2.0, vec({1.0}), opt);
    EXPECT_EQ(res.status, ode::Status::StepUnderflow);
    EXPECT_NEAR(res.t, 1.0, 1e-3);
}

TEST(Integrate, ObserverCanStopAndModify) {
    ode::Options opt;
    const auto stopped = ode::integrate(decay, 0.0, 10.0, vec({1.0}), opt, {}, [](double t, Eigen::VectorXd&) {
        return t > 1.0 ? ode::StepAction::Stop : ode::StepAction::Continue;
    });
    EXPECT_EQ(stopped.status, ode::Status::Stopped);
    EXPECT_GT(stopped.t, 1.0);
    EXPECT_LT(stopped.t, 10.0);

    // doubling the state once keeps a linear solution exact up to the factor
    bool done = false;
    const auto modified = ode::integrate(decay, 0.0, 4.0, vec({1.0}), opt, {}, [&](double t, Eigen::VectorXd& y) {
        if (done || t < 1.0) return ode::StepAction::Continue;
        done = true;
        y *= 2.0;
        return ode::StepAction::Modified;
    });
    EXPECT_NEAR(modified.y[0], 2.0 * std::exp(-4.0), 1e-8);
}

TEST(Integrate, InitialTimeReportsUseInitialState) {
    std::vector<double> times{0.0, 0.0, 1.0};
    std::vector<double> got;
    ode::Options opt;
    (void)ode::integrate(decay, 0.0, 1.0, vec({3.0}), opt, times, {},
                         [&](std::size_t, double, const Eigen::VectorXd& y) { got.push_back(y[0]); });
    ASSERT_EQ(got.size(), 3u);
    EXPECT_EQ(got[0], 3.0);
    EXPECT_EQ(got[1], 3.0);
    EXPECT_NEAR(got[2], 3.0 * std::exp(-1.0), 1e-7);
}

TEST(Integrate, MaxStepIsHonoured) {
    ode::Options opt;
    opt.max_step = 0.01;
    double last = 0.0, widest = 0.0;
    (void)ode::integrate(decay, 0.0, 1.0, vec({1.0}), opt, {}, [&](double t, Eigen::VectorXd&) {
        widest = std::max(widest, t - last);
        last = t;
        return ode::StepAction::Continue;
    });
    EXPECT_LE(widest, 0.01 * (1.0 + 1e-12));
}
