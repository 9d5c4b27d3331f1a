#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "stabcert/certificate.hpp"
#include "stabcert/comparison.hpp"
#include "stabcert/errors.hpp"
#include "stabcert/evolution.hpp"

using namespace stabcert;

namespace {

SystemSpec spec(std::size_t n, GammaModel gamma, double omega, Nonlinearity f, std::uint64_t seed = 1) {
    SystemSpec s;
    s.dim = n;
    s.gamma = std::move(gamma);
    s.omega = omega;
    s.skew_seed = seed;
    s.nonlinearity = std::move(f);
    return s;
}

Eigen::VectorXd unit(oracle::Gen& gen, Eigen::Index n, double norm) {
    Eigen::VectorXd v = gen.gaussian(n);
    return norm * v / v.norm();
}

}  // namespace

TEST(BuildSystem, HermitianPartIsMinusGamma) {
    const auto sys = build_system(spec(2, GammaModel::power_law(1, 2, 1), 5.0, Nonlinearity::none(), 7));
    const Eigen::MatrixXd a = sys.a_of_t(0.0);
    EXPECT_LT((0.5 * (a + a.transpose()) + 2.0 * Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-15);
    EXPECT_NEAR(numerical_abscissa(sys, 0.0), -2.0, 1e-12);
    EXPECT_NEAR(oracle::spectral_norm(sys.skew()), 1.0, 1e-12);
}

TEST(BuildSystem, NoRotationGivesScalarMatrix) {
    const auto sys = build_system(spec(3, GammaModel::power_law(1, 2, 1), 0.0, Nonlinearity::none()));
    EXPECT_LT((sys.a_of_t(1.0) + Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-15);
}

TEST(BuildSystem, OneDimensionalSkewIsZero) {
    const auto sys = build_system(spec(1, GammaModel::power_law(1, 2, 1), 50.0, Nonlinearity::none()));
    EXPECT_EQ(sys.skew()(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(sys.a_of_t(1.0)(0, 0), -1.0);
}

TEST(BuildSystem, SkewIsReproducibleFromSeed) {
    EXPECT_EQ(random_skew(5, 9), random_skew(5, 9));
    EXPECT_NE(random_skew(5, 9), random_skew(5, 10));
    const Eigen::MatrixXd k = random_skew(6, 3);
    EXPECT_LT((k + k.transpose()).norm(), 1e-15);
    const Eigen::MatrixXd q = random_orthogonal(6, 3);
    EXPECT_LT((q.transpose() * q - Eigen::MatrixXd::Identity(6, 6)).norm(), 1e-13);
}

TEST(NumericalAbscissa, Examples) {
    Eigen::MatrixXd a(2, 2);
    a << -1, 5, -5, -1;
    EXPECT_NEAR(numerical_abscissa(a), -1.0, 1e-14);
    a << 0, 1, 0, 0;
    EXPECT_NEAR(numerical_abscissa(a), 0.5, 1e-14);
}

TEST(NumericalAbscissa, EqualsMinusGammaAtSampledTimes) {
    oracle::Gen gen(51);
    for (int k = 0; k < 20; ++k) {
        const auto g = GammaModel::power_law(gen.log_uniform(0.1, 10), gen.uniform(0.1, 5), gen.uniform(0.05, 1));
        const auto sys = build_system(spec(gen.integer(1, 8), g, gen.uniform(0, 100), Nonlinearity::none(), gen.bits()));
        for (int i = 0; i < 100; ++i) {
            const double t = 1e3 * i / 99.0;
            EXPECT_NEAR(numerical_abscissa(sys, t), -g(t), 1e-10 * std::max(1.0, g(t)));
        }
    }
}

TEST(Nonlinearity, BoundIsEnforced) {
    const auto bad = Nonlinearity::custom_field(
        [](double, const Eigen::VectorXd& u, Eigen::VectorXd& out) { out = 3.0 * u.squaredNorm() * u; }, 1.0, 1.0);
    EXPECT_THROW((void)build_system(spec(2, GammaModel::power_law(1, 2, 1), 0.0, bad)), ParameterError);
    EXPECT_THROW((void)Nonlinearity::truncated(1.0, 1.0, 0.0), ParameterError);
}

TEST(UserMatrix, HypothesisCheckWarnsInsteadOfThrowing) {
    const auto g = GammaModel::power_law(1, 2, 1);
    const MatrixFunction good = [g](double t) { return Eigen::MatrixXd(-g(t) * Eigen::MatrixXd::Identity(2, 2)); };
    const MatrixFunction bad = [](double) { return Eigen::MatrixXd(0.1 * Eigen::MatrixXd::Identity(2, 2)); };
    EXPECT_TRUE(TimeVaryingSystem::user_matrix(2, good, g, Nonlinearity::none()).hypothesis_verified());
    const auto sys = TimeVaryingSystem::user_matrix(2, bad, g, Nonlinearity::none());
    EXPECT_FALSE(sys.hypothesis_verified());
    EXPECT_FALSE(sys.warnings().empty());
    EXPECT_FALSE(TimeVaryingSystem::user_matrix(2, good, std::nullopt, Nonlinearity::none()).hypothesis_verified());
}

TEST(Simulate, LinearLogBranchFixture) {
    for (bool rotating : {false, true}) {
        const auto sys = build_system(spec(2, GammaModel::power_law(1, 2, 1), 5.0, Nonlinearity::none(), 7));
        SimulateOptions opt;
        opt.rel_tol = 1e-10;
        opt.rotating_frame = rotating;
        const auto traj = simulate(sys, Eigen::Vector2d(0.6, 0.8), 3.0, opt);
        EXPECT_EQ(traj.times.back(), 3.0);
        EXPECT_LT(oracle::rel_err(traj.norms.back(), 0.0625), 1e-10) << rotating;
        EXPECT_EQ(traj.diagnostics.rotating_frame, rotating);
    }
}

TEST(Simulate, SkewFlowIsIsometric) {
    oracle::Gen gen(52);
    for (int k = 0; k < 10; ++k) {
        const int n = gen.integer(2, 8);
        const Eigen::MatrixXd a = gen.uniform(1, 20) * random_skew(n, gen.bits());
        const auto sys = TimeVaryingSystem::user_matrix(
            n, [a](double) { return a; }, std::nullopt, Nonlinearity::none());
        SimulateOptions opt;
        opt.rel_tol = 1e-8;
        const Eigen::VectorXd u0 = gen.gaussian(n);
        const auto traj = simulate(sys, u0, 20.0, opt);
        for (double v : traj.norms) EXPECT_LT(oracle::rel_err(v, u0.norm()), 10 * opt.rel_tol);
    }
}

TEST(Simulate, ReportGridIsDense) {
    const auto sys = build_system(spec(3, GammaModel::power_law(1, 2, 0.5), 3.0, Nonlinearity::radial(1, 1)));
    const auto traj = simulate(sys, Eigen::Vector3d(0.1, 0.2, 0.3), 100.0);
    const auto grid = log_report_times(100.0, 200);
    EXPECT_EQ(grid.size(), 201u);
    std::size_t reports = 0;
    for (bool r : traj.is_report) reports += r ? 1 : 0;
    EXPECT_GE(reports, 200u);
    EXPECT_TRUE(std::is_sorted(traj.times.begin(), traj.times.end()));
    EXPECT_EQ(traj.states.size(), traj.times.size() * 3);
    EXPECT_EQ(traj.log_norms.size(), traj.times.size());
}

TEST(Simulate, RejectsBadInput) {
    const auto sys = build_system(spec(2, GammaModel::power_law(1, 2, 1), 0.0, Nonlinearity::none()));
    EXPECT_THROW((void)simulate(sys, Eigen::Vector3d::Zero(), 1.0), ParameterError);
    SimulateOptions opt;
    opt.rel_tol = 1e-13;
    EXPECT_THROW((void)simulate(sys, Eigen::Vector2d(1, 0), 1.0, opt), ParameterError);
    const auto tab = build_system(spec(2, GammaModel::tabulated({0, 5}, {1, 1}), 0.0, Nonlinearity::none()));
    EXPECT_THROW((void)simulate(tab, Eigen::Vector2d(1, 0), 6.0), DomainError);
}

TEST(Simulate, RadialNormsIgnoreRotation) {
    oracle::Gen gen(53);
    for (int k = 0; k < 5; ++k) {
        const int n = gen.integer(2, 6);
        const auto g = GammaModel::power_law(gen.log_uniform(0.5, 5), gen.uniform(1, 4), gen.uniform(0.3, 1));
        const auto f = Nonlinearity::radial(gen.uniform(0, 2), gen.uniform(0.5, 2));
        const Eigen::VectorXd u0 = unit(gen, n, 0.3);
        SimulateOptions opt;
        opt.rel_tol = 1e-9;
        const auto ref = simulate(build_system(spec(n, g, 0.0, f)), u0, 20.0, opt);
        for (double omega : {3.0, 10.0, 40.0}) {
            // the direct path pays for every oscillation; the rotating frame does not
            opt.rotating_frame = omega > 20.0;
            const auto traj = simulate(build_system(spec(n, g, omega, f, gen.bits())), u0, 20.0, opt);
            std::size_t j = 0;
            for (std::size_t i = 0; i < traj.size(); ++i) {
                if (!traj.is_report[i]) continue;
                while (j < ref.size() && (!ref.is_report[j] || ref.times[j] < traj.times[i])) ++j;
                ASSERT_LT(j, ref.size());
                ASSERT_EQ(ref.times[j], traj.times[i]);
                EXPECT_LT(oracle::rel_err(traj.norms[i], ref.norms[j]), 10 * opt.rel_tol) << omega << " t=" << traj.times[i];
            }
        }
    }
}

TEST(Simulate, EnergyIdentityHolds) {
    oracle::Gen gen(54);
    for (int k = 0; k < 5; ++k) {
        const int n = gen.integer(2, 6);
        const auto g = GammaModel::power_law(1, gen.uniform(1, 3), 0.5);
        const auto f = Nonlinearity::rotated(gen.uniform(0.5, 2), 1.0, gen.bits());
        const auto sys = build_system(spec(n, g, gen.uniform(0, 10), f, gen.bits()));
        SimulateOptions opt;
        opt.rel_tol = 1e-11;
        opt.report_points = 0;
        const double h = 1e-3;
        for (double t : {0.5, 1.0, 2.0, 5.0}) {
            opt.extra_report_times.push_back(t - h);
            opt.extra_report_times.push_back(t);
            opt.extra_report_times.push_back(t + h);
        }
        opt.record_steps = false;
        const auto traj = simulate(sys, unit(gen, n, 0.5), 6.0, opt);
        for (std::size_t i = 2; i + 1 < traj.size(); i += 3) {
            const double fd = (std::pow(traj.norms[i + 1], 2) - std::pow(traj.norms[i - 1], 2)) / (2 * h);
            const Eigen::VectorXd u = traj.state(i);
            Eigen::VectorXd du(n);
            sys.rhs(traj.times[i], u, du);
            const double exact = 2.0 * u.dot(du);
            EXPECT_NEAR(fd, exact, 1e-5 * std::max(1e-3, std::abs(exact))) << traj.times[i];
        }
    }
}

TEST(Simulate, TracksSolutionsFarBelowTheDoubleRange) {
    // int_0^1000 gamma = 100 (sqrt(1001) - 1), about 3064: |u(1000)| ~ e^-3064
    const auto g = GammaModel::power_law(1, 50, 0.5);
    for (bool rotating : {false, true}) {
        const auto sys = build_system(spec(3, g, 10.0, Nonlinearity::none(), 4));
        SimulateOptions opt;
        opt.rel_tol = 1e-10;
        opt.rotating_frame = rotating;
        const auto traj = simulate(sys, Eigen::Vector3d(1, 0, 0), 1000.0, opt);
        EXPECT_GT(traj.diagnostics.renormalizations, 10);
        EXPECT_EQ(traj.norms.back(), 0.0);
        const double want = -oracle::power_law_integral(1, 50, 0.5, 1000.0);
        EXPECT_LT(std::abs(traj.log_norms.back() - want), 1e-8 * std::abs(want)) << rotating;
    }
}

TEST(Simulate, RescaledNonlinearDynamicsMatchScalarOracle) {
    const auto g = GammaModel::power_law(2, 30, 0.4);
    const double c0 = 3.0, p = 1.3, g0 = 0.8;
    for (auto f : {Nonlinearity::radial(c0, p), Nonlinearity::truncated(c0, p, 0.5),
                   Nonlinearity::rotated(c0, p, 11)}) {
        const auto sys = build_system(spec(4, g, 0.0, f));
        SimulateOptions opt;
        opt.rel_tol = 1e-10;
        opt.report_points = 50;
        const auto traj = simulate(sys, Eigen::Vector4d(g0, 0, 0, 0), 500.0, opt);
        EXPECT_GT(traj.diagnostics.renormalizations, 0);
        // for radial F the norm solves the scalar equation exactly
        if (f.kind != Nonlinearity::Kind::Radial) continue;
        ScalarOptions sopt;
        sopt.report_times = {500.0};
        const auto scalar = integrate_scalar({g, constant_function(c0), {}, p, g0}, 500.0, 1e-10, sopt);
        EXPECT_LT(std::abs(traj.log_norms.back() - scalar.report_log_values[0]), 1e-7 * std::abs(scalar.report_log_values[0]));
    }
}

TEST(VerifyTrajectoryEnvelope, ZeroStateTriviallyPasses) {
    const auto g = GammaModel::power_law(1, 2, 0.5);
    const Certificate c = certify(g, {1, 1}, 0.0);
    const auto traj = simulate(build_system(spec(3, g, 1.0, Nonlinearity::radial(1, 1))), Eigen::Vector3d::Zero(), 10.0);
    const auto dom = verify_trajectory_envelope(traj, c);
    EXPECT_TRUE(dom.pass);
    EXPECT_EQ(dom.max_product, 0.0);
}

TEST(VerifyTrajectoryEnvelope, RefusesInvalidCertificateAndTruncatedTrajectory) {
    const auto g = GammaModel::power_law(1, 2, 0.5);
    const auto traj = simulate(build_system(spec(2, g, 1.0, Nonlinearity::none())), Eigen::Vector2d(1, 0), 1.0);
    EXPECT_THROW((void)verify_trajectory_envelope(traj, certify(g, {1, 1}, 1.5, 1.0)), CertificateInvalid);
    Trajectory cut = traj;
    cut.diagnostics.truncated = true;
    EXPECT_THROW((void)verify_trajectory_envelope(cut, certify(g, {1, 1}, 0.5)), InvariantViolation);
}

TEST(VerifyTrajectoryEnvelope, CertifiedRandomInstancesStayInside) {
    oracle::Gen gen(55);
    const Nonlinearity::Kind kinds[] = {Nonlinearity::Kind::Radial, Nonlinearity::Kind::Rotated,
                                        Nonlinearity::Kind::Truncated};
    for (int k = 0; k < 100; ++k) {
        const int n = gen.integer(1, 8);
        const double b0 = gen.log_uniform(0.1, 10), d = k % 4 == 3 ? 1.0 : gen.uniform(0.05, 1.0);
        const double c0 = gen.uniform(0, 5), p = gen.uniform(0.25, 3), g0 = gen.uniform(0.01, 2);
        const double mu0 = 0.99 / g0;
        const auto gamma = GammaModel::power_law(b0, search_b1(b0, d, {c0, p}, mu0), d);
        const Certificate c = certify(gamma, {c0, p}, g0, mu0);
        ASSERT_TRUE(c.valid);
        Nonlinearity f;
        switch (kinds[k % 3]) {
            case Nonlinearity::Kind::Radial: f = Nonlinearity::radial(c0, p); break;
            case Nonlinearity::Kind::Rotated: f = Nonlinearity::rotated(c0, p, gen.bits()); break;
            default: f = Nonlinearity::truncated(c0, p, g0 * gen.uniform(0.1, 1)); break;
        }
        SimulateOptions opt;
        opt.rel_tol = 1e-7;
        opt.rotating_frame = true;
        const auto traj = simulate(build_system(spec(n, gamma, gen.uniform(0, 20), f, gen.bits())),
                                   unit(gen, n, g0), 100.0, opt);
        const auto dom = verify_trajectory_envelope(traj, c);
        EXPECT_TRUE(dom.pass) << "instance " << k << " max=" << dom.max_product;
    }
}

TEST(TrajectoryCsv, Headers) {
    const auto sys = build_system(spec(2, GammaModel::power_law(1, 2, 1), 0.0, Nonlinearity::none()));
    SimulateOptions opt;
    opt.report_points = 3;
    const auto traj = simulate(sys, Eigen::Vector2d(1, 0), 1.0, opt);
    EXPECT_EQ(norms_csv(traj).rfind("t,norm\n0,1\n", 0), 0u);
    EXPECT_EQ(states_csv(traj).rfind("t,u_1,u_2\n0,1,0\n", 0), 0u);
}
