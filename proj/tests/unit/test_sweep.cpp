#include <gtest/gtest.h>

#include <set>

#include "stabcert/certificate.hpp"
#include "stabcert/cli/sweep.hpp"

using namespace stabcert;
using namespace stabcert::cli;

namespace {

SweepConfig small_config() {
    SweepConfig cfg;
    cfg.instances = 12;
    cfg.T = 50.0;
    cfg.rel_tol = 1e-6;
    cfg.report_points = 40;
    return cfg;
}

}  // namespace

TEST(Sweep, InstanceSeedsAreDistinctAndStable) {
    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < 1000; ++i) seen.insert(instance_seed(2024, i));
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_EQ(instance_seed(2024, 5), instance_seed(2024, 5));
    EXPECT_NE(instance_seed(2024, 5), instance_seed(2025, 5));
}

TEST(Sweep, DrawsRespectRangesAndCertify) {
    const SweepConfig cfg;
    for (std::size_t i = 0; i < 200; ++i) {
        const auto inst = draw_instance(cfg, 2024, i);
        EXPECT_GE(inst.dim, cfg.dim_min);
        EXPECT_LE(inst.dim, cfg.dim_max);
        EXPECT_GE(inst.b0, cfg.b0.lo);
        EXPECT_LE(inst.b0, cfg.b0.hi);
        EXPECT_GE(inst.g0, cfg.g0.lo);
        EXPECT_LE(inst.g0, cfg.g0.hi);
        if (i % 4 == 3) EXPECT_EQ(inst.d, 1.0);
        EXPECT_LT(inst.mu0 * inst.g0, 1.0);
        const Certificate c =
            certify(GammaModel::power_law(inst.b0, inst.b1, inst.d), {inst.c0, inst.p}, inst.g0, inst.mu0);
        EXPECT_TRUE(c.valid) << i;
    }
}

TEST(Sweep, RandomStateHasRequestedNorm) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto v = random_state(5, 0.7, s);
        EXPECT_NEAR(v.norm(), 0.7, 1e-15);
        EXPECT_EQ(v, random_state(5, 0.7, s));
    }
    EXPECT_EQ(random_state(3, 0.0, 1).norm(), 0.0);
}

TEST(Sweep, ResultsDoNotDependOnWorkerCount) {
    const auto cfg = small_config();
    const auto serial = run_sweep(cfg, 99, 1);
    const auto parallel = run_sweep(cfg, 99, 3);
    ASSERT_EQ(serial.size(), cfg.instances);
    EXPECT_EQ(sweep_csv(serial), sweep_csv(parallel));
    for (std::size_t i = 0; i < serial.size(); ++i) {
        EXPECT_EQ(serial[i].instance.index, i);
        EXPECT_TRUE(serial[i].valid);
        EXPECT_TRUE(serial[i].dominance_pass);
        EXPECT_LT(serial[i].max_product, 1.0);
    }
}

TEST(Sweep, CsvHasOneRowPerInstance) {
    const auto rows = run_sweep(small_config(), 5, 1);
    const std::string csv = sweep_csv(rows);
    EXPECT_EQ(csv.rfind("index,seed,", 0), 0u);
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), rows.size() + 1);
}
