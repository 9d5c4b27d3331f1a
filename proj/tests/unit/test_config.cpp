#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "stabcert/cli/config.hpp"
#include "stabcert/errors.hpp"

using namespace stabcert;
using namespace stabcert::cli;

namespace {

constexpr const char* kCertify = R"([gamma]
b0 = 1.0
b1 = 2.0
d = 0.5

[bound]
c0 = 1.0
p = 1.0
g0 = 0.5
)";

std::string error_of(std::string_view text, Command c, bool json = false) {
    try {
        (void)parse_config(text, c, json);
    } catch (const ParameterError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, CertifyExample) {
    const auto cfg = parse_config(kCertify, Command::Certify);
    ASSERT_TRUE(cfg.gamma.has_value());
    EXPECT_DOUBLE_EQ(cfg.gamma->power_law_params().b1, 2.0);
    EXPECT_DOUBLE_EQ(cfg.g0, 0.5);
    const Certificate c = build_certificate(cfg);
    EXPECT_TRUE(c.valid);
    EXPECT_DOUBLE_EQ(c.mu0, resolved_mu0(cfg));
    EXPECT_LT(c.mu0 * cfg.g0, 1.0);
}

TEST(Config, EmptyAndMissingSections) {
    EXPECT_NE(error_of("", Command::Certify).find("empty"), std::string::npos);
    EXPECT_NE(error_of("  \n# only a comment\n", Command::Certify).find("empty"), std::string::npos);
    EXPECT_NE(error_of("[gamma]\nb0 = 1.0\nb1 = 2.0\nd = 0.5\n", Command::Certify).find("[bound]"), std::string::npos);
    EXPECT_NE(error_of("[run]\nseed = 1\n", Command::Levinson).find("[levinson]"), std::string::npos);
}

TEST(Config, UnknownSectionsAndKeysAreRejected) {
    EXPECT_NE(error_of(std::string(kCertify) + "[gama]\n", Command::Certify).find("unknown section"), std::string::npos);
    EXPECT_NE(error_of(std::string(kCertify) + "[system]\ndimension = 3\n", Command::Simulate).find("dimension"),
              std::string::npos);
    EXPECT_NE(error_of("x = 1\n" + std::string(kCertify), Command::Certify).find("section"), std::string::npos);
}

TEST(Config, CommandMismatch) {
    EXPECT_NE(error_of("[run]\ncommand = \"sweep\"\n" + std::string(kCertify), Command::Certify).find("'sweep'"),
              std::string::npos);
    EXPECT_NE(error_of("[run]\ncommand = \"dance\"\n", Command::Sweep).find("dance"), std::string::npos);
}

TEST(Config, InvalidParametersAreRejected) {
    EXPECT_FALSE(error_of("[gamma]\nb0 = 0.0\nb1 = 2.0\nd = 0.5\n[bound]\nc0 = 1.0\np = 1.0\ng0 = 0.5\n",
                          Command::Certify)
                     .empty());
    EXPECT_FALSE(error_of("[gamma]\nb0 = 1.0\nb1 = 2.0\nd = 0.5\n[bound]\nc0 = -1.0\np = 1.0\ng0 = 0.5\n",
                          Command::Certify)
                     .empty());
    EXPECT_FALSE(error_of(std::string(kCertify) + "[run]\nT = -1.0\n", Command::Simulate).empty());
    EXPECT_FALSE(error_of(std::string(kCertify) + "[system]\nnonlinearity = \"cubic\"\n", Command::Simulate).empty());
}

TEST(Config, SearchB1) {
    const std::string text = R"([gamma]
b0 = 1.0
b1 = "search"
d = 0.5
[bound]
c0 = 1.0
p = 1.0
g0 = 0.5
)";
    const auto cfg = parse_config(text, Command::Certify);
    EXPECT_TRUE(cfg.search_b1);
    const auto g = resolved_gamma(cfg);
    EXPECT_TRUE(build_certificate(cfg).valid);
    EXPECT_NEAR(g.power_law_params().b1, search_b1(1.0, 0.5, {1.0, 1.0}, resolved_mu0(cfg)), 0.0);
}

TEST(Config, SystemAndLevinsonSections) {
    const auto sim = parse_config(std::string(kCertify) + R"([system]
dim = 2
omega = 5.0
nonlinearity = "none"
u0 = [0.3, 0.4]
)",
                                  Command::Simulate);
    EXPECT_EQ(sim.system.dim, 2u);
    EXPECT_EQ(sim.system.nonlinearity, Nonlinearity::Kind::None);
    ASSERT_TRUE(sim.system.u0.has_value());
    EXPECT_DOUBLE_EQ((*sim.system.u0)[1], 0.4);

    const auto lev = parse_config(R"([levinson]
A = [[0.0, 1.0], [-1.0, 0.0]]
family = "exp"
u0 = [1.0, 0.0]
)",
                                  Command::Levinson);
    ASSERT_TRUE(lev.levinson.has_value());
    EXPECT_EQ(lev.levinson->a.rows(), 2);
    EXPECT_DOUBLE_EQ(lev.levinson->a(1, 0), -1.0);
    EXPECT_EQ(lev.levinson->r.rows(), 2);
    EXPECT_FALSE(error_of("[levinson]\nA = [[0.0, 1.0]]\nu0 = [1.0]\n", Command::Levinson).empty());
    EXPECT_FALSE(error_of("[levinson]\nA = [[0.0]]\nu0 = [1.0, 2.0]\n", Command::Levinson).empty());
}

TEST(Config, CertificateJsonRoundTrip) {
    const Certificate c = build_certificate(parse_config(kCertify, Command::Certify));
    const auto cfg = parse_config(to_json(c).dump(), Command::Certify, true);
    ASSERT_TRUE(cfg.certificate.has_value());
    const Certificate again = build_certificate(cfg);
    EXPECT_EQ(again.valid, c.valid);
    EXPECT_EQ(to_json(again), to_json(c));
    EXPECT_FALSE(error_of("{not json", Command::Certify, true).empty());
    EXPECT_FALSE(error_of(to_json(c).dump(), Command::Simulate, true).empty());
}

TEST(Config, LoadConfigPrefixesPath) {
    EXPECT_THROW((void)load_config("/nonexistent/config.toml", Command::Certify), ParameterError);
    const std::string path = ::testing::TempDir() + "/stabcert_bad.toml";
    std::ofstream(path) << "[gamma]\nb0 = \n";
    try {
        (void)load_config(path, Command::Certify);
        FAIL();
    } catch (const ParameterError& e) {
        EXPECT_EQ(std::string(e.what()).rfind(path, 0), 0u);
    }
}
