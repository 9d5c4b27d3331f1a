#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "stabcert/cli/run.hpp"

using namespace stabcert::cli;
namespace fs = std::filesystem;

namespace {

class RunTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::path(::testing::TempDir()) /
               ("stabcert_run_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write(const std::string& name, const std::string& text) const {
        const auto path = dir_ / name;
        std::ofstream(path) << text;
        return path.string();
    }
    static std::string read(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }
    int run(CliOptions opt) {
        out_.str("");
        err_.str("");
        if (opt.out_dir == "out") opt.out_dir = (dir_ / "out").string();
        opt.timestamp = false;
        return execute(opt, out_, err_);
    }
    fs::path out_path(const std::string& name) const { return dir_ / "out" / name; }

    fs::path dir_;
    std::ostringstream out_, err_;
};

constexpr const char* kCertify = R"([gamma]
b0 = 1.0
b1 = 2.0
d = 0.5

[bound]
c0 = 1.0
p = 1.0
g0 = 0.5
)";

constexpr const char* kLinear = R"([run]
command = "simulate"
T = 3.0
rel_tol = 1e-10

[gamma]
b0 = 1.0
b1 = 2.0
d = 1.0

[bound]
c0 = 0.0
p = 2.0
g0 = 1.0

[system]
dim = 2
omega = 5.0
nonlinearity = "none"
u0 = [0.6, 0.8]
)";

double last_norm(const std::string& csv) {
    const auto line_start = csv.rfind('\n', csv.size() - 2) + 1;
    return std::stod(csv.substr(csv.find(',', line_start) + 1));
}

}  // namespace

TEST(Sha256, KnownDigest) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_F(RunTest, CertifyWritesCertificateAndManifest) {
    CliOptions opt;
    opt.command = "certify";
    opt.config_path = write("c.toml", kCertify);
    ASSERT_EQ(run(opt), 0) << err_.str();
    const auto cert = nlohmann::json::parse(read(out_path("certificate.json")));
    EXPECT_TRUE(cert.at("valid").get<bool>());
    const auto manifest = nlohmann::json::parse(read(out_path("manifest.json")));
    for (const char* key : {"command", "config_hash", "seed", "version", "artifacts"})
        EXPECT_TRUE(manifest.contains(key)) << key;
    EXPECT_EQ(manifest.at("command"), "certify");
    EXPECT_EQ(manifest.at("config_hash"), sha256_hex(kCertify));
    EXPECT_EQ(manifest.at("version"), std::string(kVersion));
    EXPECT_NE(out_.str().find("Mu0Strict"), std::string::npos);
}

TEST_F(RunTest, CertifyRechecksCertificateJson) {
    CliOptions opt;
    opt.command = "certify";
    opt.config_path = write("c.toml", kCertify);
    ASSERT_EQ(run(opt), 0);
    const std::string first = read(out_path("certificate.json"));
    opt.config_path = write("cert.json", first);
    opt.out_dir = (dir_ / "again").string();
    ASSERT_EQ(run(opt), 0) << err_.str();
    EXPECT_EQ(read(dir_ / "again" / "certificate.json"), first);
}

TEST_F(RunTest, InvalidCertificateIsAResultNotAnError) {
    CliOptions opt;
    opt.command = "certify";
    opt.config_path = write("c.toml", R"([gamma]
b0 = 1.0
b1 = 2.0
d = 1.5
[bound]
c0 = 1.0
p = 1.0
g0 = 0.5
)");
    ASSERT_EQ(run(opt), 0) << err_.str();
    EXPECT_FALSE(nlohmann::json::parse(read(out_path("certificate.json"))).at("valid").get<bool>());
}

TEST_F(RunTest, SimulateLinearFixture) {
    CliOptions opt;
    opt.command = "simulate";
    opt.config_path = write("s.toml", kLinear);
    ASSERT_EQ(run(opt), 0) << err_.str();
    EXPECT_NEAR(last_norm(read(out_path("trajectory.csv"))), 0.0625, 0.0625 * 1e-10);
    const auto check = nlohmann::json::parse(read(out_path("envelope_check.json")));
    EXPECT_TRUE(check.at("checked").get<bool>());
    EXPECT_TRUE(check.at("pass").get<bool>());
    EXPECT_FALSE(fs::exists(out_path("states.csv")));
    opt.write_states = true;
    ASSERT_EQ(run(opt), 0);
    EXPECT_EQ(read(out_path("states.csv")).rfind("t,u_1,u_2\n", 0), 0u);
}

TEST_F(RunTest, RelTolOverrideAndCommandMismatch) {
    CliOptions opt;
    opt.command = "simulate";
    opt.config_path = write("s.toml", kLinear);
    opt.rel_tol = 1e-13;
    EXPECT_EQ(run(opt), 1);
    opt.rel_tol.reset();
    opt.command = "oracle";
    EXPECT_EQ(run(opt), 1);
    EXPECT_NE(err_.str().find("simulate"), std::string::npos);
}

TEST_F(RunTest, EmptyConfigExitsOneWithDiagnostic) {
    CliOptions opt;
    opt.command = "certify";
    opt.config_path = write("empty.toml", "");
    EXPECT_EQ(run(opt), 1);
    EXPECT_NE(err_.str().find("empty"), std::string::npos);
    opt.config_path = (dir_ / "missing.toml").string();
    EXPECT_EQ(run(opt), 1);
    opt.command = "frobnicate";
    EXPECT_EQ(run(opt), 1);
}

TEST_F(RunTest, OracleBlowUpExitsZero) {
    CliOptions opt;
    opt.command = "oracle";
    opt.config_path = write("o.toml", R"([run]
T = 100.0
[gamma]
b0 = 1.0
b1 = 0.01
d = 0.5
[bound]
c0 = 10.0
p = 1.0
g0 = 2.0
)");
    ASSERT_EQ(run(opt), 0) << err_.str();
    EXPECT_EQ(nlohmann::json::parse(read(out_path("scalar.json"))).at("status"), "BlowUp");
    const auto dom = nlohmann::json::parse(read(out_path("dominance.json")));
    EXPECT_FALSE(dom.at("certificate_valid").get<bool>());
    EXPECT_FALSE(dom.at("checked").get<bool>());
}

TEST_F(RunTest, LevinsonRotationFixture) {
    CliOptions opt;
    opt.command = "levinson";
    opt.config_path = write("l.toml", R"([levinson]
A = [[0.0, 1.0], [-1.0, 0.0]]
family = "exp"
rate = 1.0
c = 1.0
u0 = [1.0, 0.0]
sample_times = [2.0, 5.0, 10.0]
)");
    ASSERT_EQ(run(opt), 0) << err_.str();
    EXPECT_EQ(read(out_path("matching.csv")).rfind("t,error,bound,ratio\n2,", 0), 0u);
    const auto doc = nlohmann::json::parse(read(out_path("levinson.json")));
    EXPECT_LE(doc.at("max_ratio").get<double>(), 1 + 1e-6);
    EXPECT_TRUE(fs::exists(out_path("v_trajectory.csv")));
}

TEST_F(RunTest, SweepAndPlot) {
    CliOptions opt;
    opt.command = "sweep";
    opt.config_path = write("w.toml", R"([run]
seed = 3
[sweep]
instances = 6
T = 20.0
)");
    opt.jobs = 2;
    ASSERT_EQ(run(opt), 0) << err_.str();
    const std::string csv = read(out_path("sweep.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    EXPECT_EQ(nlohmann::json::parse(read(out_path("manifest.json"))).at("seed"), 3);

    opt.seed = 4;
    opt.out_dir = (dir_ / "seed4").string();
    ASSERT_EQ(run(opt), 0);
    EXPECT_NE(read(dir_ / "seed4" / "sweep.csv"), csv);

    CliOptions plot;
    plot.command = "plot";
    plot.kind = "norm";
    opt.command = "simulate";
    opt.config_path = write("s.toml", kLinear);
    opt.out_dir = (dir_ / "sim").string();
    ASSERT_EQ(run(opt), 0);
    plot.csv_path = (dir_ / "sim" / "trajectory.csv").string();
    plot.out_dir = (dir_ / "plot").string();
    EXPECT_EQ(run(plot), 1);  // the norm plot needs --certificate
    plot.certificate_path = (dir_ / "sim" / "certificate.json").string();
    ASSERT_EQ(run(plot), 0) << err_.str();
    EXPECT_TRUE(fs::exists(dir_ / "plot" / "norm_vs_envelope.svg"));
}
