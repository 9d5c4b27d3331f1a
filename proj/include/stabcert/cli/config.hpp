#pragma once

// Run configuration: a TOML file with sections [run], [gamma], [bound],
// [system], [oracle], [sweep] and [levinson], or a certificate JSON document
// for re-checking. Unknown sections and keys are rejected so that typos
// surface as errors instead of silently falling back to defaults.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stabcert/certificate.hpp"
#include "stabcert/cli/sweep.hpp"
#include "stabcert/core.hpp"
#include "stabcert/evolution.hpp"

namespace stabcert::cli {

enum class Command { Certify, Simulate, Sweep, Levinson, Oracle };

[[nodiscard]] std::string_view to_string(Command c);
[[nodiscard]] Command command_from_string(std::string_view s);

struct SystemConfig {
    std::size_t dim = 1;
    double omega = 0.0;
    std::uint64_t skew_seed = 0;
    Nonlinearity::Kind nonlinearity = Nonlinearity::Kind::Radial;
    double truncate_at = 1.0;
    std::uint64_t rotation_seed = 0;
    /// Initial state; when absent a seeded random direction scaled to g0.
    std::optional<std::vector<double>> u0;
    bool rotating_frame = false;
};

struct OracleConfig {
    std::optional<double> a;  // defaults to c0
    double beta = 0.0;        // constant forcing
    double blowup_threshold = 1e12;
    double underflow_factor = 1e-14;
};

struct LevinsonConfig {
    Eigen::MatrixXd a;
    std::string family = "exp";  // exp | power | zero
    double rate = 1.0;
    Eigen::MatrixXd r;
    std::optional<double> c;
    std::vector<double> u0;
    std::optional<double> t_start;
    std::optional<double> t_max;
    double tol = 1e-10;
    std::vector<double> sample_times{0.0, 1.0, 2.0, 5.0, 10.0};
};

struct RunConfig {
    Command command = Command::Certify;
    std::string source;  // raw bytes of the config file, hashed into the manifest
    std::uint64_t seed = 0;
    double rel_tol = 1e-8;
    double T = 100.0;
    std::size_t report_points = 200;
    bool write_states = false;

    std::optional<GammaModel> gamma;
    bool search_b1 = false;  // b1 = "search" in [gamma]
    PerturbationBound bound;
    double g0 = 0.0;
    std::optional<double> mu0;

    SystemConfig system;
    OracleConfig oracle;
    SweepConfig sweep;
    std::optional<LevinsonConfig> levinson;
    /// Set when the input was a certificate JSON document.
    std::optional<Certificate> certificate;
};

/// Parses TOML text (or certificate JSON when `is_json`) for `command`.
/// Throws ParameterError with a diagnostic on any problem.
[[nodiscard]] RunConfig parse_config(std::string_view text, Command command, bool is_json = false);
/// Reads the file and dispatches on its extension (.json = certificate).
[[nodiscard]] RunConfig load_config(const std::string& path, Command command);

/// The certificate for the configured problem: either the re-checked input
/// certificate or certify() on [gamma]/[bound] (with b1 searched if asked).
[[nodiscard]] Certificate build_certificate(const RunConfig& cfg);
/// Gamma after resolving b1 = "search".
[[nodiscard]] GammaModel resolved_gamma(const RunConfig& cfg);
[[nodiscard]] double resolved_mu0(const RunConfig& cfg);

}  // namespace stabcert::cli
