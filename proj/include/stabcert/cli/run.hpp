#pragma once

// Command execution behind the `stabcert` tool. Every run writes its
// artifacts plus manifest.json {command, config_hash, seed, version,
// artifacts} into the output directory.
//
// Exit status: 0 success, 1 invalid input, 2 a certified bound was breached.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace stabcert::cli {

inline constexpr std::string_view kVersion = "0.1.0";

struct CliOptions {
    std::string command;  // certify | simulate | sweep | levinson | oracle | plot
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<double> rel_tol;
    std::size_t jobs = 0;  // 0 = machine parallelism
    bool timestamp = true;
    bool write_states = false;
    // plot only
    std::string csv_path;
    std::string kind = "norm";
    std::string certificate_path;
};

[[nodiscard]] int execute(const CliOptions& options, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 digest.
[[nodiscard]] std::string sha256_hex(std::string_view data);

}  // namespace stabcert::cli
