#pragma once

#include <filesystem>
#include <string>

namespace stabcert {

/// Shortest decimal string that parses back to exactly `x`.
[[nodiscard]] std::string shortest(double x);

/// Writes `text` to `path`, creating parent directories. Throws ParameterError
/// if the file cannot be written.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace stabcert
