#pragma once

// Reader for the subset of TOML used by run configurations: [table] headers,
// bare keys, and values that are strings, booleans, integers, floats or
// (nested, possibly multi-line) arrays of those. Inline tables, dates and
// multi-line strings are not supported.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace stabcert::cli {

class TomlValue {
public:
    using Array = std::vector<TomlValue>;
    using Storage = std::variant<bool, std::int64_t, double, std::string, Array>;

    TomlValue() = default;
    explicit TomlValue(Storage v, std::size_t line = 0) : v_(std::move(v)), line_(line) {}

    [[nodiscard]] bool is_bool() const noexcept { return std::holds_alternative<bool>(v_); }
    [[nodiscard]] bool is_integer() const noexcept { return std::holds_alternative<std::int64_t>(v_); }
    [[nodiscard]] bool is_number() const noexcept { return is_integer() || std::holds_alternative<double>(v_); }
    [[nodiscard]] bool is_string() const noexcept { return std::holds_alternative<std::string>(v_); }
    [[nodiscard]] bool is_array() const noexcept { return std::holds_alternative<Array>(v_); }

    /// Accessors throw ParameterError naming the line on a type mismatch.
    [[nodiscard]] bool as_bool() const;
    [[nodiscard]] std::int64_t as_integer() const;
    [[nodiscard]] double as_double() const;
    [[nodiscard]] const std::string& as_string() const;
    [[nodiscard]] const Array& as_array() const;

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    Storage v_ = false;
    std::size_t line_ = 0;
};

using TomlTable = std::map<std::string, TomlValue, std::less<>>;

struct TomlDocument {
    /// Top-level keys live in the table named "".
    std::map<std::string, TomlTable, std::less<>> tables;

    [[nodiscard]] const TomlTable* find(std::string_view table) const;
};

/// Throws ParameterError("line N: ...") on malformed input or duplicate keys.
[[nodiscard]] TomlDocument parse_toml(std::string_view text);

}  // namespace stabcert::cli
