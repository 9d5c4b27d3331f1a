#include "stabcert/cli/toml.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

#include "stabcert/errors.hpp"

namespace stabcert::cli {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
    throw ParameterError("line " + std::to_string(line) + ": " + what);
}

bool bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
}

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    TomlDocument run() {
        TomlDocument doc;
        TomlTable* current = &doc.tables[""];
        while (true) {
            skip_blank_lines();
            if (at_end()) break;
            if (peek() == '[') {
                ++pos_;
                skip_spaces();
                const std::string name = parse_table_name();
                skip_spaces();
                expect(']');
                if (doc.tables.count(name) != 0 && name.size() > 0) fail(line_, "table [" + name + "] defined twice");
                current = &doc.tables[name];
                end_of_line();
                continue;
            }
            const std::size_t key_line = line_;
            const std::string key = parse_key();
            skip_spaces();
            expect('=');
            skip_spaces();
            TomlValue value = parse_value();
            if (current->count(key) != 0) fail(key_line, "duplicate key '" + key + "'");
            current->emplace(key, std::move(value));
            end_of_line();
        }
        return doc;
    }

private:
    [[nodiscard]] bool at_end() const { return pos_ >= s_.size(); }
    [[nodiscard]] char peek() const { return s_[pos_]; }

    void expect(char c) {
        if (at_end() || peek() != c) fail(line_, std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_spaces() {
        while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_comment() {
        if (!at_end() && peek() == '#')
            while (!at_end() && peek() != '\n') ++pos_;
    }

    void skip_blank_lines() {
        while (!at_end()) {
            skip_spaces();
            skip_comment();
            if (at_end()) return;
            if (peek() == '\r') {
                ++pos_;
                continue;
            }
            if (peek() != '\n') return;
            ++pos_;
            ++line_;
        }
    }

    // whitespace, comments and newlines inside arrays
    void skip_array_space() {
        while (!at_end()) {
            skip_spaces();
            skip_comment();
            if (!at_end() && (peek() == '\n' || peek() == '\r')) {
                if (peek() == '\n') ++line_;
                ++pos_;
                continue;
            }
            return;
        }
    }

    void end_of_line() {
        skip_spaces();
        skip_comment();
        if (!at_end() && peek() == '\r') ++pos_;
        if (at_end()) return;
        if (peek() != '\n') fail(line_, "unexpected trailing characters");
        ++pos_;
        ++line_;
    }

    std::string parse_table_name() {
        std::string name;
        while (!at_end() && (bare_key_char(peek()) || peek() == '.')) name += s_[pos_++];
        if (name.empty()) fail(line_, "empty table name");
        return name;
    }

    std::string parse_key() {
        if (!at_end() && (peek() == '"' || peek() == '\'')) return parse_string();
        std::string key;
        while (!at_end() && bare_key_char(peek())) key += s_[pos_++];
        if (key.empty()) fail(line_, "expected a key");
        return key;
    }

    std::string parse_string() {
        const char quote = s_[pos_++];
        std::string out;
        while (true) {
            if (at_end() || peek() == '\n') fail(line_, "unterminated string");
            const char c = s_[pos_++];
            if (c == quote) break;
            if (c == '\\' && quote == '"') {
                if (at_end()) fail(line_, "unterminated escape");
                const char e = s_[pos_++];
                switch (e) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: fail(line_, std::string("unsupported escape \\") + e);
                }
                continue;
            }
            out += c;
        }
        return out;
    }

    TomlValue parse_value() {
        if (at_end()) fail(line_, "missing value");
        const std::size_t line = line_;
        const char c = peek();
        if (c == '"' || c == '\'') return TomlValue(parse_string(), line);
        if (c == '[') {
            ++pos_;
            TomlValue::Array items;
            while (true) {
                skip_array_space();
                if (at_end()) fail(line, "unterminated array");
                if (peek() == ']') {
                    ++pos_;
                    break;
                }
                items.push_back(parse_value());
                skip_array_space();
                if (at_end()) fail(line, "unterminated array");
                if (peek() == ',') {
                    ++pos_;
                    continue;
                }
                if (peek() != ']') fail(line_, "expected ',' or ']' in array");
            }
            return TomlValue(std::move(items), line);
        }
        std::string token;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) != 0 || peek() == '+' ||
                             peek() == '-' || peek() == '.' || peek() == '_'))
            token += s_[pos_++];
        if (token.empty()) fail(line, "unrecognized value");
        if (token == "true") return TomlValue(true, line);
        if (token == "false") return TomlValue(false, line);
        return TomlValue(parse_number(token, line), line);
    }

    static TomlValue::Storage parse_number(std::string token, std::size_t line) {
        std::string digits;
        for (char ch : token)
            if (ch != '_') digits += ch;
        const std::string_view body = digits.front() == '+' || digits.front() == '-' ? std::string_view(digits).substr(1)
                                                                                    : std::string_view(digits);
        const double sign = digits.front() == '-' ? -1.0 : 1.0;
        if (body == "inf") return sign * std::numeric_limits<double>::infinity();
        if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
        const bool is_float = digits.find_first_of(".eE") != std::string::npos;
        const char* first = digits.data() + (digits.front() == '+' ? 1 : 0);
        const char* last = digits.data() + digits.size();
        if (!is_float) {
            std::int64_t v = 0;
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec == std::errc() && ptr == last) return v;
        } else {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec == std::errc() && ptr == last) return v;
        }
        fail(line, "invalid number '" + token + "'");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

std::string where(std::size_t line) { return line > 0 ? "line " + std::to_string(line) + ": " : std::string(); }

}  // namespace

bool TomlValue::as_bool() const {
    if (!is_bool()) throw ParameterError(where(line_) + "expected a boolean");
    return std::get<bool>(v_);
}

std::int64_t TomlValue::as_integer() const {
    if (!is_integer()) throw ParameterError(where(line_) + "expected an integer");
    return std::get<std::int64_t>(v_);
}

double TomlValue::as_double() const {
    if (is_integer()) return static_cast<double>(std::get<std::int64_t>(v_));
    if (!std::holds_alternative<double>(v_)) throw ParameterError(where(line_) + "expected a number");
    return std::get<double>(v_);
}

const std::string& TomlValue::as_string() const {
    if (!is_string()) throw ParameterError(where(line_) + "expected a string");
    return std::get<std::string>(v_);
}

const TomlValue::Array& TomlValue::as_array() const {
    if (!is_array()) throw ParameterError(where(line_) + "expected an array");
    return std::get<Array>(v_);
}

const TomlTable* TomlDocument::find(std::string_view table) const {
    const auto it = tables.find(table);
    return it == tables.end() ? nullptr : &it->second;
}

TomlDocument parse_toml(std::string_view text) { return Parser(text).run(); }

}  // namespace stabcert::cli
