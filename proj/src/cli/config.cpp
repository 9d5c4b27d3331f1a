#include "stabcert/cli/config.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "stabcert/cli/toml.hpp"
#include "stabcert/errors.hpp"

namespace stabcert::cli {

namespace {

using Keys = std::initializer_list<std::string_view>;

void check_keys(const TomlTable& table, std::string_view name, Keys allowed) {
    for (const auto& [key, value] : table) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ParameterError("line " + std::to_string(value.line()) + ": unknown key '" + key + "' in [" +
                                 std::string(name) + "]");
        }
    }
}

const TomlValue* get(const TomlTable* table, std::string_view key) {
    if (table == nullptr) return nullptr;
    const auto it = table->find(key);
    return it == table->end() ? nullptr : &it->second;
}

std::optional<double> number(const TomlTable* table, std::string_view key) {
    const TomlValue* v = get(table, key);
    if (v == nullptr) return std::nullopt;
    return v->as_double();
}

double number_or(const TomlTable* table, std::string_view key, double fallback) {
    return number(table, key).value_or(fallback);
}

std::uint64_t unsigned_or(const TomlTable* table, std::string_view key, std::uint64_t fallback) {
    const TomlValue* v = get(table, key);
    if (v == nullptr) return fallback;
    const std::int64_t x = v->as_integer();
    if (x < 0) throw ParameterError("line " + std::to_string(v->line()) + ": '" + std::string(key) + "' must be >= 0");
    return static_cast<std::uint64_t>(x);
}

bool bool_or(const TomlTable* table, std::string_view key, bool fallback) {
    const TomlValue* v = get(table, key);
    return v == nullptr ? fallback : v->as_bool();
}

std::vector<double> vector_of(const TomlValue& v) {
    std::vector<double> out;
    for (const auto& x : v.as_array()) out.push_back(x.as_double());
    return out;
}

Eigen::MatrixXd matrix_of(const TomlValue& v) {
    const auto& rows = v.as_array();
    if (rows.empty()) throw ParameterError("line " + std::to_string(v.line()) + ": matrix must not be empty");
    const std::size_t n = rows.size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = vector_of(rows[i]);
        if (row.size() != n)
            throw ParameterError("line " + std::to_string(rows[i].line()) + ": matrix must be square");
        for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    return m;
}

Range range_or(const TomlTable* table, std::string_view key, Range fallback) {
    const TomlValue* v = get(table, key);
    if (v == nullptr) return fallback;
    const auto xs = vector_of(*v);
    if (xs.size() != 2 || xs[1] < xs[0])
        throw ParameterError("line " + std::to_string(v->line()) + ": '" + std::string(key) +
                             "' must be [lo, hi] with lo <= hi");
    return {xs[0], xs[1]};
}

const TomlTable* require(const TomlDocument& doc, std::string_view name, Command command) {
    const TomlTable* t = doc.find(name);
    if (t == nullptr) {
        throw ParameterError("config for '" + std::string(to_string(command)) + "' needs a [" + std::string(name) +
                             "] section");
    }
    return t;
}

void parse_gamma(const TomlTable* t, RunConfig& cfg) {
    check_keys(*t, "gamma", {"b0", "b1", "d", "grid", "values"});
    if (get(t, "grid") != nullptr || get(t, "values") != nullptr) {
        if (get(t, "grid") == nullptr || get(t, "values") == nullptr)
            throw ParameterError("tabulated [gamma] needs both 'grid' and 'values'");
        if (get(t, "b0") != nullptr || get(t, "b1") != nullptr || get(t, "d") != nullptr)
            throw ParameterError("[gamma] is either a power law (b0, b1, d) or a table (grid, values)");
        cfg.gamma = GammaModel::tabulated(vector_of(*get(t, "grid")), vector_of(*get(t, "values")));
        return;
    }
    const auto b0 = number(t, "b0");
    const auto d = number(t, "d");
    if (!b0 || !d) throw ParameterError("[gamma] needs b0 and d");
    const TomlValue* b1v = get(t, "b1");
    if (b1v == nullptr) throw ParameterError("[gamma] needs b1 (a number or \"search\")");
    double b1 = 1.0;
    if (b1v->is_string()) {
        if (b1v->as_string() != "search")
            throw ParameterError("line " + std::to_string(b1v->line()) + ": b1 must be a number or \"search\"");
        cfg.search_b1 = true;
    } else {
        b1 = b1v->as_double();
    }
    cfg.gamma = GammaModel::power_law(*b0, b1, *d);
}

void parse_bound(const TomlTable* t, RunConfig& cfg) {
    check_keys(*t, "bound", {"c0", "p", "g0", "mu0"});
    cfg.bound.c0 = number_or(t, "c0", 0.0);
    cfg.bound.p = number_or(t, "p", 1.0);
    cfg.bound.validate();
    cfg.g0 = number_or(t, "g0", 0.0);
    if (!(cfg.g0 >= 0.0) || !std::isfinite(cfg.g0)) throw ParameterError("g0 must be finite and >= 0");
    cfg.mu0 = number(t, "mu0");
    if (cfg.mu0 && !(*cfg.mu0 > 0.0)) throw ParameterError("mu0 must be positive");
}

void parse_system(const TomlTable* t, RunConfig& cfg) {
    if (t == nullptr) return;
    check_keys(*t, "system",
               {"dim", "omega", "skew_seed", "nonlinearity", "truncate_at", "rotation_seed", "u0", "rotating_frame"});
    auto& s = cfg.system;
    s.dim = static_cast<std::size_t>(unsigned_or(t, "dim", 1));
    s.omega = number_or(t, "omega", 0.0);
    s.skew_seed = unsigned_or(t, "skew_seed", 0);
    if (const TomlValue* v = get(t, "nonlinearity")) s.nonlinearity = nonlinearity_kind_from_string(v->as_string());
    s.truncate_at = number_or(t, "truncate_at", 1.0);
    s.rotation_seed = unsigned_or(t, "rotation_seed", 0);
    if (const TomlValue* v = get(t, "u0")) {
        s.u0 = vector_of(*v);
        if (s.u0->size() != s.dim) throw ParameterError("[system] u0 must have 'dim' entries");
    }
    s.rotating_frame = bool_or(t, "rotating_frame", false);
}

void parse_oracle(const TomlTable* t, RunConfig& cfg) {
    if (t == nullptr) return;
    check_keys(*t, "oracle", {"a", "beta", "blowup_threshold", "underflow_factor"});
    auto& o = cfg.oracle;
    o.a = number(t, "a");
    if (o.a && !(*o.a >= 0.0)) throw ParameterError("[oracle] a must be >= 0");
    o.beta = number_or(t, "beta", 0.0);
    if (!(o.beta >= 0.0)) throw ParameterError("[oracle] beta must be >= 0");
    o.blowup_threshold = number_or(t, "blowup_threshold", 1e12);
    o.underflow_factor = number_or(t, "underflow_factor", 1e-14);
    if (!(o.blowup_threshold > 0.0) || !(o.underflow_factor > 0.0))
        throw ParameterError("[oracle] thresholds must be positive");
}

void parse_sweep(const TomlTable* t, RunConfig& cfg) {
    if (t == nullptr) return;
    check_keys(*t, "sweep",
               {"instances", "dim_min", "dim_max", "omega", "b0", "d", "p", "c0", "g0", "T", "rel_tol",
                "report_points", "rotating_frame", "include_d1", "nonlinearities"});
    auto& s = cfg.sweep;
    s.instances = static_cast<std::size_t>(unsigned_or(t, "instances", s.instances));
    s.dim_min = static_cast<std::size_t>(unsigned_or(t, "dim_min", s.dim_min));
    s.dim_max = static_cast<std::size_t>(unsigned_or(t, "dim_max", s.dim_max));
    s.omega = range_or(t, "omega", s.omega);
    s.b0 = range_or(t, "b0", s.b0);
    s.d = range_or(t, "d", s.d);
    s.p = range_or(t, "p", s.p);
    s.c0 = range_or(t, "c0", s.c0);
    s.g0 = range_or(t, "g0", s.g0);
    s.T = number_or(t, "T", s.T);
    s.rel_tol = number_or(t, "rel_tol", s.rel_tol);
    s.report_points = static_cast<std::size_t>(unsigned_or(t, "report_points", s.report_points));
    s.rotating_frame = bool_or(t, "rotating_frame", s.rotating_frame);
    s.include_d1 = bool_or(t, "include_d1", s.include_d1);
    if (const TomlValue* v = get(t, "nonlinearities")) {
        s.nonlinearities.clear();
        for (const auto& x : v->as_array()) s.nonlinearities.push_back(nonlinearity_kind_from_string(x.as_string()));
    }
}

void parse_levinson(const TomlTable* t, RunConfig& cfg) {
    check_keys(*t, "levinson", {"A", "family", "rate", "R", "c", "u0", "t_start", "t_max", "tol", "sample_times"});
    LevinsonConfig l;
    const TomlValue* a = get(t, "A");
    if (a == nullptr) throw ParameterError("[levinson] needs the matrix A");
    l.a = matrix_of(*a);
    const auto n = l.a.rows();
    if (const TomlValue* v = get(t, "family")) l.family = v->as_string();
    if (l.family != "exp" && l.family != "power" && l.family != "zero")
        throw ParameterError("[levinson] family must be \"exp\", \"power\" or \"zero\"");
    l.rate = number_or(t, "rate", 1.0);
    if (const TomlValue* v = get(t, "R")) {
        l.r = matrix_of(*v);
    } else {
        l.r = Eigen::MatrixXd::Identity(n, n);
    }
    if (l.r.rows() != n) throw ParameterError("[levinson] R must have the shape of A");
    l.c = number(t, "c");
    if (const TomlValue* v = get(t, "u0")) {
        l.u0 = vector_of(*v);
    } else {
        throw ParameterError("[levinson] needs u0");
    }
    if (static_cast<Eigen::Index>(l.u0.size()) != n) throw ParameterError("[levinson] u0 must match the size of A");
    l.t_start = number(t, "t_start");
    l.t_max = number(t, "t_max");
    l.tol = number_or(t, "tol", l.tol);
    if (const TomlValue* v = get(t, "sample_times")) l.sample_times = vector_of(*v);
    cfg.levinson = std::move(l);
}

bool blank(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos != std::string::npos && line[pos] != '#') return false;
    }
    return true;
}

}  // namespace

std::string_view to_string(Command c) {
    switch (c) {
        case Command::Certify: return "certify";
        case Command::Simulate: return "simulate";
        case Command::Sweep: return "sweep";
        case Command::Levinson: return "levinson";
        case Command::Oracle: return "oracle";
    }
    return "unknown";
}

Command command_from_string(std::string_view s) {
    for (Command c : {Command::Certify, Command::Simulate, Command::Sweep, Command::Levinson, Command::Oracle})
        if (to_string(c) == s) return c;
    throw ParameterError("unknown command '" + std::string(s) + "'");
}

RunConfig parse_config(std::string_view text, Command command, bool is_json) {
    RunConfig cfg;
    cfg.command = command;
    cfg.source = std::string(text);
    if (blank(text)) throw ParameterError("config is empty: expected sections such as [gamma] and [bound]");

    if (is_json) {
        if (command != Command::Certify) throw ParameterError("a certificate document is accepted by 'certify' only");
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ParameterError(std::string("certificate JSON does not parse: ") + e.what());
        }
        cfg.certificate = certificate_from_json(doc);
        return cfg;
    }

    const TomlDocument doc = parse_toml(text);
    for (const auto& [name, table] : doc.tables) {
        static constexpr std::array<std::string_view, 8> known = {"", "run", "gamma", "bound", "system", "oracle", "sweep", "levinson"};
        if (std::find(known.begin(), known.end(), name) == known.end())
            throw ParameterError("unknown section [" + name + "]");
    }
    if (const TomlTable* top = doc.find(""); top != nullptr && !top->empty())
        throw ParameterError("line " + std::to_string(top->begin()->second.line()) +
                             ": keys must live inside a section such as [run]");

    if (const TomlTable* run = doc.find("run")) {
        check_keys(*run, "run", {"command", "seed", "rel_tol", "T", "report_points", "write_states"});
        if (const TomlValue* v = get(run, "command")) {
            if (command_from_string(v->as_string()) != command) {
                throw ParameterError("line " + std::to_string(v->line()) + ": config is for '" + v->as_string() +
                                     "' but the command is '" + std::string(to_string(command)) + "'");
            }
        }
        cfg.seed = unsigned_or(run, "seed", 0);
        cfg.rel_tol = number_or(run, "rel_tol", cfg.rel_tol);
        cfg.T = number_or(run, "T", cfg.T);
        cfg.report_points = static_cast<std::size_t>(unsigned_or(run, "report_points", cfg.report_points));
        cfg.write_states = bool_or(run, "write_states", false);
    }

    switch (command) {
        case Command::Certify:
        case Command::Simulate:
        case Command::Oracle:
            parse_gamma(require(doc, "gamma", command), cfg);
            parse_bound(require(doc, "bound", command), cfg);
            break;
        case Command::Sweep:
        case Command::Levinson:
            break;
    }
    parse_system(doc.find("system"), cfg);
    parse_oracle(doc.find("oracle"), cfg);
    parse_sweep(doc.find("sweep"), cfg);
    if (const TomlTable* l = doc.find("levinson")) parse_levinson(l, cfg);
    if (command == Command::Levinson && !cfg.levinson) require(doc, "levinson", command);
    if (command == Command::Simulate && cfg.system.dim == 0) throw ParameterError("[system] dim must be positive");
    if (!(cfg.T > 0.0) || !std::isfinite(cfg.T)) throw ParameterError("[run] T must be positive and finite");
    return cfg;
}

RunConfig load_config(const std::string& path, Command command) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError("cannot read config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const bool is_json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
    try {
        return parse_config(buf.str(), command, is_json);
    } catch (const ParameterError& e) {
        throw ParameterError(path + ": " + e.what());
    }
}

double resolved_mu0(const RunConfig& cfg) {
    if (cfg.mu0) return *cfg.mu0;
    return cfg.g0 > 0.0 ? (1.0 - kDefaultMu0Margin) / cfg.g0 : 1.0;
}

GammaModel resolved_gamma(const RunConfig& cfg) {
    if (!cfg.gamma) throw ParameterError("no [gamma] configured");
    if (!cfg.search_b1) return *cfg.gamma;
    const PowerLaw& pl = cfg.gamma->power_law_params();
    if (pl.d > 1.0) throw ParameterError("b1 = \"search\" needs d in (0, 1]");
    return GammaModel::power_law(pl.b0, search_b1(pl.b0, pl.d, cfg.bound, resolved_mu0(cfg)), pl.d);
}

Certificate build_certificate(const RunConfig& cfg) {
    if (cfg.certificate) return recheck(*cfg.certificate);
    return certify(resolved_gamma(cfg), cfg.bound, cfg.g0, cfg.mu0);
}

}  // namespace stabcert::cli
