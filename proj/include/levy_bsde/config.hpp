#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "levy_bsde/error.hpp"
#include "levy_bsde/levy_model.hpp"
#include "levy_bsde/registry.hpp"
#include "levy_bsde/solver.hpp"

namespace levy_bsde {

using Json = nlohmann::json;

struct GeneratorConfig {
    std::string id;
    double p = 2.0;
    Params params;
    double shift = 0.0;
};

struct TerminalConfig {
    std::string id;
    Params params;
};

struct RhoConfig {
    std::string family = "linear";
    Params params;
};

struct SolveExperiment {
    bool write_solution = true;
};

struct SweepExperiment {
    std::vector<double> scales{1.0, 0.5, 0.25, 0.1, 0.0};
    double p = 2.0;
    double slack_se = 2.0;
};

struct TruncateExperiment {
    std::vector<double> levels{1.0, 2.0, 4.0, 8.0};
    double r = 1.0;
    double p = 2.0;
};

struct CompareExperiment {
    GeneratorConfig generator_prime;
    TerminalConfig terminal_prime;
    std::optional<double> tolerance;
    bool enforce_gamma = true;
    bool posthoc = true;
    std::size_t preflight_samples = 20000;
};

struct CheckExperiment {
    std::vector<std::string> assumptions{"f0", "monotonicity", "growth"};
    std::size_t samples = 100000;
    std::uint64_t seed = 20240101;
    double tolerance = 1e-9;
    double radius = 1.0;
    std::vector<double> p_values{1.5, 2.0, 3.0};
};

struct BihariExperiment {
    double c = 1.0;
    std::vector<double> K{1.0};  // one value (constant) or one per node
    RhoConfig rho;
};

using Experiment = std::variant<SolveExperiment, SweepExperiment, TruncateExperiment, CompareExperiment,
                                CheckExperiment, BihariExperiment>;

struct RunConfig {
    std::optional<LevyModel> model;
    TimeGrid grid;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    bool has_ensemble = false;
    std::optional<GeneratorConfig> generator;
    std::optional<TerminalConfig> terminal;
    SchemeConfig scheme;
    Experiment experiment;
    std::string experiment_type;
    std::string output_dir = "out";
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

namespace detail {

/// A JSON object whose keys must all be consumed; reports errors by field path.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const Json& raw(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) throw ConfigError(field(key) + ": required field is missing");
        return j_.at(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const std::string& key) { return as_number(raw(key), field(key)); }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : mark(key, fallback); }

    std::uint64_t unsigned_int(const std::string& key) { return as_unsigned(raw(key), field(key)); }
    std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) {
        return has(key) ? unsigned_int(key) : mark(key, fallback);
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return mark(key, fallback);
        const Json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(field(key) + ": expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key) {
        const Json& v = raw(key);
        if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        return has(key) ? string(key) : mark(key, fallback);
    }

    std::vector<double> numbers(const std::string& key) {
        const Json& v = raw(key);
        if (!v.is_array()) throw ConfigError(field(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.push_back(as_number(v[i], field(key) + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

    ObjectReader object(const std::string& key) { return ObjectReader(raw(key), field(key)); }

    Params params(const std::string& key) {
        Params out;
        if (!has(key)) return mark(key, out);
        ObjectReader r = object(key);
        for (const auto& [name, value] : r.j_.items()) out[name] = r.number(name);
        r.finish();
        return out;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!used_.count(key)) throw ConfigError(field(key) + ": unknown key");
        }
    }

    static double as_number(const Json& v, const std::string& where) {
        if (!v.is_number()) throw ConfigError(where + ": expected a number");
        return v.get<double>();
    }

    static std::uint64_t as_unsigned(const Json& v, const std::string& where) {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
        throw ConfigError(where + ": expected a non-negative integer");
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    template <typename T>
    T mark(const std::string& key, T value) {
        used_.insert(key);
        return value;
    }

    const Json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline LevyModel parse_model(ObjectReader r) {
    LevyModel m;
    m.d = r.unsigned_int("d");
    m.k = r.unsigned_int("k", 0);
    m.drift = r.has("a") ? r.numbers("a") : std::vector<double>(m.d, 0.0);
    if (r.has("sigma")) {
        const Json& s = r.raw("sigma");
        const std::string where = r.field("sigma");
        if (!s.is_array() || s.size() != m.d) throw ConfigError(where + ": expected d rows");
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!s[i].is_array() || s[i].size() != m.k) {
                throw ConfigError(where + "[" + std::to_string(i) + "]: expected k entries");
            }
            for (std::size_t l = 0; l < m.k; ++l) {
                m.sigma.push_back(
                    ObjectReader::as_number(s[i][l], where + "[" + std::to_string(i) + "][" + std::to_string(l) + "]"));
            }
        }
    } else {
        m.sigma.assign(m.d * m.k, 0.0);
        for (std::size_t i = 0; i < std::min(m.d, m.k); ++i) m.sigma[i * m.k + i] = 1.0;
    }
    if (r.has("atoms")) {
        const Json& a = r.raw("atoms");
        if (!a.is_array()) throw ConfigError(r.field("atoms") + ": expected an array");
        for (std::size_t j = 0; j < a.size(); ++j) {
            ObjectReader atom(a[j], r.field("atoms") + "[" + std::to_string(j) + "]");
            m.atoms.push_back(JumpAtom{atom.numbers("mark"), atom.number("intensity")});
            atom.finish();
        }
    }
    r.finish();
    try {
        m.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    return m;
}

inline GeneratorConfig parse_generator(ObjectReader r) {
    GeneratorConfig g;
    g.id = r.string("id");
    g.p = r.number("p", 2.0);
    g.params = r.params("params");
    g.shift = r.number("shift", 0.0);
    r.finish();
    return g;
}

inline TerminalConfig parse_terminal(ObjectReader r) {
    TerminalConfig t;
    t.id = r.string("id");
    t.params = r.params("params");
    r.finish();
    return t;
}

inline SchemeConfig parse_scheme(ObjectReader r) {
    SchemeConfig s;
    s.basis_degree = static_cast<unsigned>(r.unsigned_int("basis_degree", s.basis_degree));
    const std::string method = r.string("method", "fixed_point");
    if (method == "fixed_point") {
        s.method = ImplicitMethod::FixedPoint;
    } else if (method == "bisection") {
        s.method = ImplicitMethod::Bisection;
    } else {
        throw ConfigError(r.field("method") + ": expected \"fixed_point\" or \"bisection\"");
    }
    s.damping = r.number("damping", s.damping);
    s.tolerance = r.number("tolerance", s.tolerance);
    s.max_iterations = static_cast<unsigned>(r.unsigned_int("max_iterations", s.max_iterations));
    s.ridge = r.number("ridge", s.ridge);
    r.finish();
    try {
        s.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    return s;
}

inline Experiment parse_experiment(ObjectReader r, std::string& type) {
    type = r.string("type");
    if (type == "solve") {
        SolveExperiment e;
        e.write_solution = r.boolean("write_solution", true);
        r.finish();
        return e;
    }
    if (type == "sweep") {
        SweepExperiment e;
        if (r.has("scales")) e.scales = r.numbers("scales");
        e.p = r.number("p", e.p);
        e.slack_se = r.number("slack_se", e.slack_se);
        r.finish();
        return e;
    }
    if (type == "truncate") {
        TruncateExperiment e;
        if (r.has("levels")) e.levels = r.numbers("levels");
        e.r = r.number("r", e.r);
        e.p = r.number("p", e.p);
        r.finish();
        return e;
    }
    if (type == "compare") {
        CompareExperiment e;
        e.generator_prime = parse_generator(r.object("generator_prime"));
        e.terminal_prime = parse_terminal(r.object("terminal_prime"));
        if (r.has("tolerance")) e.tolerance = r.number("tolerance");
        e.enforce_gamma = r.boolean("enforce_gamma", true);
        e.posthoc = r.boolean("posthoc", true);
        e.preflight_samples = r.unsigned_int("preflight_samples", e.preflight_samples);
        r.finish();
        return e;
    }
    if (type == "check") {
        CheckExperiment e;
        if (r.has("assumptions")) {
            const Json& a = r.raw("assumptions");
            if (!a.is_array()) throw ConfigError(r.field("assumptions") + ": expected an array of strings");
            e.assumptions.clear();
            static const std::set<std::string> known{"f0", "monotonicity", "growth", "gamma", "rho_bounds", "osgood"};
            for (std::size_t i = 0; i < a.size(); ++i) {
                const std::string where = r.field("assumptions") + "[" + std::to_string(i) + "]";
                if (!a[i].is_string() || !known.count(a[i].get<std::string>())) {
                    throw ConfigError(where + ": expected one of f0, monotonicity, growth, gamma, rho_bounds, osgood");
                }
                e.assumptions.push_back(a[i].get<std::string>());
            }
        }
        e.samples = r.unsigned_int("samples", e.samples);
        e.seed = r.unsigned_int("seed", e.seed);
        e.tolerance = r.number("tolerance", e.tolerance);
        e.radius = r.number("radius", e.radius);
        if (r.has("p_values")) e.p_values = r.numbers("p_values");
        r.finish();
        return e;
    }
    if (type == "bihari") {
        BihariExperiment e;
        e.c = r.number("c", e.c);
        if (r.has("K")) {
            const Json& k = r.raw("K");
            if (k.is_number()) {
                e.K = {k.get<double>()};
            } else {
                e.K = r.numbers("K");
            }
        }
        if (r.has("rho")) {
            ObjectReader rho = r.object("rho");
            e.rho.family = rho.string("family");
            e.rho.params = rho.params("params");
            rho.finish();
        }
        r.finish();
        return e;
    }
    throw ConfigError(r.field("type") + ": unknown experiment '" + type +
                      "' (expected solve, sweep, compare, truncate, check or bihari)");
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) line += text[i] == '\n' ? 1 : 0;
    return line;
}

}  // namespace detail

/// Parses and validates a run configuration; every error names the offending field.
inline RunConfig parse_config(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config: line " + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
    }
    detail::ObjectReader root(j, "");
    RunConfig cfg;
    {
        detail::ObjectReader g = root.object("grid");
        const double T = g.number("T");
        const auto N = g.unsigned_int("N");
        g.finish();
        try {
            cfg.grid = TimeGrid::uniform(T, N);
        } catch (const ValidationError& e) {
            throw ConfigError(std::string("grid: ") + e.what());
        }
    }
    cfg.experiment = detail::parse_experiment(root.object("experiment"), cfg.experiment_type);
    const bool needs_solver = cfg.experiment_type != "check" && cfg.experiment_type != "bihari";
    const bool needs_generator = cfg.experiment_type != "bihari";

    if (root.has("model") || needs_generator) cfg.model = detail::parse_model(root.object("model"));
    if (root.has("ensemble") || needs_solver) {
        detail::ObjectReader e = root.object("ensemble");
        cfg.paths = e.unsigned_int("M");
        cfg.seed = e.unsigned_int("seed");
        e.finish();
        if (cfg.paths == 0) throw ConfigError("ensemble.M: must be positive");
        cfg.has_ensemble = true;
    }
    if (root.has("generator") || needs_generator) cfg.generator = detail::parse_generator(root.object("generator"));
    if (root.has("terminal") || needs_solver) cfg.terminal = detail::parse_terminal(root.object("terminal"));
    if (root.has("scheme")) cfg.scheme = detail::parse_scheme(root.object("scheme"));
    cfg.output_dir = root.string("output_dir", cfg.output_dir);
    root.finish();
    return cfg;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace levy_bsde
