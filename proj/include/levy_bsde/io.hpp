#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levy_bsde/analysis.hpp"
#include "levy_bsde/assumptions.hpp"
#include "levy_bsde/comparison.hpp"
#include "levy_bsde/error.hpp"
#include "levy_bsde/format.hpp"
#include "levy_bsde/inequalities.hpp"
#include "levy_bsde/solver.hpp"

namespace levy_bsde {

using Json = nlohmann::json;

/// Non-finite numbers become the strings "inf", "-inf", "nan" (JSON has no literal for them).
inline Json json_number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline Json to_json(const AssumptionReport& r) {
    Json worst = Json::object();
    for (const auto& [name, values] : r.worst_point) {
        Json arr = Json::array();
        for (double v : values) arr.push_back(json_number(v));
        worst[name] = arr;
    }
    return {{"assumption", r.assumption}, {"samples", r.samples},    {"max_violation", json_number(r.max_violation)},
            {"worst_point", worst},       {"pass", r.pass},          {"seed", r.seed},
            {"tolerance", r.tolerance}};
}

inline Json to_json(const StepDiagnostics& d) {
    return {{"step", d.step},
            {"max_iterations", d.max_iterations},
            {"total_iterations", d.total_iterations},
            {"bisection_fallbacks", d.bisection_fallbacks},
            {"basis_size", d.basis_size},
            {"condition", json_number(d.condition)},
            {"residual_std", json_number(d.residual_std)},
            {"fit_se", json_number(d.fit_se)}};
}

inline Json solution_diagnostics(const BsdeSolution& s) {
    Json steps = Json::array();
    for (const auto& d : s.diagnostics) steps.push_back(to_json(d));
    return {{"generator", s.generator_id},
            {"terminal", s.terminal_id},
            {"paths", s.paths},
            {"steps", s.steps()},
            {"d", s.d},
            {"k", s.k},
            {"atoms", s.atoms()},
            {"ensemble_fingerprint", hex64(s.ensemble_fingerprint)},
            {"diagnostics", steps}};
}

inline Json to_json(const NormReport& n) {
    return {{"p", n.p},
            {"sp", json_number(n.sp)},
            {"lpw", json_number(n.lpw)},
            {"lpn", json_number(n.lpn)},
            {"i_f0", json_number(n.i_f0)},
            {"sp_se", json_number(n.sp_se)},
            {"lpw_se", json_number(n.lpw_se)},
            {"lpn_se", json_number(n.lpn_se)}};
}

inline Json to_json(const ZuRatio& z) {
    return {{"numerator", json_number(z.numerator)},
            {"denominator", json_number(z.denominator)},
            {"ratio", json_number(z.ratio)},
            {"zero_data", z.zero_data}};
}

inline Json to_json(const SweepReport& r) {
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"epsilon", row.epsilon},
                        {"norms", to_json(row.norms)},
                        {"zu", to_json(row.zu)},
                        {"sp_ok", row.sp_ok},
                        {"lpw_ok", row.lpw_ok},
                        {"lpn_ok", row.lpn_ok}});
    }
    return {{"p", r.p},
            {"slack_se", r.slack_se},
            {"rows", rows},
            {"zero_row_exact", r.zero_row_exact},
            {"max_zu_ratio", json_number(r.max_zu_ratio)},
            {"zu_bounded", r.zu_bounded},
            {"pass", r.pass}};
}

inline Json to_json(const TruncationReport& r) {
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"level", row.level},
                        {"inactive_level", row.inactive_level},
                        {"sp", json_number(row.distance.sp)},
                        {"lpw", json_number(row.distance.lpw)},
                        {"lpn", json_number(row.distance.lpn)},
                        {"ok", row.ok}});
    }
    return {{"p", r.p}, {"r", r.r}, {"psi_sup", json_number(r.psi_sup)}, {"rows", rows},
            {"inactive_zero", r.inactive_zero}, {"pass", r.pass}};
}

inline Json to_json(const ComparisonReport& r) {
    return {{"violations", r.violations},
            {"checked", r.checked},
            {"max_excess", json_number(r.max_excess)},
            {"max_gap", json_number(r.max_gap)},
            {"pass", r.pass},
            {"generator", r.generator},
            {"generator_prime", r.generator_prime},
            {"terminal", r.terminal},
            {"terminal_prime", r.terminal_prime},
            {"ensemble_fingerprint", hex64(r.ensemble_fingerprint)}};
}

inline Json to_json(const ComparisonExperiment& e) {
    const auto& p = e.preflight;
    Json j = {{"preflight",
               {{"gamma", to_json(p.gamma)},
                {"terminal_violations", p.terminal_violations},
                {"terminal_max_excess", json_number(p.terminal_max_excess)},
                {"generator_samples", p.generator_samples},
                {"generator_violations", p.generator_violations},
                {"generator_max_excess", json_number(p.generator_max_excess)},
                {"pass", p.pass}}},
              {"precondition_failed", e.precondition_failed},
              {"pass", e.pass}};
    if (e.comparison) j["comparison"] = to_json(*e.comparison);
    if (e.posthoc) {
        j["posthoc"] = {{"checked", e.posthoc->checked},
                        {"violations", e.posthoc->violations},
                        {"max_excess", json_number(e.posthoc->max_excess)}};
    }
    return j;
}

inline Json to_json(const OsgoodReport& r) {
    return {{"eps0", r.eps0}, {"partials", r.partials}, {"increments", r.increments}, {"diverging", r.diverging}};
}

inline Json to_json(const UniformIntegrabilityReport& r) {
    return {{"p", r.p},           {"threshold", r.threshold}, {"n", r.n},          {"moment", r.moment},
            {"rho_moment", r.rho_moment}, {"moment_ok", r.moment_ok}, {"rho_ok", r.rho_ok}, {"pass", r.pass}};
}

inline Json to_json(const UniquenessReport& r) {
    return {{"delta", r.delta},
            {"max_abs_diff", json_number(r.max_abs_diff)},
            {"tolerance", r.tolerance},
            {"bit_identical", r.bit_identical},
            {"pass", r.pass}};
}

namespace detail {

inline void csv_row(std::ostream& os, std::initializer_list<double> values, const std::string& tail) {
    std::string line;
    bool first = true;
    for (double v : values) {
        if (!first) line += ',';
        append_double(line, v);
        first = false;
    }
    line += ',';
    line += tail;
    line += '\n';
    os << line;
}

}  // namespace detail

/// CSV `epsilon_or_n,sp,lpw,lpn,verdict`.
inline void write_sweep_csv(std::ostream& os, const SweepReport& r) {
    os << "epsilon_or_n,sp,lpw,lpn,verdict\n";
    for (const auto& row : r.rows) {
        const bool ok = row.sp_ok && row.lpw_ok && row.lpn_ok && (row.epsilon != 0.0 || r.zero_row_exact);
        detail::csv_row(os, {row.epsilon, row.norms.sp, row.norms.lpw, row.norms.lpn}, ok ? "pass" : "fail");
    }
}

inline void write_truncation_csv(std::ostream& os, const TruncationReport& r) {
    os << "epsilon_or_n,sp,lpw,lpn,verdict\n";
    for (const auto& row : r.rows) {
        const bool ok = row.ok && (!row.inactive_level || r.inactive_zero);
        detail::csv_row(os, {row.level, row.distance.sp, row.distance.lpw, row.distance.lpn}, ok ? "pass" : "fail");
    }
}

/// CSV `t,bound,in_domain`.
inline void write_bihari_csv(std::ostream& os, const BihariBound& b) {
    os << "t,bound,in_domain\n";
    for (std::size_t i = 0; i < b.t.size(); ++i) {
        std::string line;
        append_double(line, b.t[i]);
        line += ',';
        append_double(line, b.bound[i]);
        line += b.in_domain[i] ? ",true\n" : ",false\n";
        os << line;
    }
}

/// CSV `t,mean_y,mean_y_prime,mean_gap` with gap = Y' - Y.
inline void write_comparison_csv(std::ostream& os, const ComparisonReport& r) {
    os << "t,mean_y,mean_y_prime,mean_gap\n";
    for (std::size_t i = 0; i < r.t.size(); ++i) {
        std::string line;
        append_double(line, r.t[i]);
        line += ',';
        append_double(line, r.mean_y[i]);
        line += ',';
        append_double(line, r.mean_y_prime[i]);
        line += ',';
        append_double(line, r.mean_y_prime[i] - r.mean_y[i]);
        line += '\n';
        os << line;
    }
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

}  // namespace levy_bsde
