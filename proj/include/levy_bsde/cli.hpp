#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "levy_bsde/analysis.hpp"
#include "levy_bsde/assumptions.hpp"
#include "levy_bsde/comparison.hpp"
#include "levy_bsde/config.hpp"
#include "levy_bsde/format.hpp"
#include "levy_bsde/inequalities.hpp"
#include "levy_bsde/io.hpp"
#include "levy_bsde/path_ensemble.hpp"
#include "levy_bsde/registry.hpp"
#include "levy_bsde/solver.hpp"
#include "levy_bsde/version.hpp"

namespace levy_bsde {

inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitVerdictFail = 2;

namespace detail {

inline GeneratorSpec build_generator(const GeneratorConfig& g, const LevyModel& model, const TimeGrid& grid) {
    Params params = g.params;
    if (g.id == "showcase_simplified" && !params.count("t_min")) params["t_min"] = grid.dt(0) / 2.0;
    return shifted(make_generator(g.id, model, params, g.p), g.shift);
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Runner {
public:
    Runner(const RunConfig& cfg, std::filesystem::path out) : cfg_(cfg), out_(std::move(out)) {}

    int run() {
        std::filesystem::create_directories(out_);
        return std::visit([this](const auto& e) { return run(e); }, cfg_.experiment);
    }

    const std::vector<std::string>& outputs() const { return outputs_; }

private:
    const LevyModel& model() const { return *cfg_.model; }

    GeneratorSpec generator() const { return build_generator(*cfg_.generator, model(), cfg_.grid); }

    TerminalCondition terminal() const { return make_terminal(cfg_.terminal->id, model(), cfg_.terminal->params); }

    PathEnsemble ensemble() const { return simulate_forward(model(), cfg_.grid, cfg_.paths, cfg_.seed); }

    std::ofstream file(const std::string& name) {
        outputs_.push_back(name);
        return open_output(out_ / name);
    }

    void json(const std::string& name, const Json& j) {
        outputs_.push_back(name);
        write_json_file(out_ / name, j);
    }

    static int verdict(bool pass) { return pass ? kExitPass : kExitVerdictFail; }

    int run(const SolveExperiment& e) {
        const auto spec = generator();
        const auto xi = terminal();
        const auto ens = ensemble();
        const auto sol = solve_bsde(spec, xi, ens, cfg_.scheme);
        if (e.write_solution) {
            auto out = file("solution.csv");
            sol.write_csv(out);
        }
        json("diagnostics.json", solution_diagnostics(sol));
        std::vector<double> y0(sol.paths);
        for (std::size_t m = 0; m < sol.paths; ++m) y0[m] = sol.y(m, 0)[0];
        const auto y0_est = mean_estimate(y0);
        json("report.json", {{"experiment", "solve"},
                             {"y0_mean", json_number(y0_est.mean)},
                             {"y0_se", json_number(y0_est.se)},
                             {"norms", to_json(estimate_norms(sol, spec, spec.p))},
                             {"pass", true}});
        return kExitPass;
    }

    int run(const SweepExperiment& e) {
        const auto rep = stability_sweep(generator(), terminal(), ensemble(), cfg_.scheme, e.scales, e.p, e.slack_se);
        auto out = file("sweep.csv");
        write_sweep_csv(out, rep);
        json("report.json", to_json(rep));
        return verdict(rep.pass);
    }

    int run(const TruncateExperiment& e) {
        const auto rep =
            truncation_convergence_study(generator(), terminal(), ensemble(), cfg_.scheme, e.levels, e.r, e.p);
        auto out = file("truncation.csv");
        write_truncation_csv(out, rep);
        json("report.json", to_json(rep));
        return verdict(rep.pass);
    }

    int run(const CompareExperiment& e) {
        const auto spec = generator();
        const auto spec_prime = build_generator(e.generator_prime, model(), cfg_.grid);
        const auto xi = terminal();
        const auto xi_prime = make_terminal(e.terminal_prime.id, model(), e.terminal_prime.params);
        ComparisonOptions opts;
        opts.tolerance = e.tolerance;
        opts.enforce_gamma = e.enforce_gamma;
        opts.posthoc = e.posthoc;
        opts.sampler.samples = e.preflight_samples;
        const auto rep = comparison_experiment(spec, spec_prime, xi, xi_prime, ensemble(), cfg_.scheme, opts);
        if (rep.comparison) {
            auto out = file("comparison_nodes.csv");
            write_comparison_csv(out, *rep.comparison);
        }
        json("report.json", to_json(rep));
        return verdict(rep.pass);
    }

    int run(const CheckExperiment& e) {
        const auto spec = generator();
        SamplerConfig sampler;
        sampler.samples = e.samples;
        sampler.seed = e.seed;
        sampler.t_max = cfg_.grid.horizon();
        Json reports = Json::array();
        bool pass = true;
        auto add = [&](Json j, bool ok) {
            reports.push_back(std::move(j));
            pass = pass && ok;
        };
        for (const auto& name : e.assumptions) {
            if (name == "f0") {
                const auto r = check_f0_consistency(spec, sampler, 0.0);
                add(to_json(r), r.pass);
            } else if (name == "monotonicity") {
                const auto r = check_monotonicity(spec, sampler, e.tolerance);
                add(to_json(r), r.pass);
            } else if (name == "growth") {
                const auto g = check_growth(spec, e.radius, cfg_.grid.nodes(), sampler, e.tolerance);
                Json j = to_json(g.report);
                j["psi"] = g.psi;
                add(j, g.report.pass);
            } else if (name == "gamma") {
                const auto r = check_gamma(spec, model(), sampler, e.tolerance);
                add(to_json(r), r.pass);
            } else if (name == "rho_bounds") {
                const auto grid = log_grid(1e-6, 1e3, 2000);
                for (double p : e.p_values) {
                    const auto r = check_rho_bounds(spec.rho, p, grid, e.tolerance);
                    Json j = to_json(r);
                    j["p"] = p;
                    add(j, r.pass);
                }
            } else if (name == "osgood") {
                const auto r = osgood_divergence(spec.rho);
                Json j = to_json(r);
                j["assumption"] = "osgood";
                j["rho"] = spec.rho.name();
                add(j, r.diverging);
            }
        }
        json("report.json", {{"experiment", "check"}, {"generator", spec.id}, {"reports", reports}, {"pass", pass}});
        return verdict(pass);
    }

    int run(const BihariExperiment& e) {
        const std::size_t nodes = cfg_.grid.steps() + 1;
        std::vector<double> K = e.K;
        if (K.size() == 1) K.assign(nodes, K.front());
        if (K.size() != nodes) {
            throw ConfigError("experiment.K: expected one value or " + std::to_string(nodes) + " values");
        }
        const auto rho = make_rho(e.rho.family, e.rho.params);
        const auto b = bihari_bound(e.c, K, rho, cfg_.grid);
        auto out = file("bihari.csv");
        write_bihari_csv(out, b);
        bool in_domain = true;
        bool monotone = true;
        for (std::size_t i = 0; i < b.bound.size(); ++i) {
            in_domain = in_domain && b.in_domain[i];
            if (i > 0) monotone = monotone && b.bound[i] <= b.bound[i - 1];
        }
        Json report = {{"experiment", "bihari"},  {"c", e.c},
                       {"rho", rho.name()},       {"bound_at_0", json_number(b.bound.front())},
                       {"in_domain", in_domain},  {"nonincreasing", monotone},
                       {"pass", in_domain && monotone}};
        json("report.json", report);
        return verdict(in_domain && monotone);
    }

    const RunConfig& cfg_;
    std::filesystem::path out_;
    std::vector<std::string> outputs_;
};

}  // namespace detail

/// Runs one configuration file. Returns 0 on pass, 2 on a failed verdict, 1 on error;
/// errors are reported on `err`.
inline int run_config_file(const std::string& path, const std::optional<std::string>& output_override = std::nullopt,
                           std::ostream& err = std::cerr) {
    try {
        const std::string text = read_text_file(path);
        const RunConfig cfg = parse_config(text);
        const std::filesystem::path out = output_override ? *output_override : cfg.output_dir;
        detail::Runner runner(cfg, out);
        const int status = runner.run();
        Json manifest = {{"tool", "levy_bsde"},
                         {"version", kVersion},
                         {"experiment", cfg.experiment_type},
                         {"config", path},
                         {"config_hash", hex64(fnv1a(text))},
                         {"seed", cfg.seed},
                         {"threads", max_threads()},
                         {"outputs", runner.outputs()},
                         {"exit_status", status},
                         {"timestamp", detail::utc_timestamp()}};
        write_json_file(out / "manifest.json", manifest);
        return status;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace levy_bsde
