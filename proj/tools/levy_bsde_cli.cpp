#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "levy_bsde/cli.hpp"
#include "levy_bsde/parallel.hpp"
#include "levy_bsde/registry.hpp"
#include "levy_bsde/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo solver and property harness for BSDEs driven by Levy noise"};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (default: LEVY_BSDE_THREADS or all cores)");

    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
    std::string config;
    std::string output;
    run->add_option("config", config, "Path to the config file")->required();
    run->add_option("-o,--output", output, "Output directory (overrides output_dir)");

    auto* list = app.add_subcommand("list", "List generator, terminal and rho identifiers");
    std::string filter;
    list->add_option("filter", filter, "Only show identifiers containing this text");

    app.add_subcommand("version", "Print the version");

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) levy_bsde::set_max_threads(threads);

    if (*run) {
        return levy_bsde::run_config_file(config, output.empty() ? std::nullopt : std::optional<std::string>(output));
    }
    if (*list) {
        for (const auto& line : levy_bsde::list_registry(filter)) std::cout << line << '\n';
        return 0;
    }
    std::cout << "levy_bsde " << levy_bsde::kVersion << '\n';
    return 0;
}
