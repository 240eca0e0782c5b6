#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dce/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"dcesim - delayed-choice entanglement simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::int64_t trials_override = -1;
    std::uint64_t seed_override = 0;
    dce::RunOptions options;

    CLI::App* run = app.add_subcommand("run", "Run a scenario config file");
    run->add_option("config", config_path, "Scenario config (JSON)")->required();
    run->add_option("--trials", trials_override, "Override the config trial count");
    CLI::Option* seed_opt =
        run->add_option("--seed", seed_override, "Override the config seed");
    run->add_flag("--self-check", options.self_check,
                  "Exit nonzero if any MC estimate deviates > 5 sigma from exact");
    run->add_flag("--diagnostics", options.diagnostics,
                  "Expose component_index in records and per-preparation reports");
    run->add_option("--out", options.out_dir, "Output directory")
        ->default_val(std::string("."));
    run->add_option("--threads", options.threads, "Monte Carlo worker threads")
        ->default_val(1);

    CLI11_PARSE(app, argc, argv);

    if (trials_override >= 0) options.trials = trials_override;
    if (seed_opt->count() > 0) options.seed = seed_override;

    try {
        const dce::ScenarioConfig config = dce::load_config(config_path);
        const dce::RunResult result = dce::run_scenario(config, options, std::cout);
        for (const auto& path : result.files_written)
            std::cerr << "wrote " << path << "\n";
        if (result.exit_code != 0)
            std::cerr << "self-check: at least one estimate deviates > 5 sigma\n";
        return result.exit_code;
    } catch (const dce::ValidationError& e) {
        std::cerr << "config invalid:\n";
        for (const auto& violation : e.violations)
            std::cerr << "  - " << violation << "\n";
        return 1;
    } catch (const dce::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const dce::IoError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
