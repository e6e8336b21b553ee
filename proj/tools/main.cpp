#include <iostream>

#include "CLI11.hpp"
#include "stochpmp/cli.hpp"
#include "stochpmp/error.hpp"

int main(int argc, char** argv) {
    namespace cli = stochpmp::cli;
    CLI::App app{"Monte Carlo toolkit for relaxed and singular stochastic control: simulation, adjoints and "
                 "maximum-principle checks"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_dir = "out";
    cli::Overrides overrides;
    std::uint64_t seed = 0;
    std::size_t paths = 0, steps = 0;
    app.add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", seed, "Override monte_carlo.seed");
    auto* paths_opt = app.add_option("--paths", paths, "Override monte_carlo.M")->check(CLI::PositiveNumber);
    auto* steps_opt = app.add_option("--steps", steps, "Override grid.N")->check(CLI::PositiveNumber);

    const std::vector<std::pair<std::string, std::string>> commands{
        {"simulate", "Simulate the candidate; write trajectories and a summary"},
        {"cost", "Estimate the candidate's expected cost"},
        {"verify", "Check the necessary optimality conditions (exit 1 on failure)"},
        {"certify", "Check the sufficient conditions (exit 1 if not certified)"},
        {"chatter", "Chattering convergence table for a relaxed target"},
        {"adjoint", "Compute the adjoint by both routes and compare them"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kConfigError;
    }
    if (*seed_opt) overrides.seed = seed;
    if (*paths_opt) overrides.paths = paths;
    if (*steps_opt) overrides.steps = steps;

    try {
        const auto config = cli::load_config(config_path, overrides);
        return cli::run_command(app.get_subcommands().front()->get_name(), config, out_dir, std::cout);
    } catch (const stochpmp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return cli::kConfigError;
    } catch (const stochpmp::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return cli::kNumericalError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return cli::kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return cli::kNumericalError;
    }
}
