#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochpmp/controls.hpp"
#include "stochpmp/model.hpp"
#include "stochpmp/pmp.hpp"
#include "stochpmp/regression.hpp"

namespace stochpmp::cli {

enum ExitCode : int { kSuccess = 0, kVerificationFailed = 1, kConfigError = 2, kNumericalError = 3 };

/// Command-line values that take precedence over the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<std::size_t> steps;
};

/// A run configuration with every default filled in and the problem loaded.
struct RunConfig {
    std::shared_ptr<const ProblemSpec> problem;
    nlohmann::json problem_source;
    std::size_t steps = 100;
    std::size_t paths = 1000;
    std::uint64_t seed = 0;
    bool paths_forced = false;  // deterministic problems always run one path
    RegressionConfig regression;
    Tolerances tolerances;
    nlohmann::json candidate = nlohmann::json::object();
    nlohmann::json direction;  // optional perturbation direction for the adjoint command
    std::vector<std::size_t> chatter_levels{4, 16, 64};
    std::string adjoint_method = "bsde";  // used by verify and certify
    bool default_directions = true;
    bool export_csv = true;
    bool export_binary = true;
    std::filesystem::path base_dir;  // relative file references resolve here

    TimeGrid grid() const { return TimeGrid(problem->horizon(), steps); }
    /// Full resolved configuration, written next to every output.
    nlohmann::json echo() const;
};

RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir, const Overrides& overrides);
RunConfig load_config(const std::filesystem::path& file, const Overrides& overrides);

/// Candidate pair resolved on the run grid.
struct ResolvedCandidate {
    std::optional<StrictControl> strict;
    RelaxedControl measure;
    SingularControl singular;

    Candidate as_candidate() const { return {measure, singular, strict.has_value()}; }
};

ResolvedCandidate resolve_candidate(const nlohmann::json& source, const RunConfig& config);

std::vector<std::string> command_names();

/// Runs one subcommand, writing its artifacts and manifest.json under
/// `out_dir`. Returns kSuccess or kVerificationFailed; configuration and
/// numerical problems propagate as ConfigError / NumericalError.
int run_command(const std::string& command, const RunConfig& config, const std::filesystem::path& out_dir,
                std::ostream& log);

}  // namespace stochpmp::cli
