#include <algorithm>
#include <cmath>
#include <ostream>

#include "stochpmp/adjoint.hpp"
#include "stochpmp/cli.hpp"
#include "stochpmp/error.hpp"
#include "stochpmp/io.hpp"
#include "stochpmp/sde.hpp"

namespace stochpmp::cli {

using nlohmann::json;

namespace {

class Outputs {
public:
    Outputs(std::filesystem::path dir, const RunConfig& config) : dir_(std::move(dir)), config_(config) {
        std::filesystem::create_directories(dir_);
        json_file("config.json", config.echo());
    }

    void json_file(const std::string& name, const json& j) {
        write_json(dir_ / name, j);
        files_.push_back(name);
    }
    void text_file(const std::string& name, const std::string& text) {
        write_text(dir_ / name, text);
        files_.push_back(name);
    }
    void ensemble(const std::string& name, const PathArray& a, const TimeGrid& grid, const std::string& prefix) {
        if (config_.export_csv) {
            write_ensemble_csv(dir_ / (name + ".csv"), a, grid, prefix);
            files_.push_back(name + ".csv");
        }
        if (config_.export_binary) {
            write_ensemble_binary(dir_ / (name + ".bin"), a, config_.seed);
            files_.push_back(name + ".bin");
        }
    }
    int finish(const std::string& command, int code) {
        files_.push_back("manifest.json");
        write_json(dir_ / "manifest.json", {{"command", command}, {"exit_code", code}, {"files", files_}});
        return code;
    }

private:
    std::filesystem::path dir_;
    const RunConfig& config_;
    std::vector<std::string> files_;
};

json estimate_json(const MeanEstimate& e) {
    return {{"mean", e.mean}, {"std_error", e.std_error}, {"samples", e.samples}};
}

struct Run {
    ResolvedCandidate candidate;
    TimeGrid grid;
    NoiseBatch noise;
    TrajectoryEnsemble traj;
};

Run simulate_candidate(const RunConfig& config) {
    const auto& spec = *config.problem;
    auto candidate = resolve_candidate(config.candidate, config);
    const auto grid = config.grid();
    auto noise = NoiseBatch::generate(config.paths, grid, spec.dims().noise, config.seed);
    auto traj = candidate.strict ? simulate_strict(spec, *candidate.strict, candidate.singular, grid, noise)
                                 : simulate_relaxed(spec, candidate.measure, candidate.singular, grid, noise);
    return {std::move(candidate), grid, std::move(noise), std::move(traj)};
}

AdjointPair candidate_adjoint(const RunConfig& config, const Run& run) {
    const auto& spec = *config.problem;
    if (config.adjoint_method == "explicit") {
        const auto fund = fundamental_solutions(spec, run.candidate.measure, run.traj, run.noise);
        return adjoint_explicit(spec, run.candidate.measure, run.traj, fund, config.regression);
    }
    return adjoint_bsde(spec, run.candidate.measure, run.traj, run.noise, config.regression);
}

void print_report(const VerificationReport& report, std::ostream& log) {
    for (const auto& r : report.records) {
        log << "  " << r.id << ": " << (r.passed ? "pass" : "FAIL") << "  statistic=" << format_double(r.statistic)
            << " threshold=" << format_double(r.threshold);
        if (r.id == "hamiltonian-minimality") log << " worst_gap=" << format_double(r.detail.at("worst_gap").get<double>());
        log << '\n';
    }
    log << "verdict: " << (report.passed() ? "pass" : "fail") << '\n';
}

int cmd_simulate(const RunConfig& config, Outputs& out, std::ostream& log) {
    const auto& spec = *config.problem;
    const auto run = simulate_candidate(config);
    const auto parts = path_cost_parts(spec, run.candidate.measure, run.candidate.singular, run.traj);
    const std::size_t n = spec.dims().state;
    std::vector<double> mean(n, 0.0), variance(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> xs(run.traj.paths());
        for (std::size_t p = 0; p < xs.size(); ++p) xs[p] = run.traj.at(p, run.grid.steps())(static_cast<Eigen::Index>(i));
        const auto e = estimate_mean(xs);
        mean[i] = e.mean;
        variance[i] = e.std_error * e.std_error * static_cast<double>(e.samples);
    }
    const auto cost = estimate_mean(parts.total);
    out.ensemble("trajectory", run.traj.states, run.grid, "x");
    out.json_file("summary.json", {{"terminal_mean", mean},
                                   {"terminal_variance", variance},
                                   {"cost", estimate_json(cost)},
                                   {"paths", run.traj.paths()},
                                   {"steps", run.grid.steps()},
                                   {"seed", config.seed},
                                   {"provenance", run.traj.provenance}});
    log << "simulated " << run.traj.paths() << " paths x " << run.grid.steps() << " steps; cost "
        << format_double(cost.mean) << " (SE " << format_double(cost.std_error) << ")\n";
    return kSuccess;
}

int cmd_cost(const RunConfig& config, Outputs& out, std::ostream& log) {
    const auto& spec = *config.problem;
    const auto run = simulate_candidate(config);
    const auto parts = path_cost_parts(spec, run.candidate.measure, run.candidate.singular, run.traj);
    const auto total = estimate_mean(parts.total);
    out.json_file("cost.json", {{"cost", total.mean},
                                {"std_error", total.std_error},
                                {"paths", total.samples},
                                {"deterministic", spec.deterministic()},
                                {"form", run.candidate.strict ? "strict" : "relaxed"},
                                {"parts",
                                 {{"terminal", estimate_json(estimate_mean(parts.terminal))},
                                  {"running", estimate_json(estimate_mean(parts.running))},
                                  {"singular", estimate_json(estimate_mean(parts.singular))}}}});
    log << "cost " << format_double(total.mean) << " (SE " << format_double(total.std_error) << ")\n";
    return kSuccess;
}

int cmd_verify(const RunConfig& config, Outputs& out, std::ostream& log, bool certify) {
    const auto& spec = *config.problem;
    const auto run = simulate_candidate(config);
    const auto adjoint = candidate_adjoint(config, run);
    const auto candidate = run.candidate.as_candidate();
    auto directions =
        config.default_directions ? default_directions(spec, candidate.singular) : std::vector<Direction>{};
    if (!config.direction.is_null()) {
        auto dir = resolve_candidate(config.direction, config);
        directions.push_back({"config", std::move(dir.measure), std::move(dir.singular), std::nullopt});
    }
    out.json_file("adjoint_diagnostics.json", to_json(adjoint.diagnostics));
    if (!certify) {
        const auto report = verify_necessary(spec, candidate, adjoint, run.traj, config.tolerances, directions);
        out.json_file("report.json", to_json(report));
        print_report(report, log);
        return report.passed() ? kSuccess : kVerificationFailed;
    }
    const auto cert = certify_sufficient(spec, candidate, adjoint, run.traj, config.tolerances, directions);
    out.json_file("certificate.json", to_json(cert));
    print_report(cert.conditions, log);
    for (const auto* e : {&cert.terminal, &cert.hamiltonian}) {
        log << "  convexity " << e->target << " (" << e->method << "): " << (e->passed ? "pass" : "FAIL") << '\n';
    }
    log << "certified: " << (cert.certified ? "yes" : "no") << '\n';
    return cert.certified ? kSuccess : kVerificationFailed;
}

int cmd_chatter(const RunConfig& config, Outputs& out, std::ostream& log) {
    const auto& spec = *config.problem;
    const auto candidate = resolve_candidate(config.candidate, config);
    const auto grid = config.grid();
    const auto noise = NoiseBatch::generate(config.paths, grid, spec.dims().noise, config.seed);
    const auto rows = chattering_study(spec, candidate.measure, candidate.singular, grid, noise, config.chatter_levels);
    std::string csv = "n,traj_gap,cost_gap,SE\n";
    json table = json::array();
    for (const auto& r : rows) {
        csv += std::to_string(r.windows) + ',' + format_double(r.traj_gap) + ',' + format_double(r.cost_gap) + ',' +
               format_double(r.std_error) + '\n';
        table.push_back({{"n", r.windows}, {"traj_gap", r.traj_gap}, {"cost_gap", r.cost_gap}, {"SE", r.std_error}});
        log << "n=" << r.windows << " traj_gap=" << format_double(r.traj_gap)
            << " cost_gap=" << format_double(r.cost_gap) << " SE=" << format_double(r.std_error) << '\n';
    }
    out.text_file("chatter.csv", csv);
    out.json_file("chatter.json", {{"rows", table}});
    return kSuccess;
}

int cmd_adjoint(const RunConfig& config, Outputs& out, std::ostream& log) {
    const auto& spec = *config.problem;
    const auto run = simulate_candidate(config);
    const auto& mu = run.candidate.measure;
    const auto fund = fundamental_solutions(spec, mu, run.traj, run.noise);
    const auto expl = adjoint_explicit(spec, mu, run.traj, fund, config.regression);
    const auto bsde = adjoint_bsde(spec, mu, run.traj, run.noise, config.regression);

    const std::size_t last = run.grid.steps();
    double sq = 0.0, terminal_defect = 0.0;
    for (std::size_t p = 0; p < run.traj.paths(); ++p) {
        const Vector gx = spec.terminal_cost_x(run.traj.at(p, last));
        terminal_defect = std::max({terminal_defect, (expl.p.vec(p, last) - gx).lpNorm<Eigen::Infinity>(),
                                    (bsde.p.vec(p, last) - gx).lpNorm<Eigen::Infinity>()});
        for (std::size_t j = 0; j <= last; ++j) sq += (expl.p.vec(p, j) - bsde.p.vec(p, j)).squaredNorm();
    }
    const double agreement = std::sqrt(sq / static_cast<double>(run.traj.paths() * (last + 1)));

    json summary = {{"agreement_rms", agreement},
                    {"terminal_defect", terminal_defect},
                    {"inverse_defect", fund.max_inverse_defect()},
                    {"sup_square_norm", fund.sup_square_norm()},
                    {"diagnostics", {{"explicit", to_json(expl.diagnostics)}, {"bsde", to_json(bsde.diagnostics)}}}};
    if (!config.direction.is_null()) {
        const auto dir = resolve_candidate(config.direction, config);
        const auto z = simulate_variational(spec, mu, run.candidate.singular, dir.measure, dir.singular, run.traj,
                                            run.noise);
        const auto duality = duality_residual(spec, run.traj, fund, z);
        const auto vi = variational_inequality_value(spec, mu, run.candidate.singular, dir.measure, dir.singular,
                                                     bsde, run.traj);
        summary["duality"] = to_json(duality);
        summary["variational_inequality"] = estimate_json(vi);
        log << "duality residual " << format_double(duality.residual) << " (SE " << format_double(duality.std_error)
            << ")\n";
    }
    out.ensemble("p_explicit", expl.p, run.grid, "p");
    out.ensemble("p_bsde", bsde.p, run.grid, "p");
    out.ensemble("P_bsde", bsde.P, run.grid, "P");
    out.json_file("adjoint.json", summary);
    log << "explicit vs bsde p RMS " << format_double(agreement) << '\n';
    return kSuccess;
}

}  // namespace

std::vector<std::string> command_names() { return {"simulate", "cost", "verify", "certify", "chatter", "adjoint"}; }

int run_command(const std::string& command, const RunConfig& config, const std::filesystem::path& out_dir,
                std::ostream& log) {
    const auto names = command_names();
    if (std::find(names.begin(), names.end(), command) == names.end()) {
        throw ConfigError("unknown command '" + command + "'");
    }
    Outputs out(out_dir, config);
    int code = kSuccess;
    if (command == "simulate") {
        code = cmd_simulate(config, out, log);
    } else if (command == "cost") {
        code = cmd_cost(config, out, log);
    } else if (command == "verify") {
        code = cmd_verify(config, out, log, false);
    } else if (command == "certify") {
        code = cmd_verify(config, out, log, true);
    } else if (command == "chatter") {
        code = cmd_chatter(config, out, log);
    } else if (command == "adjoint") {
        code = cmd_adjoint(config, out, log);
    } else {
        throw ConfigError("unknown command '" + command + "'");
    }
    return out.finish(command, code);
}

}  // namespace stochpmp::cli
