// Acceptance suite. Prints one PASS/FAIL line per criterion; exit status is
// nonzero when any selected criterion fails.
//
//   acceptance            run every criterion
//   acceptance 3 7        run only criteria 3 and 7
//   --out DIR             scratch directory for command outputs

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stochpmp/adjoint.hpp"
#include "stochpmp/cli.hpp"
#include "stochpmp/io.hpp"
#include "stochpmp/pmp.hpp"
#include "stochpmp/sde.hpp"

#ifndef STOCHPMP_CONFIG_DIR
#error "STOCHPMP_CONFIG_DIR must point at configs/"
#endif

using namespace stochpmp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

class Clock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path g_out;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

fs::path config_file(const std::string& name) { return fs::path(STOCHPMP_CONFIG_DIR) / name; }

json config_json(const std::string& name) { return read_json_file(config_file(name)); }

cli::RunConfig config(const json& j) { return cli::parse_config(j, STOCHPMP_CONFIG_DIR, {}); }

cli::RunConfig named_config(const std::string& name) { return cli::load_config(config_file(name), {}); }

struct CommandRun {
    int code = 0;
    fs::path dir;
    json read(const std::string& file) const { return read_json_file(dir / file); }
};

CommandRun command(const std::string& cmd, const cli::RunConfig& c, const std::string& tag) {
    CommandRun r;
    r.dir = g_out / tag;
    fs::remove_all(r.dir);
    std::ostringstream log;
    r.code = cli::run_command(cmd, c, r.dir, log);
    return r;
}

const json& condition(const json& report, const std::string& id) {
    for (const auto& c : report.at("conditions")) {
        if (c.at("id") == id) return c;
    }
    throw std::runtime_error("report has no condition " + id);
}

DiscreteMeasure half_pm1() { return {{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)}, {0.5, 0.5}}; }

DiscreteMeasure dirac(double a) { return DiscreteMeasure::dirac(Vector::Constant(1, a)); }

// 1: J(v^n) <= 1/n^2 with successive ratios near 4.
Outcome example1_chattering_bound() {
    Clock clock;
    std::vector<double> costs;
    bool ok = true;
    std::string detail = "J =";
    for (std::size_t n : {4, 8, 16}) {
        auto j = config_json("example1_switching.json");
        j["candidate"]["control"]["blocks"] = n;
        const auto r = command("cost", config(j), "c1_n" + std::to_string(n));
        const double cost = r.read("cost.json").at("cost").get<double>();
        costs.push_back(cost);
        ok = ok && r.code == cli::kSuccess && cost <= 1.0 / static_cast<double>(n * n) + 1e-6;
        detail += " " + fmt(cost);
    }
    for (std::size_t i = 1; i < costs.size(); ++i) {
        const double ratio = costs[i - 1] / costs[i];
        ok = ok && ratio >= 3.0 && ratio <= 5.0;
        detail += (i == 1 ? "; ratios " : " ") + fmt(ratio);
    }
    const double t = clock.seconds();
    ok = ok && t < 1.0;
    return {ok, detail + "; " + fmt(t) + " s"};
}

// 2: the symmetric mixture costs zero, chattering costs vanish within the bound.
Outcome example1_relaxed_optimum() {
    const auto c = named_config("example1_chatter.json");
    const auto cost = command("cost", c, "c2_cost").read("cost.json").at("cost").get<double>();
    bool ok = std::abs(cost) <= 1e-12;
    std::string detail = "J(mu) = " + fmt(cost) + "; J(u_n) =";
    const auto rows = command("chatter", c, "c2_chatter").read("chatter.json").at("rows");
    double previous = std::numeric_limits<double>::infinity();
    for (const auto& row : rows) {
        const double n = row.at("n").get<double>();
        const double gap = row.at("cost_gap").get<double>();
        ok = ok && gap <= 1.0 / (n * n) + 1e-6 && gap < previous;
        previous = gap;
        detail += " " + fmt(gap) + " (n=" + fmt(n) + ")";
    }
    return {ok, detail};
}

// 3: Monte Carlo relaxed cost on example2_stochastic within 3 SE of T^2/2.
Outcome example2_relaxed_cost() {
    Clock clock;
    const auto r = command("cost", named_config("example2_mixture.json"), "c3_cost").read("cost.json");
    const double t = clock.seconds();
    const double cost = r.at("cost").get<double>(), se = r.at("std_error").get<double>();
    const bool ok = std::abs(cost - 0.5) <= 3.0 * se && t < 10.0;
    return {ok, "J = " + fmt(cost) + " +- " + fmt(se) + " (|J - 0.5| = " + fmt(std::abs(cost - 0.5) / se) +
                    " SE); " + fmt(t) + " s"};
}

// 4: finite-difference consistency of the variational process on example2_stochastic.
Outcome variational_consistency() {
    const auto spec = builtin_problem("example2_stochastic");
    const TimeGrid grid(1.0, 100);
    const auto noise = NoiseBatch::generate(10000, grid, 1, 20240601);
    const auto mu = RelaxedControl::constant(100, half_pm1());
    const auto q = RelaxedControl::constant(100, dirac(1.0));
    const auto xi = SingularControl::zero(100, 1);
    const auto base = simulate_relaxed(spec, mu, xi, grid, noise);
    const auto z = simulate_variational(spec, mu, xi, q, xi, base, noise);
    std::vector<double> stats;
    std::string detail = "max_t E|(x_theta - x)/theta - z|^2 =";
    for (double theta : {1e-1, 1e-2, 1e-3}) {
        const auto [mt, xt] = convex_combine(mu, xi, q, xi, theta);
        stats.push_back(finite_difference_gap(simulate_relaxed(spec, mt, xt, grid, noise), base, z, theta));
        detail += " " + fmt(stats.back());
    }
    bool ok = true;
    detail += "; ratios";
    for (std::size_t i = 1; i < stats.size(); ++i) {
        const double ratio = stats[i - 1] / stats[i];
        ok = ok && stats[i] < stats[i - 1] && ratio >= 3.0 && ratio <= 30.0;
        detail += " " + fmt(ratio);
    }
    return {ok, detail};
}

// 5: duality identity, Monte Carlo on example2_stochastic and exact on the deterministic built-ins.
Outcome duality_identity() {
    bool ok = true;
    std::string detail;
    {
        const auto spec = builtin_problem("example2_stochastic");
        const TimeGrid grid(1.0, 100);
        const auto noise = NoiseBatch::generate(10000, grid, 1, 20240601);
        const auto mu = RelaxedControl::constant(100, half_pm1());
        const auto xi = SingularControl::zero(100, 1);
        const auto traj = simulate_relaxed(spec, mu, xi, grid, noise);
        const auto fund = fundamental_solutions(spec, mu, traj, noise);
        const auto z = simulate_variational(spec, mu, xi, RelaxedControl::constant(100, dirac(1.0)), xi, traj, noise);
        const auto d = duality_residual(spec, traj, fund, z);
        ok = ok && d.residual <= 3.0 * d.std_error;
        detail += "example2_stochastic residual " + fmt(d.residual) + " (SE " + fmt(d.std_error) + ")";
    }
    for (const std::string name : {"example1", "example2_separated"}) {
        const auto spec = builtin_problem(name);
        const TimeGrid grid(1.0, 100);
        const auto noise = NoiseBatch::generate(1, grid, 1, 1);
        const auto mu = RelaxedControl::constant(100, half_pm1());
        const auto xi = SingularControl::zero(100, 1);
        const auto traj = simulate_relaxed(spec, mu, xi, grid, noise);
        const auto fund = fundamental_solutions(spec, mu, traj, noise);
        const auto z = simulate_variational(spec, mu, xi, RelaxedControl::constant(100, dirac(1.0)), xi, traj, noise);
        const auto d = duality_residual(spec, traj, fund, z);
        // Oracle: b_x = 0, so z' = b(1) - int b dmu = 1 and z_t = t.
        double worst = 0.0;
        for (std::size_t j = 0; j <= 100; ++j) worst = std::max(worst, std::abs(z.z.vec(0, j)(0) - grid.time(j)));
        const double allowance = 1e-6 + grid.dt();
        ok = ok && d.residual <= allowance && worst <= allowance;
        detail += "; " + name + " residual " + fmt(d.residual) + ", max |z - t| " + fmt(worst);
    }
    return {ok, detail};
}

// 6: adjoint closed form for example2_stochastic with v = 0.
Outcome adjoint_closed_form() {
    const auto spec = builtin_problem("example2_stochastic");
    const TimeGrid grid(1.0, 100);
    const auto noise = NoiseBatch::generate(10000, grid, 1, 20240601);
    const auto mu = RelaxedControl::constant(100, dirac(0.0));
    const auto traj = simulate_relaxed(spec, mu, SingularControl::zero(100, 1), grid, noise);
    const auto fund = fundamental_solutions(spec, mu, traj, noise);
    const RegressionConfig reg{1};
    const auto bsde = adjoint_bsde(spec, mu, traj, noise, reg);
    const auto expl = adjoint_explicit(spec, mu, traj, fund, reg);
    double sp = 0.0, sP = 0.0, sa = 0.0;
    std::size_t count = 0;
    for (std::size_t path = 0; path < traj.paths(); ++path) {
        for (std::size_t j = 0; j <= 100; ++j) {
            const double rest = 1.0 - grid.time(j);
            // With v = 0 the state is the Brownian path itself.
            const double w = traj.at(path, j)(0);
            sp += std::pow(bsde.p.vec(path, j)(0) - 2.0 * w * rest, 2);
            sP += std::pow(bsde.P.vec(path, j)(0) - 2.0 * rest, 2);
            sa += std::pow(bsde.p.vec(path, j)(0) - expl.p.vec(path, j)(0), 2);
            ++count;
        }
    }
    const double rp = std::sqrt(sp / count), rP = std::sqrt(sP / count), ra = std::sqrt(sa / count);
    const bool ok = rp <= 5e-2 && rP <= 5e-2 && ra <= 5e-2;
    return {ok, "RMSE p " + fmt(rp) + ", RMSE P " + fmt(rP) + ", explicit vs bsde RMS " + fmt(ra)};
}

// 7: necessary conditions on example2_separated.
Outcome necessary_conditions() {
    const auto good = command("verify", named_config("example2_separated_mixture.json"), "c7_mixture");
    const auto good_report = good.read("report.json");
    const auto& gm = condition(good_report, "hamiltonian-minimality");
    const double fraction = gm.at("statistic").get<double>();
    const double gap = gm.at("detail").at("worst_gap").get<double>();
    const auto bad = command("verify", named_config("example2_separated_zero.json"), "c7_zero");
    const auto bad_report = bad.read("report.json");
    const auto& bm = condition(bad_report, "hamiltonian-minimality");
    const double bad_gap = bm.at("detail").at("worst_gap").get<double>();
    const bool ok = good.code == cli::kSuccess && fraction == 0.0 && gap <= 1e-9 &&
                    bad.code == cli::kVerificationFailed && !bm.at("passed").get<bool>() &&
                    std::abs(bad_gap - 1.0) <= 1e-9;
    return {ok, "mixture: exit " + std::to_string(good.code) + ", violation fraction " + fmt(fraction) + ", gap " +
                    fmt(gap) + "; u = 0: exit " + std::to_string(bad.code) + ", gap " + fmt(bad_gap)};
}

// 8: singular conditions on singular_block.
Outcome singular_conditions() {
    const auto zero_cfg = named_config("singular_block.json");
    const auto zero = command("verify", zero_cfg, "c8_zero");
    const auto zr = zero.read("report.json");
    bool ok = zero.code == cli::kSuccess && condition(zr, "nonnegativity").at("passed").get<bool>() &&
              condition(zr, "flat-off").at("passed").get<bool>();

    const auto inj_cfg = named_config("singular_block_injected.json");
    const auto inj = command("verify", inj_cfg, "c8_injected");
    const auto inj_report = inj.read("report.json");
    const auto& flat = condition(inj_report, "flat-off");
    ok = ok && !flat.at("passed").get<bool>();

    // Slack at the injection cell and a paired brute-force cost comparison.
    const auto& spec = *zero_cfg.problem;
    const auto grid = zero_cfg.grid();
    const auto noise = NoiseBatch::generate(zero_cfg.paths, grid, 1, zero_cfg.seed);
    const auto cand = cli::resolve_candidate(zero_cfg.candidate, zero_cfg);
    const auto other = cli::resolve_candidate(inj_cfg.candidate, inj_cfg);
    const auto traj = simulate_relaxed(spec, cand.measure, cand.singular, grid, noise);
    const auto adj = adjoint_bsde(spec, cand.measure, traj, noise, zero_cfg.regression);
    std::size_t cell = 0;
    for (std::size_t j = 0; j < grid.steps(); ++j) {
        if (other.singular.increment(0, j)(0) > 0.0) cell = j;
    }
    double min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < traj.paths(); ++p) {
        const double slack = spec.singular_cost(grid.time(cell))(0) +
                             (spec.singular_gain(grid.time(cell)).transpose() * adj.p.vec(p, cell + 1))(0);
        min_slack = std::min(min_slack, slack);
    }
    ok = ok && min_slack > zero_cfg.tolerances.slack;
    const auto base = path_cost_parts(spec, cand.measure, cand.singular, traj).total;
    const auto injected =
        path_cost_parts(spec, other.measure, other.singular,
                        simulate_relaxed(spec, other.measure, other.singular, grid, noise)).total;
    std::vector<double> diff(base.size());
    for (std::size_t p = 0; p < diff.size(); ++p) diff[p] = injected[p] - base[p];
    const auto e = estimate_mean(diff);
    const double kappa = spec.singular_cost(0.0)(0);
    ok = ok && e.mean >= kappa * 1.0 - 3.0 * e.std_error;
    return {ok, "zero: exit " + std::to_string(zero.code) + "; injected at cell " + std::to_string(cell) +
                    ": flat-off statistic " + fmt(flat.at("statistic").get<double>()) + ", min slack " +
                    fmt(min_slack) + ", cost gap " + fmt(e.mean) + " +- " + fmt(e.std_error)};
}

// 9: certified candidates are not beaten by random competitors.
Outcome certificate_soundness() {
    struct Case {
        std::string config;
        std::uint64_t seed;
    };
    bool ok = true;
    std::size_t certified = 0;
    std::string detail;
    for (const auto& c : std::vector<Case>{{"example1_chatter.json", 101},
                                           {"example2_separated_mixture.json", 102},
                                           {"singular_block.json", 103},
                                           {"example2_mixture.json", 104}}) {
        auto cfg = named_config(c.config);
        const auto run = command("certify", cfg, "c9_" + fs::path(c.config).stem().string());
        const bool cert = run.read("certificate.json").at("certified").get<bool>();
        detail += (detail.empty() ? "" : "; ") + fs::path(c.config).stem().string() + (cert ? " certified" : " not certified");
        if (!cert) continue;
        ++certified;

        const auto& spec = *cfg.problem;
        const auto grid = cfg.grid();
        const auto noise = NoiseBatch::generate(cfg.paths, grid, spec.dims().noise, cfg.seed);
        const auto cand = cli::resolve_candidate(cfg.candidate, cfg);
        const auto base = path_cost_parts(spec, cand.measure, cand.singular,
                                          simulate_relaxed(spec, cand.measure, cand.singular, grid, noise)).total;
        const auto& u1 = spec.u1_grid();
        std::mt19937_64 rng(c.seed);
        std::uniform_int_distribution<std::size_t> pick(0, u1.size() - 1), cell(0, grid.steps() - 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::size_t beaten = 0;
        double worst = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 200; ++k) {
            // Alternate strict and relaxed competitors; singular parts are random impulses.
            std::vector<DiscreteMeasure> cells;
            for (std::size_t j = 0; j < grid.steps(); ++j) {
                if (k % 2 == 0 || u1.size() == 1) {
                    cells.push_back(DiscreteMeasure::dirac(u1[pick(rng)]));
                } else {
                    const double w = unit(rng);
                    cells.push_back(DiscreteMeasure({u1[pick(rng)], u1[pick(rng)]}, {w, 1.0 - w}));
                }
            }
            const RelaxedControl q(1, grid.steps(), std::move(cells));
            SingularControl eta = SingularControl::zero(grid.steps(), spec.dims().singular);
            if (k % 4 >= 2) {
                Vector size = Vector::Constant(static_cast<Eigen::Index>(spec.dims().singular), unit(rng));
                eta = SingularControl::impulse(grid.steps(), cell(rng), size);
            }
            const auto cost = path_cost_parts(spec, q, eta, simulate_relaxed(spec, q, eta, grid, noise)).total;
            std::vector<double> diff(cost.size());
            for (std::size_t p = 0; p < diff.size(); ++p) diff[p] = cost[p] - base[p];
            const auto e = estimate_mean(diff);
            worst = std::min(worst, e.mean);
            if (e.mean < -3.0 * e.std_error - 1e-12) ++beaten;
        }
        ok = ok && beaten == 0;
        detail += " (" + std::to_string(beaten) + " of 200 competitors better, smallest gap " + fmt(worst) + ")";
    }
    ok = ok && certified > 0;
    return {ok, detail};
}

// 10: chattering stability on example2_stochastic.
Outcome chattering_stability() {
    Clock clock;
    auto j = config_json("example2_chatter.json");
    j["chatter"]["levels"] = {4, 64};
    const auto rows = command("chatter", config(j), "c10_chatter").read("chatter.json").at("rows");
    const double t = clock.seconds();
    const double g4 = rows.at(0).at("traj_gap").get<double>(), g64 = rows.at(1).at("traj_gap").get<double>();
    const bool ok = g64 * 4.0 <= g4 && t < 30.0;
    return {ok, "sup_t E|x_un - x_q|^2: n=4 " + fmt(g4) + ", n=64 " + fmt(g64) + " (factor " + fmt(g4 / g64) +
                    "); " + fmt(t) + " s"};
}

std::string slurp(const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// 11: reruns of the acceptance commands are byte identical.
Outcome reproducibility() {
    const std::vector<std::pair<std::string, std::string>> runs = {
        {"simulate", "example2_mixture.json"},        {"cost", "example1_switching.json"},
        {"cost", "example2_mixture.json"},            {"verify", "example2_separated_mixture.json"},
        {"verify", "example2_separated_zero.json"},   {"verify", "singular_block.json"},
        {"verify", "singular_block_injected.json"},   {"certify", "singular_block.json"},
        {"chatter", "example2_chatter.json"},         {"adjoint", "example2_mixture.json"}};
    bool ok = true;
    std::size_t files = 0;
    std::string mismatches;
    for (const auto& [cmd, cfg_name] : runs) {
        const auto tag = "c11_" + cmd + "_" + fs::path(cfg_name).stem().string();
        const auto a = command(cmd, named_config(cfg_name), tag + "_a");
        const auto b = command(cmd, named_config(cfg_name), tag + "_b");
        std::vector<std::string> names;
        const auto manifest = a.read("manifest.json");
        for (const auto& f : manifest.at("files")) names.push_back(f.get<std::string>());
        for (const auto& name : names) {
            ++files;
            if (slurp(a.dir / name) != slurp(b.dir / name)) {
                ok = false;
                mismatches += " " + cmd + "/" + name;
            }
        }
        ok = ok && a.code == b.code;
    }
    return {ok, std::to_string(runs.size()) + " command pairs, " + std::to_string(files) + " files compared" +
                    (mismatches.empty() ? "" : "; differing:" + mismatches)};
}

const std::map<int, std::pair<std::string, std::function<Outcome()>>>& criteria() {
    static const std::map<int, std::pair<std::string, std::function<Outcome()>>> table = {
        {1, {"example1 chattering bound", example1_chattering_bound}},
        {2, {"example1 relaxed optimum", example1_relaxed_optimum}},
        {3, {"example2 relaxed cost", example2_relaxed_cost}},
        {4, {"variational consistency", variational_consistency}},
        {5, {"duality identity", duality_identity}},
        {6, {"adjoint closed form", adjoint_closed_form}},
        {7, {"necessary conditions", necessary_conditions}},
        {8, {"singular conditions", singular_conditions}},
        {9, {"sufficiency soundness", certificate_soundness}},
        {10, {"chattering stability", chattering_stability}},
        {11, {"reproducibility", reproducibility}}};
    return table;
}

}  // namespace

int main(int argc, char** argv) {
    g_out = fs::temp_directory_path() / "stochpmp_acceptance";
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--out" && i + 1 < argc) {
            g_out = argv[++i];
        } else if (!arg.empty() && arg.find_first_not_of("0123456789") == std::string::npos) {
            const int id = std::stoi(arg);
            if (!criteria().count(id)) {
                std::cerr << "unknown criterion " << id << '\n';
                return 2;
            }
            selected.push_back(id);
        } else {
            std::cerr << "usage: acceptance [--out DIR] [criterion ...]\n";
            return 2;
        }
    }
    if (selected.empty()) {
        for (const auto& [id, entry] : criteria()) selected.push_back(id);
    }
    fs::create_directories(g_out);

    int failures = 0;
    for (int id : selected) {
        const auto& [name, fn] = criteria().at(id);
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.passed) ++failures;
        std::cout << (o.passed ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
    }
    return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
