#include "stochpmp/pmp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace stochpmp {

using nlohmann::json;

namespace {

bool lexicographically_less(const Vector& a, const Vector& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

std::string point_label(const Vector& a) {
    std::ostringstream os;
    os << "dirac[";
    for (Eigen::Index i = 0; i < a.size(); ++i) os << (i ? "," : "") << a(i);
    os << "]";
    return os.str();
}

Matrix adjoint_P(const ProblemSpec& spec, const AdjointPair& adjoint, std::size_t path, std::size_t j) {
    if (adjoint.has_P()) return adjoint.P.block(path, j);
    return Matrix::Zero(static_cast<Eigen::Index>(spec.dims().state), static_cast<Eigen::Index>(spec.dims().noise));
}

void check_candidate(const ProblemSpec& spec, const Candidate& c, const AdjointPair& adjoint,
                     const TrajectoryEnsemble& traj) {
    const std::size_t steps = traj.grid.steps();
    if (adjoint.p.paths() == 0) {
        throw ConfigError("verification needs an adjoint computed for the candidate");
    }
    if (!adjoint.p.same_shape(traj.states)) {
        throw ConfigError("adjoint was not computed on the candidate's trajectory");
    }
    if (c.measure.cells() != steps || c.singular.cells() != steps) {
        throw ConfigError("candidate controls must have one cell per grid step");
    }
    if (c.singular.dim() != spec.dims().singular) {
        throw ConfigError("candidate singular control dimension differs from m");
    }
}

std::vector<Vector> sample_box(const AssumptionsBox& box, std::size_t count, std::mt19937_64& rng) {
    std::vector<Vector> out(count, Vector(static_cast<Eigen::Index>(box.x_lo.size())));
    for (auto& x : out) {
        for (std::size_t i = 0; i < box.x_lo.size(); ++i) {
            x(static_cast<Eigen::Index>(i)) = std::uniform_real_distribution<double>(box.x_lo[i], box.x_hi[i])(rng);
        }
    }
    return out;
}

template <typename F>
void probe_midpoints(F&& f, const AssumptionsBox& box, std::size_t pairs, double tolerance, std::mt19937_64& rng,
                     ConvexityEvidence& ev) {
    const auto xs = sample_box(box, pairs, rng);
    const auto ys = sample_box(box, pairs, rng);
    for (std::size_t k = 0; k < pairs; ++k) {
        const double fx = f(k, xs[k]);
        const double fy = f(k, ys[k]);
        const double fm = f(k, Vector((xs[k] + ys[k]) / 2.0));
        const double excess = fm - 0.5 * (fx + fy);
        ev.worst_excess = std::max(ev.worst_excess, excess);
        if (excess > tolerance * (1.0 + std::abs(fx) + std::abs(fy))) ++ev.violations;
        ++ev.probes;
    }
}

}  // namespace

double hamiltonian_strict(const ProblemSpec& spec, double t, const Vector& x, const Vector& a, const Vector& p,
                          const Matrix& P) {
    const auto& dims = spec.dims();
    if (static_cast<std::size_t>(p.size()) != dims.state || static_cast<std::size_t>(P.rows()) != dims.state ||
        static_cast<std::size_t>(P.cols()) != dims.noise) {
        throw ConfigError("Hamiltonian adjoint arguments have the wrong dimensions");
    }
    // Hot path of every check: evaluate the forms directly from a stack buffer.
    constexpr std::size_t kInline = 32;
    const std::size_t nvars = spec.layout().size();
    std::array<double, kInline> inline_buf{};
    std::vector<double> heap_buf;
    double* vars = inline_buf.data();
    if (nvars > kInline) {
        heap_buf.resize(nvars);
        vars = heap_buf.data();
    }
    vars[0] = t;
    for (std::size_t i = 0; i < dims.state; ++i) vars[1 + i] = x(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < dims.control; ++j) vars[1 + dims.state + j] = a(static_cast<Eigen::Index>(j));
    const std::span<const double> v(vars, nvars);

    const auto& forms = spec.forms();
    double h = forms.running_cost.evaluate(v);
    for (std::size_t i = 0; i < dims.state; ++i) h += forms.drift[i].evaluate(v) * p(static_cast<Eigen::Index>(i));
    if (!spec.deterministic()) {
        for (std::size_t i = 0; i < dims.state; ++i) {
            for (std::size_t l = 0; l < dims.noise; ++l) {
                h += forms.diffusion[i * dims.noise + l].evaluate(v) *
                     P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
            }
        }
    }
    return h;
}

double hamiltonian_relaxed(const ProblemSpec& spec, double t, const Vector& x, const DiscreteMeasure& q,
                           const Vector& p, const Matrix& P) {
    return integrate(q, [&](const Vector& a) { return hamiltonian_strict(spec, t, x, a, p, P); });
}

HamiltonianMinimum minimize_hamiltonian(const ProblemSpec& spec, double t, const Vector& x, const Vector& p,
                                        const Matrix& P) {
    const auto& grid = spec.u1_grid();
    if (grid.empty()) {
        throw ConfigError("control grid is empty");
    }
    HamiltonianMinimum best{0, grid[0], hamiltonian_strict(spec, t, x, grid[0], p, P)};
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double v = hamiltonian_strict(spec, t, x, grid[i], p, P);
        if (v < best.value || (v == best.value && lexicographically_less(grid[i], best.point))) {
            best = {i, grid[i], v};
        }
    }
    return best;
}

std::vector<Direction> default_directions(const ProblemSpec& spec, const SingularControl& xi) {
    std::vector<Direction> out;
    const std::size_t cells = xi.cells();
    const auto& grid = spec.u1_grid();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out.push_back({point_label(grid[i]), RelaxedControl::constant(cells, DiscreteMeasure::dirac(grid[i])), xi, i});
    }
    std::vector<std::size_t> at_cells{0};
    if (cells / 2 != 0) at_cells.push_back(cells / 2);
    for (std::size_t i = 0; i < xi.dim(); ++i) {
        for (std::size_t c : at_cells) {
            auto inc = xi.increments();
            for (std::size_t path = 0; path < xi.paths(); ++path) inc[(path * cells + c) * xi.dim() + i] += 1.0;
            out.push_back({"impulse[" + std::to_string(i) + "@" + std::to_string(c) + "]", std::nullopt,
                           SingularControl(xi.paths(), cells, xi.dim(), std::move(inc)), std::nullopt});
        }
    }
    return out;
}

bool VerificationReport::passed() const {
    return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.passed; });
}

const ConditionRecord& VerificationReport::record(const std::string& id) const {
    for (const auto& r : records) {
        if (r.id == id) return r;
    }
    throw ConfigError("report has no condition '" + id + "'");
}

VerificationReport verify_necessary(const ProblemSpec& spec, const Candidate& candidate, const AdjointPair& adjoint,
                                    const TrajectoryEnsemble& traj, const Tolerances& tol,
                                    const std::vector<Direction>& directions) {
    check_candidate(spec, candidate, adjoint, traj);
    const std::size_t paths = traj.paths();
    const std::size_t steps = traj.grid.steps();
    const std::size_t m = spec.dims().singular;
    const double dt = traj.grid.dt();
    const auto& mu = candidate.measure;
    const auto& xi = candidate.singular;

    VerificationReport report;
    report.config = {{"grid", {{"steps", steps}, {"horizon", traj.grid.horizon()}}},
                     {"paths", paths},
                     {"seed", traj.noise_seed},
                     {"tolerances", to_json(tol)},
                     {"form", candidate.strict ? "strict" : "relaxed"},
                     {"adjoint", to_string(adjoint.method)}};

    // Pointwise minimality. The per-point grid values also give the value of
    // the minimizing direction and of every constant Dirac direction.
    const auto& grid = spec.u1_grid();
    if (grid.empty()) {
        throw ConfigError("control grid is empty");
    }
    std::size_t violating = 0;
    double worst_gap = 0.0;
    std::size_t worst_path = 0, worst_step = 0;
    std::vector<double> argmin_values(paths, 0.0);
    std::vector<double> dirac_values(paths * grid.size(), 0.0);
    std::vector<double> values(grid.size());
    for (std::size_t path = 0; path < paths; ++path) {
        for (std::size_t j = 0; j < steps; ++j) {
            const double t = traj.grid.time(j);
            const Vector x = traj.at(path, j);
            const Vector p = adjoint.p.vec(path, j);
            const Matrix P = adjoint_P(spec, adjoint, path, j);
            const double h = hamiltonian_relaxed(spec, t, x, mu.at(path, j), p, P);
            std::size_t best = 0;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                values[i] = hamiltonian_strict(spec, t, x, grid[i], p, P);
                if (i > 0 && (values[i] < values[best] ||
                              (values[i] == values[best] && lexicographically_less(grid[i], grid[best])))) {
                    best = i;
                }
                dirac_values[path * grid.size() + i] += (values[i] - h) * dt;
            }
            const double gap = h - values[best];
            if (gap > tol.hamiltonian * (1.0 + std::abs(h))) ++violating;
            if (gap > worst_gap || (path == 0 && j == 0)) {
                worst_gap = gap;
                worst_path = path;
                worst_step = j;
            }
            argmin_values[path] -= gap * dt;
        }
    }
    const double points = static_cast<double>(paths * steps);
    ConditionRecord minimality{"hamiltonian-minimality", static_cast<double>(violating) / points,
                               tol.violation_fraction, std::nullopt, false, json::object()};
    minimality.passed = minimality.statistic <= minimality.threshold;
    minimality.detail = {{"violating_points", violating},
                         {"points", paths * steps},
                         {"worst_gap", worst_gap},
                         {"worst_path", worst_path},
                         {"worst_step", worst_step}};
    report.records.push_back(std::move(minimality));

    // Singular slack k + G'p_{j+1} per cell.
    double min_slack = std::numeric_limits<double>::infinity();
    double worst_flat = 0.0;
    std::size_t worst_flat_path = 0;
    for (std::size_t path = 0; path < paths; ++path) {
        double flat = 0.0;
        for (std::size_t j = 0; j < steps; ++j) {
            const double t = traj.grid.time(j);
            const Vector slack = spec.singular_cost(t) + spec.singular_gain(t).transpose() * adjoint.p.vec(path, j + 1);
            const auto inc = xi.increment(path, j);
            for (std::size_t i = 0; i < m; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                min_slack = std::min(min_slack, slack(ii));
                if (slack(ii) > tol.slack) flat += inc(ii);
            }
        }
        if (flat > worst_flat) {
            worst_flat = flat;
            worst_flat_path = path;
        }
    }
    ConditionRecord nonneg{"nonnegativity", m == 0 ? 0.0 : min_slack, -tol.slack, std::nullopt, false, json::object()};
    nonneg.passed = m == 0 || min_slack >= -tol.slack;
    nonneg.detail = {{"components", m}};
    report.records.push_back(std::move(nonneg));

    ConditionRecord flat{"flat-off", worst_flat, tol.flat_off, std::nullopt, worst_flat <= tol.flat_off, json::object()};
    flat.detail = {{"worst_path", worst_flat_path}};
    report.records.push_back(std::move(flat));

    // Integral inequality over the sampled directions.
    json evaluated = json::array();
    const auto argmin = estimate_mean(argmin_values);
    double worst_value = argmin.mean;
    double worst_se = argmin.std_error;
    std::string worst_name = "pointwise-argmin";
    bool vi_passed = argmin.mean >= -(tol.vi_allowance + 3.0 * argmin.std_error);
    evaluated.push_back({{"direction", worst_name}, {"value", argmin.mean}, {"std_error", argmin.std_error}});
    std::vector<double> column(paths);
    for (const auto& dir : directions) {
        MeanEstimate v;
        if (dir.grid_point) {
            if (*dir.grid_point >= grid.size()) throw ConfigError("direction grid point out of range");
            for (std::size_t path = 0; path < paths; ++path) column[path] = dirac_values[path * grid.size() + *dir.grid_point];
            v = estimate_mean(column);
        } else {
            const auto& q = dir.measure ? *dir.measure : mu;
            v = variational_inequality_value(spec, mu, xi, q, dir.singular, adjoint, traj);
        }
        evaluated.push_back({{"direction", dir.name}, {"value", v.mean}, {"std_error", v.std_error}});
        if (v.mean < -(tol.vi_allowance + 3.0 * v.std_error)) vi_passed = false;
        if (v.mean < worst_value) {
            worst_value = v.mean;
            worst_se = v.std_error;
            worst_name = dir.name;
        }
    }
    ConditionRecord vi{"variational-inequality", worst_value, -(tol.vi_allowance + 3.0 * worst_se), worst_se,
                       vi_passed, json::object()};
    vi.detail = {{"worst_direction", worst_name}, {"directions", evaluated}};
    report.records.push_back(std::move(vi));
    return report;
}

SufficiencyCertificate certify_sufficient(const ProblemSpec& spec, const Candidate& candidate,
                                          const AdjointPair& adjoint, const TrajectoryEnsemble& traj,
                                          const Tolerances& tol, const std::vector<Direction>& directions,
                                          const ProbeConfig& probes) {
    SufficiencyCertificate cert;
    cert.conditions = verify_necessary(spec, candidate, adjoint, traj, tol, directions);
    std::mt19937_64 rng(spec.box().seed);

    cert.terminal.target = "terminal_cost";
    if (spec.convexity().terminal_cost) {
        cert.terminal.method = "declared";
    } else {
        cert.terminal.method = "midpoint-probe";
        probe_midpoints([&](std::size_t, const Vector& x) { return spec.terminal_cost(x); }, spec.box(), probes.pairs,
                        probes.tolerance, rng, cert.terminal);
    }
    cert.terminal.passed = cert.terminal.violations == 0;

    cert.hamiltonian.target = "hamiltonian";
    if (spec.convexity().hamiltonian) {
        cert.hamiltonian.method = "declared";
    } else {
        cert.hamiltonian.method = "midpoint-probe";
        const std::size_t paths = traj.paths();
        for (std::size_t j = 0; j < traj.grid.steps(); ++j) {
            const double t = traj.grid.time(j);
            // Pair k uses the adjoint of path (j + k) mod M so probes cover many adjoint values.
            probe_midpoints(
                [&](std::size_t k, const Vector& x) {
                    const std::size_t path = (j + k) % paths;
                    return hamiltonian_relaxed(spec, t, x, candidate.measure.at(path, j), adjoint.p.vec(path, j),
                                               adjoint_P(spec, adjoint, path, j));
                },
                spec.box(), probes.pairs, probes.tolerance, rng, cert.hamiltonian);
        }
    }
    cert.hamiltonian.passed = cert.hamiltonian.violations == 0;
    cert.certified = cert.terminal.passed && cert.hamiltonian.passed && cert.conditions.passed();
    return cert;
}

json to_json(const Tolerances& t) {
    return {{"tol_H", t.hamiltonian},
            {"violation_fraction", t.violation_fraction},
            {"tol_S", t.slack},
            {"tol_F", t.flat_off},
            {"vi_allowance", t.vi_allowance}};
}

Tolerances tolerances_from_json(const json& j, Tolerances out) {
    if (!j.is_object()) {
        throw ConfigError("tolerances must be an object");
    }
    auto read = [&](const char* key, double& field) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number()) throw ConfigError(std::string("tolerance '") + key + "' must be a number");
        field = j.at(key).get<double>();
        if (!(field > 0.0) || !std::isfinite(field)) {
            throw ConfigError(std::string("tolerance '") + key + "' must be positive");
        }
    };
    read("tol_H", out.hamiltonian);
    read("violation_fraction", out.violation_fraction);
    read("tol_S", out.slack);
    read("tol_F", out.flat_off);
    read("vi_allowance", out.vi_allowance);
    for (const auto& [key, value] : j.items()) {
        if (key != "tol_H" && key != "violation_fraction" && key != "tol_S" && key != "tol_F" && key != "vi_allowance") {
            throw ConfigError("unknown tolerance '" + key + "'");
        }
    }
    return out;
}

json to_json(const ConditionRecord& r) {
    json out = {{"id", r.id},
                {"statistic", r.statistic},
                {"threshold", r.threshold},
                {"passed", r.passed},
                {"detail", r.detail}};
    out["std_error"] = r.std_error ? json(*r.std_error) : json(nullptr);
    return out;
}

json to_json(const VerificationReport& r) {
    json records = json::array();
    for (const auto& rec : r.records) records.push_back(to_json(rec));
    return {{"passed", r.passed()}, {"conditions", records}, {"config", r.config}};
}

json to_json(const ConvexityEvidence& e) {
    return {{"target", e.target},         {"method", e.method},
            {"probes", e.probes},         {"violations", e.violations},
            {"worst_excess", e.worst_excess}, {"passed", e.passed}};
}

json to_json(const SufficiencyCertificate& c) {
    return {{"certified", c.certified},
            {"convexity", {to_json(c.terminal), to_json(c.hamiltonian)}},
            {"conditions", to_json(c.conditions)}};
}

}  // namespace stochpmp
