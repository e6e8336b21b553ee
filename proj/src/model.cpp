#include "stochpmp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "stochpmp/error.hpp"

namespace stochpmp {

namespace {

void require_count(const std::vector<Polynomial>& polys, std::size_t expected, const char* what) {
    if (polys.size() != expected) {
        throw ConfigError(std::string(what) + ": expected " + std::to_string(expected) +
                          " entries, got " + std::to_string(polys.size()));
    }
}

void require_vars(const Polynomial& p, const VariableLayout& layout, const char* what) {
    if (p.num_vars() != layout.size()) {
        throw ConfigError(std::string(what) + ": polynomial has " + std::to_string(p.num_vars()) +
                          " variables, expected " + std::to_string(layout.size()));
    }
}

void require_vars(const std::vector<Polynomial>& ps, const VariableLayout& layout, const char* what) {
    for (const auto& p : ps) {
        require_vars(p, layout, what);
    }
}

bool depends_on_state(const Polynomial& p, const VariableLayout& layout) {
    for (std::size_t i = 0; i < layout.state_dim; ++i) {
        if (p.depends_on(layout.state(i))) return true;
    }
    return false;
}

bool depends_on_control(const Polynomial& p, const VariableLayout& layout) {
    for (std::size_t j = 0; j < layout.control_dim; ++j) {
        if (p.depends_on(layout.control(j))) return true;
    }
    return false;
}

}  // namespace

ProblemSpec::ProblemSpec(std::string name, Dimensions dims, double horizon, Vector x0,
                         CoefficientForms forms, std::vector<Vector> u1_grid,
                         DeclaredGradients declared, AssumptionsBox box,
                         ConvexityDeclaration convexity)
    : name_(std::move(name)),
      dims_(dims),
      horizon_(horizon),
      x0_(std::move(x0)),
      forms_(std::move(forms)),
      u1_grid_(std::move(u1_grid)),
      declared_(std::move(declared)),
      box_(std::move(box)),
      convexity_(convexity) {
    if (dims_.state == 0 || dims_.noise == 0 || dims_.control == 0 || dims_.singular == 0) {
        throw ConfigError("all dimensions (n, d, k, m) must be positive");
    }
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) {
        throw ConfigError("horizon must be a positive finite number");
    }
    if (static_cast<std::size_t>(x0_.size()) != dims_.state) {
        throw ConfigError("x0 has dimension " + std::to_string(x0_.size()) + ", expected " +
                          std::to_string(dims_.state));
    }
    if (u1_grid_.empty()) {
        throw ConfigError("u1_grid must contain at least one point");
    }
    for (const auto& a : u1_grid_) {
        if (static_cast<std::size_t>(a.size()) != dims_.control) {
            throw ConfigError("u1_grid point has dimension " + std::to_string(a.size()) +
                              ", expected " + std::to_string(dims_.control));
        }
        if (!a.allFinite()) {
            throw ConfigError("u1_grid contains a non-finite point");
        }
    }

    const auto lay = layout();
    const std::size_t n = dims_.state;
    const std::size_t d = dims_.noise;
    const std::size_t m = dims_.singular;
    require_count(forms_.drift, n, "drift");
    require_count(forms_.diffusion, n * d, "diffusion");
    require_count(forms_.singular_gain, n * m, "singular_gain");
    require_count(forms_.singular_cost, m, "singular_cost");
    require_vars(forms_.drift, lay, "drift");
    require_vars(forms_.diffusion, lay, "diffusion");
    require_vars(forms_.singular_gain, lay, "singular_gain");
    require_vars(forms_.singular_cost, lay, "singular_cost");
    require_vars(forms_.running_cost, lay, "running_cost");
    require_vars(forms_.terminal_cost, lay, "terminal_cost");

    for (const auto& p : forms_.singular_gain) {
        if (depends_on_state(p, lay) || depends_on_control(p, lay)) {
            throw ConfigError("singular_gain may depend on t only");
        }
    }
    for (const auto& p : forms_.singular_cost) {
        if (depends_on_state(p, lay) || depends_on_control(p, lay)) {
            throw ConfigError("singular_cost may depend on t only");
        }
    }
    if (forms_.terminal_cost.depends_on(VariableLayout::time()) ||
        depends_on_control(forms_.terminal_cost, lay)) {
        throw ConfigError("terminal_cost may depend on x only");
    }

    if (box_.x_lo.empty() && box_.x_hi.empty()) {
        box_.x_lo.assign(n, -2.0);
        box_.x_hi.assign(n, 2.0);
    }
    if (box_.x_lo.size() != n || box_.x_hi.size() != n) {
        throw ConfigError("assumptions_box bounds must have state dimension");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(box_.x_lo[i] <= box_.x_hi[i])) {
            throw ConfigError("assumptions_box has x_lo > x_hi");
        }
    }
    if (box_.samples == 0 || !(box_.bound > 0.0)) {
        throw ConfigError("assumptions_box needs positive samples and bound");
    }

    deterministic_ = std::all_of(forms_.diffusion.begin(), forms_.diffusion.end(),
                                 [](const Polynomial& p) { return p.is_zero(); });

    if (declared_.drift_x) {
        require_count(*declared_.drift_x, n * n, "gradients.drift_x");
        require_vars(*declared_.drift_x, lay, "gradients.drift_x");
        drift_x_ = *declared_.drift_x;
    } else {
        drift_x_.reserve(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t l = 0; l < n; ++l) {
                drift_x_.push_back(forms_.drift[i].derivative(lay.state(l)));
            }
        }
    }
    if (declared_.diffusion_x) {
        require_count(*declared_.diffusion_x, d * n * n, "gradients.diffusion_x");
        require_vars(*declared_.diffusion_x, lay, "gradients.diffusion_x");
        diffusion_x_ = *declared_.diffusion_x;
    } else {
        diffusion_x_.reserve(d * n * n);
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t l = 0; l < n; ++l) {
                    diffusion_x_.push_back(forms_.diffusion[i * d + j].derivative(lay.state(l)));
                }
            }
        }
    }
    if (declared_.running_cost_x) {
        require_count(*declared_.running_cost_x, n, "gradients.running_cost_x");
        require_vars(*declared_.running_cost_x, lay, "gradients.running_cost_x");
        running_cost_x_ = *declared_.running_cost_x;
    } else {
        for (std::size_t l = 0; l < n; ++l) {
            running_cost_x_.push_back(forms_.running_cost.derivative(lay.state(l)));
        }
    }
    if (declared_.terminal_cost_x) {
        require_count(*declared_.terminal_cost_x, n, "gradients.terminal_cost_x");
        require_vars(*declared_.terminal_cost_x, lay, "gradients.terminal_cost_x");
        terminal_cost_x_ = *declared_.terminal_cost_x;
    } else {
        for (std::size_t l = 0; l < n; ++l) {
            terminal_cost_x_.push_back(forms_.terminal_cost.derivative(lay.state(l)));
        }
    }
}

std::vector<double> ProblemSpec::pack(double t, const Vector& x, const Vector& a) const {
    std::vector<double> vars(1 + dims_.state + dims_.control, 0.0);
    vars[0] = t;
    for (std::size_t i = 0; i < dims_.state; ++i) vars[1 + i] = x[static_cast<Eigen::Index>(i)];
    if (a.size() > 0) {
        for (std::size_t j = 0; j < dims_.control; ++j) {
            vars[1 + dims_.state + j] = a[static_cast<Eigen::Index>(j)];
        }
    }
    return vars;
}

Vector ProblemSpec::drift(double t, const Vector& x, const Vector& a) const {
    const auto vars = pack(t, x, a);
    Vector out(static_cast<Eigen::Index>(dims_.state));
    for (std::size_t i = 0; i < dims_.state; ++i) {
        out[static_cast<Eigen::Index>(i)] = forms_.drift[i].evaluate(vars);
    }
    return out;
}

Matrix ProblemSpec::diffusion(double t, const Vector& x, const Vector& a) const {
    const auto n = static_cast<Eigen::Index>(dims_.state);
    const auto d = static_cast<Eigen::Index>(dims_.noise);
    Matrix out = Matrix::Zero(n, d);
    if (deterministic_) {
        return out;
    }
    const auto vars = pack(t, x, a);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            out(i, j) = forms_.diffusion[static_cast<std::size_t>(i * d + j)].evaluate(vars);
        }
    }
    return out;
}

Matrix ProblemSpec::singular_gain(double t) const {
    const auto n = static_cast<Eigen::Index>(dims_.state);
    const auto m = static_cast<Eigen::Index>(dims_.singular);
    std::vector<double> vars(layout().size(), 0.0);
    vars[0] = t;
    Matrix out(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            out(i, j) = forms_.singular_gain[static_cast<std::size_t>(i * m + j)].evaluate(vars);
        }
    }
    return out;
}

double ProblemSpec::running_cost(double t, const Vector& x, const Vector& a) const {
    return forms_.running_cost.evaluate(pack(t, x, a));
}

double ProblemSpec::terminal_cost(const Vector& x) const {
    return forms_.terminal_cost.evaluate(pack(0.0, x, Vector()));
}

Vector ProblemSpec::singular_cost(double t) const {
    std::vector<double> vars(layout().size(), 0.0);
    vars[0] = t;
    Vector out(static_cast<Eigen::Index>(dims_.singular));
    for (std::size_t i = 0; i < dims_.singular; ++i) {
        out[static_cast<Eigen::Index>(i)] = forms_.singular_cost[i].evaluate(vars);
    }
    return out;
}

Matrix ProblemSpec::drift_x(double t, const Vector& x, const Vector& a) const {
    const auto n = static_cast<Eigen::Index>(dims_.state);
    const auto vars = pack(t, x, a);
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index l = 0; l < n; ++l) {
            out(i, l) = drift_x_[static_cast<std::size_t>(i * n + l)].evaluate(vars);
        }
    }
    return out;
}

std::vector<Matrix> ProblemSpec::diffusion_x(double t, const Vector& x, const Vector& a) const {
    const auto n = static_cast<Eigen::Index>(dims_.state);
    std::vector<Matrix> out(dims_.noise, Matrix::Zero(n, n));
    if (deterministic_ && !declared_.diffusion_x) {
        return out;
    }
    const auto vars = pack(t, x, a);
    for (std::size_t j = 0; j < dims_.noise; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index l = 0; l < n; ++l) {
                const auto idx = j * static_cast<std::size_t>(n * n) + static_cast<std::size_t>(i * n + l);
                out[j](i, l) = diffusion_x_[idx].evaluate(vars);
            }
        }
    }
    return out;
}

Vector ProblemSpec::running_cost_x(double t, const Vector& x, const Vector& a) const {
    const auto vars = pack(t, x, a);
    Vector out(static_cast<Eigen::Index>(dims_.state));
    for (std::size_t l = 0; l < dims_.state; ++l) {
        out[static_cast<Eigen::Index>(l)] = running_cost_x_[l].evaluate(vars);
    }
    return out;
}

Vector ProblemSpec::terminal_cost_x(const Vector& x) const {
    const auto vars = pack(0.0, x, Vector());
    Vector out(static_cast<Eigen::Index>(dims_.state));
    for (std::size_t l = 0; l < dims_.state; ++l) {
        out[static_cast<Eigen::Index>(l)] = terminal_cost_x_[l].evaluate(vars);
    }
    return out;
}

std::optional<std::size_t> ProblemSpec::grid_index(const Vector& a, double tol) const {
    if (static_cast<std::size_t>(a.size()) != dims_.control) {
        return std::nullopt;
    }
    for (std::size_t i = 0; i < u1_grid_.size(); ++i) {
        if ((u1_grid_[i] - a).cwiseAbs().maxCoeff() <= tol) {
            return i;
        }
    }
    return std::nullopt;
}

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw ConfigError("time grid horizon must be positive");
    }
    if (steps == 0) {
        throw ConfigError("time grid needs at least one step");
    }
}

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
    // splitmix64 finalizer over a golden-ratio stride
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (path + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

NoiseBatch NoiseBatch::generate(std::size_t paths, const TimeGrid& grid, std::size_t dim,
                                std::uint64_t seed) {
    if (paths == 0 || dim == 0) {
        throw ConfigError("noise batch needs positive path count and dimension");
    }
    NoiseBatch batch;
    batch.paths_ = paths;
    batch.steps_ = grid.steps();
    batch.dim_ = dim;
    batch.seed_ = seed;
    batch.dt_ = grid.dt();
    batch.increments_.resize(paths * grid.steps() * dim);
    const double sd = std::sqrt(grid.dt());
    for (std::size_t p = 0; p < paths; ++p) {
        std::mt19937_64 rng(path_seed(seed, p));
        std::normal_distribution<double> normal(0.0, sd);
        double* out = batch.increments_.data() + p * grid.steps() * dim;
        for (std::size_t i = 0; i < grid.steps() * dim; ++i) {
            out[i] = normal(rng);
        }
    }
    return batch;
}

bool ValidationReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
}

std::vector<std::string> ValidationReport::failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks) {
        if (!c.passed) out.push_back(c.name);
    }
    return out;
}

namespace {

struct ProbePoint {
    double t;
    Vector x;
    Vector a;
};

std::string describe(const ProbePoint& p) {
    std::ostringstream os;
    os << "t=" << p.t << " x=[" << p.x.transpose() << "] a=[" << p.a.transpose() << "]";
    return os.str();
}

void require_finite(double v, const char* fn, const ProbePoint& p) {
    if (!std::isfinite(v)) {
        throw NumericalError(std::string("non-finite value of ") + fn + " at " + describe(p));
    }
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* fn, const ProbePoint& p) {
    if (!v.allFinite()) {
        throw NumericalError(std::string("non-finite value of ") + fn + " at " + describe(p));
    }
}

constexpr double kGradientRelTol = 1e-4;

double rel_error(double fd, double declared) {
    return std::abs(fd - declared) / std::max(1.0, std::abs(fd));
}

}  // namespace

ValidationReport validate_problem(const ProblemSpec& spec) {
    const auto& dims = spec.dims();
    const auto& box = spec.box();
    const auto n = static_cast<Eigen::Index>(dims.state);
    std::mt19937_64 rng(box.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, spec.u1_grid().size() - 1);

    std::vector<ProbePoint> probes;
    probes.reserve(box.samples);
    for (std::size_t s = 0; s < box.samples; ++s) {
        ProbePoint p;
        p.t = spec.horizon() * unit(rng);
        p.x.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            p.x[i] = box.x_lo[ui] + (box.x_hi[ui] - box.x_lo[ui]) * unit(rng);
        }
        p.a = spec.u1_grid()[pick(rng)];
        probes.push_back(std::move(p));
    }

    ValidationReport report;
    report.checks.push_back({"u1_grid_nonempty", !spec.u1_grid().empty(),
                             static_cast<double>(spec.u1_grid().size()), 1.0, ""});

    // k(t) >= 0 at the probe times and both endpoints.
    {
        double worst = std::numeric_limits<double>::infinity();
        std::vector<double> times{0.0, spec.horizon()};
        for (const auto& p : probes) times.push_back(p.t);
        for (double t : times) {
            const Vector k = spec.singular_cost(t);
            require_finite(k, "singular_cost", ProbePoint{t, Vector::Zero(n), Vector()});
            worst = std::min(worst, k.minCoeff());
        }
        report.checks.push_back({"singular_cost_nonnegative", worst >= 0.0, worst, 0.0,
                                 "min_i k_i(t) over sampled t"});
    }

    // Declared (or derived) gradients against central differences.
    double err_bx = 0.0, err_sx = 0.0, err_hx = 0.0, err_gx = 0.0;
    double grow_b = 0.0, grow_s = 0.0, grad_sup = 0.0, gain_sup = 0.0;
    for (const auto& p : probes) {
        const Vector b = spec.drift(p.t, p.x, p.a);
        const Matrix s = spec.diffusion(p.t, p.x, p.a);
        const double h = spec.running_cost(p.t, p.x, p.a);
        const double g = spec.terminal_cost(p.x);
        const Matrix G = spec.singular_gain(p.t);
        require_finite(b, "drift", p);
        require_finite(s, "diffusion", p);
        require_finite(h, "running_cost", p);
        require_finite(g, "terminal_cost", p);
        require_finite(G, "singular_gain", p);

        const Matrix bx = spec.drift_x(p.t, p.x, p.a);
        const auto sx = spec.diffusion_x(p.t, p.x, p.a);
        const Vector hx = spec.running_cost_x(p.t, p.x, p.a);
        const Vector gx = spec.terminal_cost_x(p.x);
        require_finite(bx, "drift_x", p);
        for (const auto& m : sx) require_finite(m, "diffusion_x", p);
        require_finite(hx, "running_cost_x", p);
        require_finite(gx, "terminal_cost_x", p);

        for (Eigen::Index l = 0; l < n; ++l) {
            const double step = 1e-5 * std::max(1.0, std::abs(p.x[l]));
            Vector xp = p.x, xm = p.x;
            xp[l] += step;
            xm[l] -= step;
            const double width = xp[l] - xm[l];
            const Vector db = (spec.drift(p.t, xp, p.a) - spec.drift(p.t, xm, p.a)) / width;
            const Matrix ds = (spec.diffusion(p.t, xp, p.a) - spec.diffusion(p.t, xm, p.a)) / width;
            const double dh = (spec.running_cost(p.t, xp, p.a) - spec.running_cost(p.t, xm, p.a)) / width;
            const double dg = (spec.terminal_cost(xp) - spec.terminal_cost(xm)) / width;
            for (Eigen::Index i = 0; i < n; ++i) {
                err_bx = std::max(err_bx, rel_error(db[i], bx(i, l)));
                for (std::size_t j = 0; j < dims.noise; ++j) {
                    err_sx = std::max(err_sx, rel_error(ds(i, static_cast<Eigen::Index>(j)), sx[j](i, l)));
                }
            }
            err_hx = std::max(err_hx, rel_error(dh, hx[l]));
            err_gx = std::max(err_gx, rel_error(dg, gx[l]));
        }

        const double scale = 1.0 + p.x.norm() + p.a.norm();
        grow_b = std::max(grow_b, b.norm() / scale);
        grow_s = std::max(grow_s, s.norm() / scale);
        double gsup = bx.norm();
        for (const auto& m : sx) gsup = std::max(gsup, m.norm());
        gsup = std::max({gsup, hx.norm(), gx.norm()});
        grad_sup = std::max(grad_sup, gsup);
        gain_sup = std::max(gain_sup, G.norm());
    }
    auto grad_check = [&](const char* name, double err) {
        report.checks.push_back({std::string("gradient_consistency:") + name, err <= kGradientRelTol,
                                 err, kGradientRelTol, "max relative error vs central differences"});
    };
    grad_check("drift_x", err_bx);
    grad_check("diffusion_x", err_sx);
    grad_check("running_cost_x", err_hx);
    grad_check("terminal_cost_x", err_gx);

    report.checks.push_back({"boundedness:drift_linear_growth", grow_b <= box.bound, grow_b, box.bound,
                             "sup |b| / (1 + |x| + |a|) over the box"});
    report.checks.push_back({"boundedness:diffusion_linear_growth", grow_s <= box.bound, grow_s, box.bound,
                             "sup |sigma| / (1 + |x| + |a|) over the box"});
    report.checks.push_back({"boundedness:gradients", grad_sup <= box.bound, grad_sup, box.bound,
                             "sup of |b_x|, |sigma_x|, |h_x|, |g_x| over the box"});
    report.checks.push_back({"boundedness:singular_gain", gain_sup <= box.bound, gain_sup, box.bound,
                             "sup |G(t)| over sampled t"});
    return report;
}

}  // namespace stochpmp
