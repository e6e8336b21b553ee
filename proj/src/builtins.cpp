#include <algorithm>
#include <sstream>

#include "stochpmp/error.hpp"
#include "stochpmp/model.hpp"

namespace stochpmp {

namespace {

constexpr VariableLayout kScalar{1, 1};

Polynomial zero() { return Polynomial::constant(kScalar.size(), 0.0); }
Polynomial constant(double c) { return Polynomial::constant(kScalar.size(), c); }
Polynomial x_var() { return Polynomial::variable(kScalar.size(), kScalar.state(0)); }
Polynomial a_var() { return Polynomial::variable(kScalar.size(), kScalar.control(0)); }

std::vector<Vector> scalar_grid(std::initializer_list<double> values) {
    std::vector<Vector> out;
    for (double v : values) out.push_back(Vector::Constant(1, v));
    return out;
}

std::vector<Vector> uniform_grid(std::size_t points) {
    if (points < 2) {
        throw ConfigError("example2 control grid needs at least 2 points");
    }
    std::vector<Vector> out;
    for (std::size_t i = 0; i < points; ++i) {
        const double v = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(points - 1);
        out.push_back(Vector::Constant(1, v));
    }
    return out;
}

// dx = a dt + sigma dW, cost  x^2 + (1 - a^2)^2
ProblemSpec example2(const std::string& name, double sigma, const BuiltinOptions& opt) {
    CoefficientForms f;
    f.drift = {a_var()};
    f.diffusion = {constant(sigma)};
    f.singular_gain = {zero()};
    const Polynomial one_minus_a2 = constant(1.0) + (-1.0) * (a_var() * a_var());
    f.running_cost = x_var() * x_var() + one_minus_a2 * one_minus_a2;
    f.terminal_cost = zero();
    f.singular_cost = {zero()};
    return ProblemSpec(name, {1, 1, 1, 1}, opt.horizon, Vector::Zero(1), std::move(f),
                       uniform_grid(opt.u1_points));
}

}  // namespace

std::vector<std::string> builtin_problem_names() {
    return {"example1", "example2_separated", "example2_stochastic", "singular_block"};
}

ProblemSpec builtin_problem(const std::string& name, const BuiltinOptions& opt) {
    if (name == "example1") {
        // dx = v dt, v in {-1, 1}, cost int x^2 dt
        CoefficientForms f;
        f.drift = {a_var()};
        f.diffusion = {zero()};
        f.singular_gain = {zero()};
        f.running_cost = x_var() * x_var();
        f.terminal_cost = zero();
        f.singular_cost = {zero()};
        return ProblemSpec(name, {1, 1, 1, 1}, opt.horizon, Vector::Zero(1), std::move(f),
                           scalar_grid({-1.0, 1.0}));
    }
    if (name == "example2_separated") {
        return example2(name, 0.0, opt);
    }
    if (name == "example2_stochastic") {
        return example2(name, 1.0, opt);
    }
    if (name == "singular_block") {
        if (!(opt.kappa > 0.0)) {
            throw ConfigError("singular_block needs kappa > 0");
        }
        // dx = 0.2 dW + d xi, x0 = 1, cost int x^2 dt + kappa xi_T; no absolutely continuous control
        CoefficientForms f;
        f.drift = {zero()};
        f.diffusion = {constant(0.2)};
        f.singular_gain = {constant(1.0)};
        f.running_cost = x_var() * x_var();
        f.terminal_cost = zero();
        f.singular_cost = {constant(opt.kappa)};
        return ProblemSpec(name, {1, 1, 1, 1}, opt.horizon, Vector::Constant(1, 1.0), std::move(f),
                           scalar_grid({0.0}));
    }
    std::ostringstream os;
    os << "unknown built-in problem '" << name << "'; available:";
    for (const auto& n : builtin_problem_names()) os << ' ' << n;
    throw ConfigError(os.str());
}

}  // namespace stochpmp
