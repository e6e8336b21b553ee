#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "stochpmp/polynomial.hpp"

namespace stochpmp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Dimensions {
    std::size_t state = 1;     // n
    std::size_t noise = 1;     // d
    std::size_t control = 1;   // k
    std::size_t singular = 1;  // m
};

/// Region sampled by the assumption probes of validate_problem and by the
/// convexity probes of the sufficiency certificate.
struct AssumptionsBox {
    std::vector<double> x_lo;
    std::vector<double> x_hi;
    double bound = 1e6;
    std::size_t samples = 256;
    std::uint64_t seed = 7;
};

/// Convexity that a problem asserts by construction. Undeclared convexity is
/// probed numerically.
struct ConvexityDeclaration {
    bool terminal_cost = false;
    bool hamiltonian = false;
};

/// Coefficient polynomials over [t, x, a] (see VariableLayout). Matrices are
/// stored row-major.
struct CoefficientForms {
    std::vector<Polynomial> drift;          // n
    std::vector<Polynomial> diffusion;      // n x d
    std::vector<Polynomial> singular_gain;  // n x m, t only
    Polynomial running_cost;
    Polynomial terminal_cost;               // x only
    std::vector<Polynomial> singular_cost;  // m, t only
};

/// Explicitly supplied x-gradients. Anything left empty is derived exactly
/// from the coefficient polynomial.
struct DeclaredGradients {
    std::optional<std::vector<Polynomial>> drift_x;          // n x n, (i, l) = d b_i / d x_l
    std::optional<std::vector<Polynomial>> diffusion_x;      // d blocks of n x n, [j](i, l) = d sigma_ij / d x_l
    std::optional<std::vector<Polynomial>> running_cost_x;   // n
    std::optional<std::vector<Polynomial>> terminal_cost_x;  // n
};

/// Controlled singular SDE problem: dynamics dx = b dt + sigma dW + G d eta,
/// cost E[g(x_T) + int h dt + int k d eta]. Immutable once constructed;
/// every evaluation is pure.
class ProblemSpec {
public:
    ProblemSpec(std::string name, Dimensions dims, double horizon, Vector x0,
                CoefficientForms forms, std::vector<Vector> u1_grid,
                DeclaredGradients declared = {}, AssumptionsBox box = {},
                ConvexityDeclaration convexity = {});

    const std::string& name() const { return name_; }
    const Dimensions& dims() const { return dims_; }
    double horizon() const { return horizon_; }
    const Vector& x0() const { return x0_; }
    const std::vector<Vector>& u1_grid() const { return u1_grid_; }
    const AssumptionsBox& box() const { return box_; }
    const ConvexityDeclaration& convexity() const { return convexity_; }
    const CoefficientForms& forms() const { return forms_; }
    const DeclaredGradients& declared() const { return declared_; }
    VariableLayout layout() const { return {dims_.state, dims_.control}; }

    /// True when the diffusion polynomial is identically zero.
    bool deterministic() const { return deterministic_; }

    Vector drift(double t, const Vector& x, const Vector& a) const;
    Matrix diffusion(double t, const Vector& x, const Vector& a) const;
    Matrix singular_gain(double t) const;
    double running_cost(double t, const Vector& x, const Vector& a) const;
    double terminal_cost(const Vector& x) const;
    Vector singular_cost(double t) const;

    Matrix drift_x(double t, const Vector& x, const Vector& a) const;
    /// One n x n matrix per noise column: [j](i, l) = d sigma_ij / d x_l.
    std::vector<Matrix> diffusion_x(double t, const Vector& x, const Vector& a) const;
    Vector running_cost_x(double t, const Vector& x, const Vector& a) const;
    Vector terminal_cost_x(const Vector& x) const;

    /// Index of `a` in the U1 grid, or nullopt when it is not a grid point.
    std::optional<std::size_t> grid_index(const Vector& a, double tol = 1e-12) const;

private:
    std::vector<double> pack(double t, const Vector& x, const Vector& a) const;

    std::string name_;
    Dimensions dims_;
    double horizon_;
    Vector x0_;
    CoefficientForms forms_;
    std::vector<Vector> u1_grid_;
    DeclaredGradients declared_;
    AssumptionsBox box_;
    ConvexityDeclaration convexity_;
    bool deterministic_ = false;

    std::vector<Polynomial> drift_x_;
    std::vector<Polynomial> diffusion_x_;
    std::vector<Polynomial> running_cost_x_;
    std::vector<Polynomial> terminal_cost_x_;
};

/// Uniform discretization t_j = j T / N of [0, T].
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps);

    double horizon() const { return horizon_; }
    std::size_t steps() const { return steps_; }
    double dt() const { return horizon_ / static_cast<double>(steps_); }
    double time(std::size_t j) const {
        return j == steps_ ? horizon_ : horizon_ * static_cast<double>(j) / static_cast<double>(steps_);
    }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double horizon_;
    std::size_t steps_;
};

/// Brownian increments, M paths x N steps x d components, each N(0, dt).
/// Path p draws from its own generator seeded by path_seed(seed, p), so a
/// batch is reproducible bit for bit and independent of evaluation order.
class NoiseBatch {
public:
    static NoiseBatch generate(std::size_t paths, const TimeGrid& grid, std::size_t dim,
                               std::uint64_t seed);

    std::size_t paths() const { return paths_; }
    std::size_t steps() const { return steps_; }
    std::size_t dim() const { return dim_; }
    std::uint64_t seed() const { return seed_; }
    double dt() const { return dt_; }

    std::span<const double> increment(std::size_t path, std::size_t step) const {
        return {increments_.data() + (path * steps_ + step) * dim_, dim_};
    }
    const std::vector<double>& raw() const { return increments_; }

private:
    std::size_t paths_ = 0;
    std::size_t steps_ = 0;
    std::size_t dim_ = 0;
    std::uint64_t seed_ = 0;
    double dt_ = 0.0;
    std::vector<double> increments_;
};

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path);

struct ValidationCheck {
    std::string name;
    bool passed = true;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool ok() const;
    std::vector<std::string> failures() const;
};

/// Probes the standing assumptions at random points of the assumptions box:
/// gradient consistency against central differences (relative tolerance
/// 1e-4), k >= 0, linear growth of b and sigma, bounded gradients and G.
/// Throws NumericalError on a non-finite coefficient value.
ValidationReport validate_problem(const ProblemSpec& spec);
nlohmann::json to_json(const ValidationReport& r);

struct BuiltinOptions {
    double kappa = 1.0;               // singular_block
    std::size_t u1_points = 21;       // example2_* grid over [-1, 1]
    double horizon = 1.0;
};

std::vector<std::string> builtin_problem_names();
ProblemSpec builtin_problem(const std::string& name, const BuiltinOptions& options = {});

nlohmann::json problem_to_json(const ProblemSpec& spec);
ProblemSpec problem_from_json(const nlohmann::json& j);
ProblemSpec load_problem_file(const std::string& path);

nlohmann::json polynomial_to_json(const Polynomial& p, const VariableLayout& layout);
Polynomial polynomial_from_json(const nlohmann::json& j, const VariableLayout& layout);

}  // namespace stochpmp
