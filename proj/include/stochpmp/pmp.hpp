#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochpmp/adjoint.hpp"
#include "stochpmp/controls.hpp"
#include "stochpmp/model.hpp"
#include "stochpmp/sde.hpp"

namespace stochpmp {

/// h + b.p + sigma:P (Frobenius pairing).
double hamiltonian_strict(const ProblemSpec& spec, double t, const Vector& x, const Vector& a, const Vector& p,
                          const Matrix& P);

/// Average of hamiltonian_strict against the measure; affine in the weights.
double hamiltonian_relaxed(const ProblemSpec& spec, double t, const Vector& x, const DiscreteMeasure& q,
                           const Vector& p, const Matrix& P);

struct HamiltonianMinimum {
    std::size_t index = 0;  // position in spec.u1_grid()
    Vector point;
    double value = 0.0;
};

/// Exhaustive minimum over the control grid. Since the relaxed Hamiltonian
/// is affine in the measure, this is also the infimum over all measures on
/// the grid. Ties go to the lexicographically smallest point.
HamiltonianMinimum minimize_hamiltonian(const ProblemSpec& spec, double t, const Vector& x, const Vector& p,
                                        const Matrix& P);

struct Tolerances {
    double hamiltonian = 1e-3;         // gap allowed at a point: hamiltonian * (1 + |H|)
    double violation_fraction = 0.01;  // share of (path, step) points allowed above that
    double slack = 1e-3;               // tol_S
    double flat_off = 1e-9;            // tol_F
    double vi_allowance = 1e-3;        // discretization allowance for the integral inequality
};

/// Candidate pair. `strict` only selects the labels used in reports; a
/// strict control is carried as its Dirac embedding.
struct Candidate {
    RelaxedControl measure;
    SingularControl singular;
    bool strict = false;
};

/// Perturbation direction for the integral variational inequality.
struct Direction {
    std::string name;
    std::optional<RelaxedControl> measure;  // empty keeps the candidate's measure
    SingularControl singular;
    // Set when the direction is the constant Dirac at this control-grid point
    // with the candidate's singular part; such directions are evaluated from
    // the Hamiltonian values already computed for the minimality check.
    std::optional<std::size_t> grid_point;
};

/// Constant Dirac directions at every control grid point and unit impulses in
/// each singular component at the first and middle cell, added on top of xi.
std::vector<Direction> default_directions(const ProblemSpec& spec, const SingularControl& xi);

struct ConditionRecord {
    std::string id;
    double statistic = 0.0;
    double threshold = 0.0;
    std::optional<double> std_error;
    bool passed = false;
    nlohmann::json detail = nlohmann::json::object();
};

struct VerificationReport {
    std::vector<ConditionRecord> records;
    nlohmann::json config = nlohmann::json::object();

    bool passed() const;
    const ConditionRecord& record(const std::string& id) const;
};

/// Checks pointwise Hamiltonian minimality, nonnegativity of k + G'p, the
/// flat-off condition on xi, and the integral variational inequality over
/// the pointwise-minimizing direction plus `directions`. The Hamiltonian
/// uses (p_j, P_j) on cell j; the singular slack on cell j uses p_{j+1}
/// because the increment of cell j acts at its right end.
VerificationReport verify_necessary(const ProblemSpec& spec, const Candidate& candidate, const AdjointPair& adjoint,
                                    const TrajectoryEnsemble& traj, const Tolerances& tol,
                                    const std::vector<Direction>& directions = {});

struct ConvexityEvidence {
    std::string target;  // "terminal_cost" | "hamiltonian"
    std::string method;  // "declared" | "midpoint-probe"
    std::size_t probes = 0;
    std::size_t violations = 0;
    double worst_excess = 0.0;
    bool passed = false;
};

struct ProbeConfig {
    std::size_t pairs = 1000;     // per probed function (per time slice for the Hamiltonian)
    double tolerance = 1e-9;      // relative to 1 + |f(x)| + |f(x')|
};

struct SufficiencyCertificate {
    ConvexityEvidence terminal;
    ConvexityEvidence hamiltonian;
    VerificationReport conditions;
    bool certified = false;
};

/// certified iff g and x -> H(t, x, mu_t, p_t, P_t) pass convexity (declared
/// or midpoint probes over the assumptions box) and every necessary condition
/// passes.
SufficiencyCertificate certify_sufficient(const ProblemSpec& spec, const Candidate& candidate,
                                          const AdjointPair& adjoint, const TrajectoryEnsemble& traj,
                                          const Tolerances& tol, const std::vector<Direction>& directions = {},
                                          const ProbeConfig& probes = {});

nlohmann::json to_json(const Tolerances& t);
Tolerances tolerances_from_json(const nlohmann::json& j, Tolerances defaults = {});
nlohmann::json to_json(const ConditionRecord& r);
nlohmann::json to_json(const VerificationReport& r);
nlohmann::json to_json(const ConvexityEvidence& e);
nlohmann::json to_json(const SufficiencyCertificate& c);

}  // namespace stochpmp
