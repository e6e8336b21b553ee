#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stochpmp/controls.hpp"
#include "stochpmp/model.hpp"
#include "stochpmp/path_array.hpp"
#include "stochpmp/stats.hpp"

namespace stochpmp {

/// Simulated states x[path][j], j = 0..N, with the grid and noise seed that
/// produced them.
struct TrajectoryEnsemble {
    PathArray states;  // M x (N+1) x n
    TimeGrid grid;
    std::uint64_t noise_seed = 0;
    std::string provenance;

    std::size_t paths() const { return states.paths(); }
    Eigen::Map<const Vector> at(std::size_t path, std::size_t j) const { return states.vec(path, j); }
};

/// First-order sensitivity z of the state to a convex control perturbation.
struct VariationalEnsemble {
    PathArray z;  // M x (N+1) x n, z[.][0] = 0
};

/// Fundamental solution Phi of the linearized state equation and its
/// inverse Psi, each M x (N+1) x n x n with Phi_0 = Psi_0 = I.
struct FundamentalPair {
    PathArray phi;
    PathArray psi;

    /// max over paths and grid points of |Psi_t Phi_t - I| (Frobenius).
    double max_inverse_defect() const;
    /// max over paths of sup_t (|Phi_t|^2 + |Psi_t|^2).
    double sup_square_norm() const;
};

/// Euler-Maruyama for the strict dynamics
/// x_{j+1} = x_j + b(t_j, x_j, v_j) dt + sigma(t_j, x_j, v_j) dW_j + G(t_j) d eta_j.
/// Throws NumericalError naming path and step on a non-finite state.
TrajectoryEnsemble simulate_strict(const ProblemSpec& spec, const StrictControl& v, const SingularControl& eta,
                                   const TimeGrid& grid, const NoiseBatch& noise);

/// Same scheme with b and sigma averaged against q_j. A Dirac embedding of v
/// reproduces simulate_strict(v) bit for bit.
TrajectoryEnsemble simulate_relaxed(const ProblemSpec& spec, const RelaxedControl& q, const SingularControl& eta,
                                    const TimeGrid& grid, const NoiseBatch& noise);

/// Euler scheme for the variational equation along `base` (simulated under
/// (mu, xi) with the same noise), perturbation direction (q, eta):
/// dz = [int b_x dmu] z dt + [int b dq - int b dmu] dt
///      + sum_l ([int sigma_x^l dmu] z + int sigma^l dq - int sigma^l dmu) dW^l + G d(eta - xi).
VariationalEnsemble simulate_variational(const ProblemSpec& spec, const RelaxedControl& mu,
                                         const SingularControl& xi, const RelaxedControl& q,
                                         const SingularControl& eta, const TrajectoryEnsemble& base,
                                         const NoiseBatch& noise);

/// Euler-Maruyama for Phi and for its inverse Psi along `base`, with
/// A = int b_x dmu, B_l = int sigma_x^l dmu:
/// dPhi = A Phi dt + sum_l B_l Phi dW^l,
/// dPsi = Psi (sum_l B_l B_l - A) dt - sum_l Psi B_l dW^l.
/// The inverse property is monitored, never enforced.
FundamentalPair fundamental_solutions(const ProblemSpec& spec, const RelaxedControl& mu,
                                      const TrajectoryEnsemble& base, const NoiseBatch& noise);

/// Per-path cost split into terminal g(x_N), running sum_j hbar(t_j, x_j, q_j) dt
/// and singular sum_j k(t_j) . d eta_j parts; total adds them in that order.
struct CostParts {
    std::vector<double> terminal;
    std::vector<double> running;
    std::vector<double> singular;
    std::vector<double> total;
};
CostParts path_cost_parts(const ProblemSpec& spec, const RelaxedControl& q, const SingularControl& eta,
                          const TrajectoryEnsemble& traj);

/// Per-path realized cost, the `total` of path_cost_parts.
std::vector<double> path_costs(const ProblemSpec& spec, const RelaxedControl& q, const SingularControl& eta,
                               const TrajectoryEnsemble& traj);

/// Simulate and estimate the relaxed cost with its Monte Carlo error.
MeanEstimate estimate_cost(const ProblemSpec& spec, const RelaxedControl& q, const SingularControl& eta,
                           const TimeGrid& grid, const NoiseBatch& noise);
MeanEstimate estimate_cost(const ProblemSpec& spec, const StrictControl& v, const SingularControl& eta,
                           const TimeGrid& grid, const NoiseBatch& noise);

/// max_j (1/M) sum_paths |a_j - b_j|^2 over two ensembles on the same grid.
double sup_mean_square_gap(const PathArray& a, const PathArray& b);

/// max_j (1/M) sum_paths |(x^theta_j - x_j) / theta - z_j|^2.
double finite_difference_gap(const TrajectoryEnsemble& perturbed, const TrajectoryEnsemble& base,
                             const VariationalEnsemble& z, double theta);

struct ChatterRow {
    std::size_t windows = 0;
    double traj_gap = 0.0;  // sup_j E|x^{u_n} - x^q|^2
    double cost_gap = 0.0;  // |J(u_n) - J(q)|
    double std_error = 0.0; // SE of the paired cost difference
};

/// For each window count n: u_n = chattering(q, n), simulated with the same
/// noise as q; reports the trajectory and cost gaps.
std::vector<ChatterRow> chattering_study(const ProblemSpec& spec, const RelaxedControl& q,
                                         const SingularControl& eta, const TimeGrid& grid,
                                         const NoiseBatch& noise, const std::vector<std::size_t>& levels);

}  // namespace stochpmp
