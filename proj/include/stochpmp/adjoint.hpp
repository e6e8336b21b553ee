#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "stochpmp/controls.hpp"
#include "stochpmp/path_array.hpp"
#include "stochpmp/regression.hpp"
#include "stochpmp/sde.hpp"
#include "stochpmp/stats.hpp"

namespace stochpmp {

enum class AdjointMethod { explicit_formula, bsde_regression };

std::string to_string(AdjointMethod m);

/// Adjoint processes on the grid: p is M x (N+1) x n, P is M x (N+1) x n x d.
/// The explicit route leaves P empty. P at t_N repeats the last estimated slice.
struct AdjointPair {
    PathArray p;
    PathArray P;
    AdjointMethod method = AdjointMethod::bsde_regression;
    RegressionDiagnostics diagnostics;

    bool has_P() const { return P.paths() > 0; }
};

struct AuxiliaryProcesses {
    PathArray alpha;   // M x (N+1) x n, alpha_j = Psi_j z_j
    PathArray X;       // M x 1 x n, Phi_N' g_x(x_N) + sum_j Phi_j' hbar_x dt
    PathArray Y;       // M x (N+1) x n, Y_j = Phi_j' p_j
    PathArray Q;       // M x N x n x d, martingale integrand of Y
    PathArray P_repr;  // M x (N+1) x n x d, Psi' Q - sum over mu of sigma_x' p
    RegressionDiagnostics diagnostics;
};

struct DualityResidual {
    double lhs = 0.0;        // mean alpha_N . Y_N
    double rhs = 0.0;        // mean g_x(x_N) . z_N
    double residual = 0.0;   // |lhs - rhs|
    double std_error = 0.0;  // SE of the paired difference
};

/// x-gradient of the relaxed Hamiltonian: int (h_x + b_x' p + sum_l sigma_x^l' P_l) dmu.
Vector hamiltonian_gradient(const ProblemSpec& spec, double t, const Vector& x, const DiscreteMeasure& mu,
                            const Vector& p, const Matrix& P);

/// p_j = E[Psi_j' Phi_N' g_x(x_N) + Psi_j' sum_{s >= j} Phi_s' hbar_x(s) dt | x_j] by regression;
/// p_N = g_x(x_N) exactly.
AdjointPair adjoint_explicit(const ProblemSpec& spec, const RelaxedControl& mu, const TrajectoryEnsemble& traj,
                             const FundamentalPair& fundamentals, const RegressionConfig& config);

/// Backward sweep on the linear BSDE. With c_j the fitted E[p_{j+1} | x_j],
/// P_j regresses (p_{j+1} - c_j) dW_j' / dt (same conditional mean as
/// p_{j+1} dW_j' / dt, far smaller variance) and p_j regresses
/// p_{j+1} + H_x(t_j, x_j, mu_j, p_{j+1}, P_j) dt.
AdjointPair adjoint_bsde(const ProblemSpec& spec, const RelaxedControl& mu, const TrajectoryEnsemble& traj,
                         const NoiseBatch& noise, const RegressionConfig& config);

/// alpha, X, Y, Q and the representation of P built from Q, using the p of
/// `explicit_adjoint`.
AuxiliaryProcesses auxiliary_processes(const ProblemSpec& spec, const RelaxedControl& mu,
                                       const TrajectoryEnsemble& traj, const FundamentalPair& fundamentals,
                                       const VariationalEnsemble& z, const AdjointPair& explicit_adjoint,
                                       const NoiseBatch& noise, const RegressionConfig& config);

/// |E[alpha_N . Y_N] - E[g_x(x_N) . z_N]| with Y_N = Phi_N' g_x(x_N).
DualityResidual duality_residual(const ProblemSpec& spec, const TrajectoryEnsemble& traj,
                                 const FundamentalPair& fundamentals, const VariationalEnsemble& z);

/// Monte Carlo estimate of
/// E sum_j [H(t_j, x_j, q_j, p_j, P_j) - H(t_j, x_j, mu_j, p_j, P_j)] dt
///   + E sum_j (k(t_j) + G(t_j)' p_{j+1}) . (d eta_j - d xi_j).
/// Missing P is treated as zero (valid when sigma does not depend on the control).
MeanEstimate variational_inequality_value(const ProblemSpec& spec, const RelaxedControl& mu,
                                          const SingularControl& xi, const RelaxedControl& q,
                                          const SingularControl& eta, const AdjointPair& adjoint,
                                          const TrajectoryEnsemble& traj);

/// Slice of an ensemble at grid point j as an M x (rows*cols) matrix.
Matrix slice(const PathArray& a, std::size_t j);

nlohmann::json to_json(const DualityResidual& r);

}  // namespace stochpmp
