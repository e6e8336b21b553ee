#include "stochpmp/sde.hpp"

#include <algorithm>
#include <cmath>

namespace stochpmp {

namespace {

void check_inputs(const ProblemSpec& spec, std::size_t control_paths, std::size_t control_cells,
                  const SingularControl& eta, const TimeGrid& grid, const NoiseBatch& noise) {
    const auto& dims = spec.dims();
    if (std::abs(grid.horizon() - spec.horizon()) > 1e-12 * spec.horizon()) {
        throw ConfigError("time grid horizon differs from the problem horizon");
    }
    if (noise.steps() != grid.steps() || std::abs(noise.dt() - grid.dt()) > 0.0) {
        throw ConfigError("noise batch was generated for a different time grid");
    }
    if (noise.dim() != dims.noise) {
        throw ConfigError("noise dimension " + std::to_string(noise.dim()) + " differs from d = " +
                          std::to_string(dims.noise));
    }
    if (control_cells != grid.steps() || eta.cells() != grid.steps()) {
        throw ConfigError("controls must have one cell per grid step (" + std::to_string(grid.steps()) + ")");
    }
    if (eta.dim() != dims.singular) {
        throw ConfigError("singular control dimension differs from m = " + std::to_string(dims.singular));
    }
    const std::size_t m = noise.paths();
    if ((control_paths != 1 && control_paths != m) || (eta.paths() != 1 && eta.paths() != m)) {
        throw ConfigError("per-path controls must match the noise path count " + std::to_string(m));
    }
}

void check_same_noise(const TrajectoryEnsemble& base, const NoiseBatch& noise) {
    if (base.noise_seed != noise.seed() || base.paths() != noise.paths() || base.grid.steps() != noise.steps()) {
        throw ConfigError("base trajectory was not simulated with this noise batch");
    }
}

void require_finite_state(const Eigen::Ref<const Vector>& x, std::size_t path, std::size_t step, const char* what) {
    if (!x.allFinite()) {
        throw NumericalError(std::string(what) + " blew up on path " + std::to_string(path) + " at step " +
                             std::to_string(step));
    }
}

// Shared Euler-Maruyama loop; `coeffs(path, j, t, x, b, s)` fills the drift
// and diffusion used on cell j.
template <typename Coefficients>
TrajectoryEnsemble euler_maruyama(const ProblemSpec& spec, const SingularControl& eta, const TimeGrid& grid,
                                  const NoiseBatch& noise, std::string provenance, Coefficients&& coeffs) {
    const std::size_t paths = noise.paths();
    const std::size_t steps = grid.steps();
    const auto n = static_cast<Eigen::Index>(spec.dims().state);
    const auto d = static_cast<Eigen::Index>(spec.dims().noise);
    TrajectoryEnsemble out{PathArray(paths, steps + 1, spec.dims().state), grid, noise.seed(), std::move(provenance)};
    const double dt = grid.dt();
    std::vector<Matrix> gains(steps);
    for (std::size_t j = 0; j < steps; ++j) gains[j] = spec.singular_gain(grid.time(j));

    Vector b(n);
    Matrix s(n, d);
    for (std::size_t p = 0; p < paths; ++p) {
        Vector x = spec.x0();
        out.states.vec(p, 0) = x;
        for (std::size_t j = 0; j < steps; ++j) {
            const double t = grid.time(j);
            coeffs(p, j, t, x, b, s);
            const auto dw = noise.increment(p, j);
            const Eigen::Map<const Vector> dW(dw.data(), d);
            x = x + b * dt + s * dW + gains[j] * eta.increment(p, j);
            require_finite_state(x, p, j, "state");
            out.states.vec(p, j + 1) = x;
        }
    }
    return out;
}

}  // namespace

TrajectoryEnsemble simulate_strict(const ProblemSpec& spec, const StrictControl& v, const SingularControl& eta,
                                   const TimeGrid& grid, const NoiseBatch& noise) {
    check_inputs(spec, v.paths(), v.cells(), eta, grid, noise);
    return euler_maruyama(spec, eta, grid, noise, "strict",
                          [&](std::size_t p, std::size_t j, double t, const Vector& x, Vector& b, Matrix& s) {
                              const Vector& a = v.at(p, j);
                              b = 1.0 * spec.drift(t, x, a);
                              s = 1.0 * spec.diffusion(t, x, a);
                          });
}

TrajectoryEnsemble simulate_relaxed(const ProblemSpec& spec, const RelaxedControl& q, const SingularControl& eta,
                                    const TimeGrid& grid, const NoiseBatch& noise) {
    check_inputs(spec, q.paths(), q.cells(), eta, grid, noise);
    return euler_maruyama(spec, eta, grid, noise, "relaxed",
                          [&](std::size_t p, std::size_t j, double t, const Vector& x, Vector& b, Matrix& s) {
                              const auto& mu = q.at(p, j);
                              b = integrate(mu, [&](const Vector& a) -> Vector { return spec.drift(t, x, a); });
                              s = integrate(mu, [&](const Vector& a) -> Matrix { return spec.diffusion(t, x, a); });
                          });
}

VariationalEnsemble simulate_variational(const ProblemSpec& spec, const RelaxedControl& mu,
                                         const SingularControl& xi, const RelaxedControl& q,
                                         const SingularControl& eta, const TrajectoryEnsemble& base,
                                         const NoiseBatch& noise) {
    const auto& grid = base.grid;
    check_inputs(spec, mu.paths(), mu.cells(), xi, grid, noise);
    check_inputs(spec, q.paths(), q.cells(), eta, grid, noise);
    check_same_noise(base, noise);

    const std::size_t paths = noise.paths();
    const std::size_t steps = grid.steps();
    const std::size_t nd = spec.dims().noise;
    const auto n = static_cast<Eigen::Index>(spec.dims().state);
    const double dt = grid.dt();
    VariationalEnsemble out{PathArray(paths, steps + 1, spec.dims().state)};

    for (std::size_t p = 0; p < paths; ++p) {
        Vector z = Vector::Zero(n);
        out.z.vec(p, 0) = z;
        for (std::size_t j = 0; j < steps; ++j) {
            const double t = grid.time(j);
            const Vector x = base.at(p, j);
            const auto& m = mu.at(p, j);
            const auto& dir = q.at(p, j);
            const Matrix A = integrate(m, [&](const Vector& a) -> Matrix { return spec.drift_x(t, x, a); });
            const Vector db = integrate(dir, [&](const Vector& a) -> Vector { return spec.drift(t, x, a); }) -
                              integrate(m, [&](const Vector& a) -> Vector { return spec.drift(t, x, a); });
            const Matrix ds = integrate(dir, [&](const Vector& a) -> Matrix { return spec.diffusion(t, x, a); }) -
                              integrate(m, [&](const Vector& a) -> Matrix { return spec.diffusion(t, x, a); });
            const auto dw = noise.increment(p, j);

            Vector next = z + A * z * dt + db * dt;
            for (std::size_t l = 0; l < nd; ++l) {
                const Matrix B = integrate(m, [&](const Vector& a) -> Matrix { return spec.diffusion_x(t, x, a)[l]; });
                next += (B * z + ds.col(static_cast<Eigen::Index>(l))) * dw[l];
            }
            next += spec.singular_gain(t) * (eta.increment(p, j) - xi.increment(p, j));
            require_finite_state(next, p, j, "variational process");
            z = next;
            out.z.vec(p, j + 1) = z;
        }
    }
    return out;
}

FundamentalPair fundamental_solutions(const ProblemSpec& spec, const RelaxedControl& mu,
                                      const TrajectoryEnsemble& base, const NoiseBatch& noise) {
    const auto& grid = base.grid;
    if (mu.cells() != grid.steps()) {
        throw ConfigError("relaxed control must have one cell per grid step");
    }
    check_same_noise(base, noise);
    const std::size_t paths = noise.paths();
    const std::size_t steps = grid.steps();
    const std::size_t nd = spec.dims().noise;
    const std::size_t n = spec.dims().state;
    const auto ni = static_cast<Eigen::Index>(n);
    const double dt = grid.dt();
    FundamentalPair out{PathArray(paths, steps + 1, n, n), PathArray(paths, steps + 1, n, n)};

    for (std::size_t p = 0; p < paths; ++p) {
        Matrix phi = Matrix::Identity(ni, ni);
        Matrix psi = Matrix::Identity(ni, ni);
        out.phi.block(p, 0) = phi;
        out.psi.block(p, 0) = psi;
        for (std::size_t j = 0; j < steps; ++j) {
            const double t = grid.time(j);
            const Vector x = base.at(p, j);
            const auto& m = mu.at(p, j);
            const Matrix A = integrate(m, [&](const Vector& a) -> Matrix { return spec.drift_x(t, x, a); });
            Matrix phi_next = phi + A * phi * dt;
            Matrix psi_drift = -A;
            Matrix psi_noise = Matrix::Zero(ni, ni);
            {
                const auto dw = noise.increment(p, j);
                const auto Bs = integrate(m, [&](const Vector& a) -> Matrix {
                    const auto sx = spec.diffusion_x(t, x, a);
                    Matrix stacked(ni * static_cast<Eigen::Index>(nd), ni);
                    for (std::size_t l = 0; l < nd; ++l) stacked.middleRows(static_cast<Eigen::Index>(l) * ni, ni) = sx[l];
                    return stacked;
                });
                for (std::size_t l = 0; l < nd; ++l) {
                    const Matrix B = Bs.middleRows(static_cast<Eigen::Index>(l) * ni, ni);
                    phi_next += B * phi * dw[l];
                    psi_drift += B * B;
                    psi_noise += B * dw[l];
                }
            }
            Matrix psi_next = psi + psi * psi_drift * dt - psi * psi_noise;
            if (!phi_next.allFinite() || !psi_next.allFinite()) {
                throw NumericalError("fundamental solution blew up on path " + std::to_string(p) + " at step " +
                                     std::to_string(j));
            }
            phi = std::move(phi_next);
            psi = std::move(psi_next);
            out.phi.block(p, j + 1) = phi;
            out.psi.block(p, j + 1) = psi;
        }
    }
    return out;
}

double FundamentalPair::max_inverse_defect() const {
    double worst = 0.0;
    const auto n = static_cast<Eigen::Index>(phi.rows());
    for (std::size_t p = 0; p < phi.paths(); ++p) {
        for (std::size_t j = 0; j < phi.points(); ++j) {
            const Matrix prod = Matrix(psi.block(p, j)) * Matrix(phi.block(p, j));
            worst = std::max(worst, (prod - Matrix::Identity(n, n)).norm());
        }
    }
    return worst;
}

double FundamentalPair::sup_square_norm() const {
    double worst = 0.0;
    for (std::size_t p = 0; p < phi.paths(); ++p) {
        double sup_phi = 0.0, sup_psi = 0.0;
        for (std::size_t j = 0; j < phi.points(); ++j) {
            sup_phi = std::max(sup_phi, phi.block(p, j).squaredNorm());
            sup_psi = std::max(sup_psi, psi.block(p, j).squaredNorm());
        }
        worst = std::max(worst, sup_phi + sup_psi);
    }
    return worst;
}

CostParts path_cost_parts(const ProblemSpec& spec, const RelaxedControl& q, const SingularControl& eta,
                          const TrajectoryEnsemble& traj) {
    const auto& grid = traj.grid;
    const std::size_t steps = grid.steps();
    if (q.cells() != steps || eta.cells() != steps) {
        throw ConfigError("controls must have one cell per grid step");
    }
    const double dt = grid.dt();
    std::vector<Vector> kvals(steps);
    for (std::size_t j = 0; j < steps; ++j) kvals[j] = spec.singular_cost(grid.time(j));
    const std::size_t paths = traj.paths();
    CostParts out{std::vector<double>(paths), std::vector<double>(paths), std::vector<double>(paths),
                  std::vector<double>(paths)};
    for (std::size_t p = 0; p < paths; ++p) {
        double running = 0.0;
        double singular = 0.0;
        for (std::size_t j = 0; j < steps; ++j) {
            const double t = grid.time(j);
            const Vector x = traj.at(p, j);
            running += integrate(q.at(p, j), [&](const Vector& a) { return spec.running_cost(t, x, a); }) * dt;
            singular += kvals[j].dot(eta.increment(p, j));
        }
        out.terminal[p] = spec.terminal_cost(traj.at(p, steps));
        out.running[p] = running;
        out.singular[p] = singular;
        out.total[p] = out.terminal[p] + running + singular;
        if (!std::isfinite(out.total[p])) {
            throw NumericalError("non-finite cost on path " + std::to_string(p));
        }
    }
    return out;
}

std::vector<double> path_costs(const ProblemSpec& spec, const RelaxedControl& q, const SingularControl& eta,
                               const TrajectoryEnsemble& traj) {
    return path_cost_parts(spec, q, eta, traj).total;
}

MeanEstimate estimate_cost(const ProblemSpec& spec, const RelaxedControl& q, const SingularControl& eta,
                           const TimeGrid& grid, const NoiseBatch& noise) {
    const auto traj = simulate_relaxed(spec, q, eta, grid, noise);
    const auto costs = path_costs(spec, q, eta, traj);
    return estimate_mean(costs);
}

MeanEstimate estimate_cost(const ProblemSpec& spec, const StrictControl& v, const SingularControl& eta,
                           const TimeGrid& grid, const NoiseBatch& noise) {
    return estimate_cost(spec, dirac_embed(v), eta, grid, noise);
}

double sup_mean_square_gap(const PathArray& a, const PathArray& b) {
    if (!a.same_shape(b)) {
        throw ConfigError("ensembles have different shapes");
    }
    double worst = 0.0;
    for (std::size_t j = 0; j < a.points(); ++j) {
        double sum = 0.0;
        for (std::size_t p = 0; p < a.paths(); ++p) sum += (a.vec(p, j) - b.vec(p, j)).squaredNorm();
        worst = std::max(worst, sum / static_cast<double>(a.paths()));
    }
    return worst;
}

double finite_difference_gap(const TrajectoryEnsemble& perturbed, const TrajectoryEnsemble& base,
                             const VariationalEnsemble& z, double theta) {
    if (!(theta > 0.0)) {
        throw ConfigError("finite difference step must be positive");
    }
    if (!perturbed.states.same_shape(base.states) || !base.states.same_shape(z.z)) {
        throw ConfigError("ensembles have different shapes");
    }
    double worst = 0.0;
    for (std::size_t j = 0; j < base.states.points(); ++j) {
        double sum = 0.0;
        for (std::size_t p = 0; p < base.paths(); ++p) {
            sum += ((perturbed.at(p, j) - base.at(p, j)) / theta - z.z.vec(p, j)).squaredNorm();
        }
        worst = std::max(worst, sum / static_cast<double>(base.paths()));
    }
    return worst;
}

std::vector<ChatterRow> chattering_study(const ProblemSpec& spec, const RelaxedControl& q,
                                         const SingularControl& eta, const TimeGrid& grid,
                                         const NoiseBatch& noise, const std::vector<std::size_t>& levels) {
    const auto target = simulate_relaxed(spec, q, eta, grid, noise);
    const auto target_costs = path_costs(spec, q, eta, target);
    const auto target_cost = estimate_mean(target_costs);
    std::vector<ChatterRow> rows;
    for (std::size_t n : levels) {
        const auto u = chattering(q, n);
        const auto traj = simulate_strict(spec, u, eta, grid, noise);
        const auto costs = path_costs(spec, dirac_embed(u), eta, traj);
        std::vector<double> diff(costs.size());
        for (std::size_t p = 0; p < costs.size(); ++p) diff[p] = costs[p] - target_costs[p];
        const auto d = estimate_mean(diff);
        const auto c = estimate_mean(costs);
        rows.push_back({n, sup_mean_square_gap(traj.states, target.states), std::abs(c.mean - target_cost.mean),
                        d.std_error});
    }
    return rows;
}

}  // namespace stochpmp
