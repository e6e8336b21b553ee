#include "stochpmp/adjoint.hpp"

#include <cmath>

#include "stochpmp/pmp.hpp"

namespace stochpmp {

namespace {

Vector running_cost_gradient(const ProblemSpec& spec, double t, const Vector& x, const DiscreteMeasure& mu) {
    return integrate(mu, [&](const Vector& a) -> Vector { return spec.running_cost_x(t, x, a); });
}

void check_base(const ProblemSpec& spec, const RelaxedControl& mu, const TrajectoryEnsemble& traj) {
    if (mu.cells() != traj.grid.steps()) {
        throw ConfigError("relaxed control must have one cell per grid step");
    }
    if (mu.paths() != 1 && mu.paths() != traj.paths()) {
        throw ConfigError("per-path relaxed control must match the trajectory path count");
    }
    if (traj.states.rows() != spec.dims().state) {
        throw ConfigError("trajectory state dimension differs from the problem");
    }
}

void set_slice(PathArray& a, std::size_t j, const Matrix& values) {
    for (std::size_t p = 0; p < a.paths(); ++p) a.vec(p, j) = values.row(static_cast<Eigen::Index>(p)).transpose();
}

void set_terminal_gradient(const ProblemSpec& spec, const TrajectoryEnsemble& traj, PathArray& p) {
    const std::size_t last = traj.grid.steps();
    for (std::size_t path = 0; path < traj.paths(); ++path) {
        p.vec(path, last) = spec.terminal_cost_x(traj.at(path, last));
    }
}

}  // namespace

std::string to_string(AdjointMethod m) {
    return m == AdjointMethod::explicit_formula ? "explicit" : "bsde-regression";
}

Matrix slice(const PathArray& a, std::size_t j) {
    Matrix out(static_cast<Eigen::Index>(a.paths()), static_cast<Eigen::Index>(a.block_size()));
    for (std::size_t p = 0; p < a.paths(); ++p) out.row(static_cast<Eigen::Index>(p)) = a.vec(p, j).transpose();
    return out;
}

Vector hamiltonian_gradient(const ProblemSpec& spec, double t, const Vector& x, const DiscreteMeasure& mu,
                            const Vector& p, const Matrix& P) {
    const std::size_t d = spec.dims().noise;
    return integrate(mu, [&](const Vector& a) -> Vector {
        Vector g = spec.running_cost_x(t, x, a) + spec.drift_x(t, x, a).transpose() * p;
        const auto sx = spec.diffusion_x(t, x, a);
        for (std::size_t l = 0; l < d; ++l) g += sx[l].transpose() * P.col(static_cast<Eigen::Index>(l));
        return g;
    });
}

AdjointPair adjoint_explicit(const ProblemSpec& spec, const RelaxedControl& mu, const TrajectoryEnsemble& traj,
                             const FundamentalPair& fundamentals, const RegressionConfig& config) {
    check_base(spec, mu, traj);
    if (fundamentals.phi.paths() != traj.paths() || fundamentals.phi.points() != traj.states.points()) {
        throw ConfigError("fundamental solutions were not computed along this trajectory");
    }
    const std::size_t paths = traj.paths();
    const std::size_t steps = traj.grid.steps();
    const std::size_t n = spec.dims().state;
    const auto ni = static_cast<Eigen::Index>(n);
    const double dt = traj.grid.dt();

    AdjointPair out{PathArray(paths, steps + 1, n), PathArray(), AdjointMethod::explicit_formula, {config.degree, {}}};
    set_terminal_gradient(spec, traj, out.p);

    // S[path] accumulates Phi_N' g_x + sum_{s >= j} Phi_s' hbar_x dt backward.
    std::vector<Vector> S(paths);
    for (std::size_t path = 0; path < paths; ++path) {
        S[path] = Matrix(fundamentals.phi.block(path, steps)).transpose() * out.p.vec(path, steps);
    }
    Matrix states(static_cast<Eigen::Index>(paths), ni);
    Matrix inner(static_cast<Eigen::Index>(paths), ni);
    for (std::size_t j = steps; j-- > 0;) {
        const double t = traj.grid.time(j);
        for (std::size_t path = 0; path < paths; ++path) {
            const Vector x = traj.at(path, j);
            const Matrix phi = fundamentals.phi.block(path, j);
            const Matrix psi = fundamentals.psi.block(path, j);
            S[path] += phi.transpose() * running_cost_gradient(spec, t, x, mu.at(path, j)) * dt;
            states.row(static_cast<Eigen::Index>(path)) = x.transpose();
            inner.row(static_cast<Eigen::Index>(path)) = (psi.transpose() * S[path]).transpose();
        }
        SliceDiagnostic diag;
        diag.step = j;
        set_slice(out.p, j, regress(states, inner, config.degree, &diag));
        out.diagnostics.slices.push_back(diag);
    }
    return out;
}

AdjointPair adjoint_bsde(const ProblemSpec& spec, const RelaxedControl& mu, const TrajectoryEnsemble& traj,
                         const NoiseBatch& noise, const RegressionConfig& config) {
    check_base(spec, mu, traj);
    if (noise.paths() != traj.paths() || noise.steps() != traj.grid.steps() || noise.seed() != traj.noise_seed) {
        throw ConfigError("noise batch does not match the trajectory");
    }
    const std::size_t paths = traj.paths();
    const std::size_t steps = traj.grid.steps();
    const std::size_t n = spec.dims().state;
    const std::size_t d = spec.dims().noise;
    const auto ni = static_cast<Eigen::Index>(n);
    const auto di = static_cast<Eigen::Index>(d);
    const auto mi = static_cast<Eigen::Index>(paths);
    const double dt = traj.grid.dt();

    AdjointPair out{PathArray(paths, steps + 1, n), PathArray(paths, steps + 1, n, d),
                    AdjointMethod::bsde_regression, {config.degree, {}}};
    set_terminal_gradient(spec, traj, out.p);

    Matrix states(mi, ni);
    Matrix next = slice(out.p, steps);
    for (std::size_t j = steps; j-- > 0;) {
        const double t = traj.grid.time(j);
        for (std::size_t path = 0; path < paths; ++path) states.row(static_cast<Eigen::Index>(path)) = traj.at(path, j).transpose();

        SliceDiagnostic diag;
        diag.step = j;
        const Matrix centered = next - regress(states, next, config.degree);
        // Row-major n x d flattening, matching PathArray blocks.
        Matrix zt(mi, ni * di);
        for (std::size_t path = 0; path < paths; ++path) {
            const auto dw = noise.increment(path, j);
            for (Eigen::Index i = 0; i < ni; ++i) {
                for (Eigen::Index l = 0; l < di; ++l) {
                    zt(static_cast<Eigen::Index>(path), i * di + l) =
                        centered(static_cast<Eigen::Index>(path), i) * dw[static_cast<std::size_t>(l)] / dt;
                }
            }
        }
        const Matrix P = regress(states, zt, config.degree);
        set_slice(out.P, j, P);

        Matrix target(mi, ni);
        for (std::size_t path = 0; path < paths; ++path) {
            const auto r = static_cast<Eigen::Index>(path);
            const Vector x = traj.at(path, j);
            const Vector pn = next.row(r).transpose();
            const Matrix Pj = out.P.block(path, j);
            target.row(r) = (pn + hamiltonian_gradient(spec, t, x, mu.at(path, j), pn, Pj) * dt).transpose();
        }
        next = regress(states, target, config.degree, &diag);
        set_slice(out.p, j, next);
        out.diagnostics.slices.push_back(diag);
    }
    for (std::size_t path = 0; path < paths; ++path) {
        out.P.block(path, steps) = steps > 0 ? Matrix(out.P.block(path, steps - 1)) : Matrix::Zero(ni, di);
    }
    return out;
}

AuxiliaryProcesses auxiliary_processes(const ProblemSpec& spec, const RelaxedControl& mu,
                                       const TrajectoryEnsemble& traj, const FundamentalPair& fundamentals,
                                       const VariationalEnsemble& z, const AdjointPair& explicit_adjoint,
                                       const NoiseBatch& noise, const RegressionConfig& config) {
    check_base(spec, mu, traj);
    const std::size_t paths = traj.paths();
    const std::size_t steps = traj.grid.steps();
    const std::size_t n = spec.dims().state;
    const std::size_t d = spec.dims().noise;
    const auto ni = static_cast<Eigen::Index>(n);
    const auto di = static_cast<Eigen::Index>(d);
    const auto mi = static_cast<Eigen::Index>(paths);
    const double dt = traj.grid.dt();
    if (!z.z.same_shape(traj.states) || !explicit_adjoint.p.same_shape(traj.states)) {
        throw ConfigError("auxiliary processes need z and p on the trajectory's grid");
    }

    AuxiliaryProcesses out{PathArray(paths, steps + 1, n), PathArray(paths, 1, n), PathArray(paths, steps + 1, n),
                           PathArray(paths, steps, n, d), PathArray(paths, steps + 1, n, d), {config.degree, {}}};
    for (std::size_t path = 0; path < paths; ++path) {
        Vector X = Matrix(fundamentals.phi.block(path, steps)).transpose() *
                   spec.terminal_cost_x(traj.at(path, steps));
        for (std::size_t j = 0; j <= steps; ++j) {
            const Matrix phi = fundamentals.phi.block(path, j);
            out.alpha.vec(path, j) = Matrix(fundamentals.psi.block(path, j)) * z.z.vec(path, j);
            out.Y.vec(path, j) = phi.transpose() * explicit_adjoint.p.vec(path, j);
            if (j < steps) {
                X += phi.transpose() * running_cost_gradient(spec, traj.grid.time(j), traj.at(path, j), mu.at(path, j)) * dt;
            }
        }
        out.X.vec(path, 0) = X;
    }

    Matrix states(mi, ni);
    for (std::size_t j = 0; j < steps; ++j) {
        const double t = traj.grid.time(j);
        Matrix target(mi, ni * di);
        for (std::size_t path = 0; path < paths; ++path) {
            const auto r = static_cast<Eigen::Index>(path);
            const Vector x = traj.at(path, j);
            states.row(r) = x.transpose();
            const Matrix phi = fundamentals.phi.block(path, j);
            const Vector incr = out.Y.vec(path, j + 1) - out.Y.vec(path, j) +
                                phi.transpose() * running_cost_gradient(spec, t, x, mu.at(path, j)) * dt;
            const auto dw = noise.increment(path, j);
            for (Eigen::Index i = 0; i < ni; ++i) {
                for (Eigen::Index l = 0; l < di; ++l) target(r, i * di + l) = incr(i) * dw[static_cast<std::size_t>(l)] / dt;
            }
        }
        SliceDiagnostic diag;
        diag.step = j;
        const Matrix Q = regress(states, target, config.degree, &diag);
        out.diagnostics.slices.push_back(diag);
        for (std::size_t path = 0; path < paths; ++path) {
            out.Q.vec(path, j) = Q.row(static_cast<Eigen::Index>(path)).transpose();
            const Vector x = traj.at(path, j);
            const Vector p = explicit_adjoint.p.vec(path, j);
            const Matrix Qj = out.Q.block(path, j);
            const Matrix psi = fundamentals.psi.block(path, j);
            const Matrix sigma_term = integrate(mu.at(path, j), [&](const Vector& a) -> Matrix {
                const auto sx = spec.diffusion_x(t, x, a);
                Matrix m(ni, di);
                for (Eigen::Index l = 0; l < di; ++l) m.col(l) = sx[static_cast<std::size_t>(l)].transpose() * p;
                return m;
            });
            out.P_repr.block(path, j) = psi.transpose() * Qj - sigma_term;
        }
    }
    for (std::size_t path = 0; path < paths; ++path) {
        out.P_repr.block(path, steps) = steps > 0 ? Matrix(out.P_repr.block(path, steps - 1)) : Matrix::Zero(ni, di);
    }
    return out;
}

DualityResidual duality_residual(const ProblemSpec& spec, const TrajectoryEnsemble& traj,
                                 const FundamentalPair& fundamentals, const VariationalEnsemble& z) {
    const std::size_t paths = traj.paths();
    const std::size_t last = traj.grid.steps();
    if (!z.z.same_shape(traj.states) || fundamentals.phi.paths() != paths) {
        throw ConfigError("duality residual needs z and fundamentals on the trajectory's grid");
    }
    std::vector<double> lhs(paths), rhs(paths), diff(paths);
    for (std::size_t p = 0; p < paths; ++p) {
        const Vector gx = spec.terminal_cost_x(traj.at(p, last));
        const Vector zN = z.z.vec(p, last);
        const Vector alpha = Matrix(fundamentals.psi.block(p, last)) * zN;
        const Vector Y = Matrix(fundamentals.phi.block(p, last)).transpose() * gx;
        lhs[p] = alpha.dot(Y);
        rhs[p] = gx.dot(zN);
        diff[p] = lhs[p] - rhs[p];
    }
    DualityResidual r;
    r.lhs = estimate_mean(lhs).mean;
    r.rhs = estimate_mean(rhs).mean;
    const auto d = estimate_mean(diff);
    r.residual = std::abs(d.mean);
    r.std_error = d.std_error;
    return r;
}

MeanEstimate variational_inequality_value(const ProblemSpec& spec, const RelaxedControl& mu,
                                          const SingularControl& xi, const RelaxedControl& q,
                                          const SingularControl& eta, const AdjointPair& adjoint,
                                          const TrajectoryEnsemble& traj) {
    check_base(spec, mu, traj);
    check_base(spec, q, traj);
    const std::size_t paths = traj.paths();
    const std::size_t steps = traj.grid.steps();
    if (!adjoint.p.same_shape(traj.states)) {
        throw ConfigError("adjoint was not computed on this trajectory");
    }
    if (xi.cells() != steps || eta.cells() != steps) {
        throw ConfigError("singular controls must have one cell per grid step");
    }
    const auto ni = static_cast<Eigen::Index>(spec.dims().state);
    const auto di = static_cast<Eigen::Index>(spec.dims().noise);
    const double dt = traj.grid.dt();
    std::vector<Matrix> gains(steps);
    std::vector<Vector> kvals(steps);
    for (std::size_t j = 0; j < steps; ++j) {
        gains[j] = spec.singular_gain(traj.grid.time(j));
        kvals[j] = spec.singular_cost(traj.grid.time(j));
    }
    std::vector<double> values(paths);
    for (std::size_t path = 0; path < paths; ++path) {
        double total = 0.0;
        for (std::size_t j = 0; j < steps; ++j) {
            const double t = traj.grid.time(j);
            const Vector x = traj.at(path, j);
            const Vector p = adjoint.p.vec(path, j);
            const Matrix P = adjoint.has_P() ? Matrix(adjoint.P.block(path, j)) : Matrix::Zero(ni, di);
            const auto& qm = q.at(path, j);
            const auto& mm = mu.at(path, j);
            if (&qm != &mm) {
                total += (hamiltonian_relaxed(spec, t, x, qm, p, P) - hamiltonian_relaxed(spec, t, x, mm, p, P)) * dt;
            }
            const Vector slack = kvals[j] + gains[j].transpose() * adjoint.p.vec(path, j + 1);
            total += slack.dot(eta.increment(path, j) - xi.increment(path, j));
        }
        values[path] = total;
    }
    return estimate_mean(values);
}

nlohmann::json to_json(const DualityResidual& r) {
    return {{"lhs", r.lhs}, {"rhs", r.rhs}, {"residual", r.residual}, {"std_error", r.std_error}};
}

}  // namespace stochpmp
