#include "stochpmp/regression.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/QR>

namespace stochpmp {

namespace {

void enumerate(std::size_t vars, std::size_t degree, std::vector<unsigned>& current, std::size_t pos,
               std::size_t remaining, std::vector<std::vector<unsigned>>& out) {
    if (pos == vars) {
        out.push_back(current);
        return;
    }
    for (std::size_t e = 0; e <= remaining; ++e) {
        current[pos] = static_cast<unsigned>(e);
        enumerate(vars, degree, current, pos + 1, remaining - e, out);
    }
    current[pos] = 0;
}

}  // namespace

std::size_t RegressionDiagnostics::max_basis_size() const {
    std::size_t best = 0;
    for (const auto& s : slices) best = std::max(best, s.basis_size);
    return best;
}

double RegressionDiagnostics::max_residual_rms() const {
    double worst = 0.0;
    for (const auto& s : slices) worst = std::max(worst, s.residual_rms);
    return worst;
}

StateBasis::StateBasis(const Matrix& states, std::size_t degree) {
    const Eigen::Index m = states.rows();
    const Eigen::Index n = states.cols();
    if (m == 0) {
        throw ConfigError("regression needs at least one path");
    }
    Matrix standardized(m, n);
    std::vector<Vector> orthonormal;
    for (Eigen::Index c = 0; c < n; ++c) {
        const double mean = states.col(c).mean();
        const double sd = std::sqrt((states.col(c).array() - mean).square().mean());
        if (!(sd > 1e-12 * (1.0 + std::abs(mean)))) continue;
        const Vector col = (states.col(c).array() - mean) / sd;
        // Skip components that are (numerically) linear in the ones already kept.
        Vector residual = col / std::sqrt(static_cast<double>(m));
        for (const auto& q : orthonormal) residual -= q.dot(residual) * q;
        const double left = residual.norm();
        if (!(left > 1e-8)) continue;
        orthonormal.push_back(residual / left);
        standardized.col(static_cast<Eigen::Index>(active_.size())) = col;
        active_.push_back(c);
    }
    const std::size_t vars = active_.size();
    std::vector<unsigned> current(vars, 0);
    enumerate(vars, degree, current, 0, vars == 0 ? 0 : degree, exponents_);
    // Order by total degree so the constant comes first.
    std::stable_sort(exponents_.begin(), exponents_.end(), [](const auto& a, const auto& b) {
        unsigned da = 0, db = 0;
        for (unsigned e : a) da += e;
        for (unsigned e : b) db += e;
        return da < db;
    });

    design_.resize(m, static_cast<Eigen::Index>(exponents_.size()));
    for (Eigen::Index r = 0; r < m; ++r) {
        for (std::size_t k = 0; k < exponents_.size(); ++k) {
            double v = 1.0;
            for (std::size_t i = 0; i < vars; ++i) {
                for (unsigned e = 0; e < exponents_[k][i]; ++e) v *= standardized(r, static_cast<Eigen::Index>(i));
            }
            design_(r, static_cast<Eigen::Index>(k)) = v;
        }
    }
}

Matrix regress(const Matrix& states, const Matrix& targets, std::size_t degree, SliceDiagnostic* diagnostic) {
    if (states.rows() != targets.rows()) {
        throw ConfigError("regression states and targets have different path counts");
    }
    const StateBasis basis(states, degree);
    const auto m = states.rows();
    const auto k = static_cast<Eigen::Index>(basis.size());
    if (diagnostic) diagnostic->basis_size = basis.size();
    if (targets.isZero(0.0)) {
        if (diagnostic) diagnostic->residual_rms = 0.0;
        return Matrix::Zero(targets.rows(), targets.cols());
    }
    if (m < k) {
        throw NumericalError("regression has " + std::to_string(m) + " paths for " + std::to_string(k) +
                             " basis functions; lower the basis degree or add paths");
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(basis.design());
    qr.setThreshold(1e-10);
    if (qr.rank() < k) {
        throw NumericalError("regression matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                             std::to_string(k) + "); lower the basis degree or add paths");
    }
    const Matrix coeffs = qr.solve(targets);
    Matrix fitted = basis.design() * coeffs;
    if (!fitted.allFinite()) {
        throw NumericalError("regression produced non-finite fitted values");
    }
    if (diagnostic) {
        diagnostic->residual_rms = std::sqrt((fitted - targets).squaredNorm() / static_cast<double>(targets.size()));
    }
    return fitted;
}

nlohmann::json to_json(const RegressionDiagnostics& d) {
    nlohmann::json slices = nlohmann::json::array();
    for (const auto& s : d.slices) {
        slices.push_back({{"step", s.step}, {"basis_size", s.basis_size}, {"residual_rms", s.residual_rms}});
    }
    return {{"degree", d.degree},
            {"max_basis_size", d.max_basis_size()},
            {"max_residual_rms", d.max_residual_rms()},
            {"slices", slices}};
}

}  // namespace stochpmp
