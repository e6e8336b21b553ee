#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochpmp/error.hpp"
#include "stochpmp/model.hpp"

namespace stochpmp {

struct RegressionConfig {
    std::size_t degree = 2;
};

struct SliceDiagnostic {
    std::size_t step = 0;
    std::size_t basis_size = 0;
    double residual_rms = 0.0;
};

struct RegressionDiagnostics {
    std::size_t degree = 0;
    std::vector<SliceDiagnostic> slices;

    std::size_t max_basis_size() const;
    double max_residual_rms() const;
};

/// Polynomial basis of total degree <= degree in the standardized state.
/// Components with (numerically) zero spread across paths are dropped, so a
/// slice where every path sits at the same point reduces to the constant.
/// Components that are affine in earlier ones are dropped as well.
class StateBasis {
public:
    StateBasis(const Matrix& states, std::size_t degree);

    std::size_t size() const { return exponents_.size(); }
    const Matrix& design() const { return design_; }
    const std::vector<std::vector<unsigned>>& exponents() const { return exponents_; }

private:
    std::vector<Eigen::Index> active_;
    std::vector<std::vector<unsigned>> exponents_;
    Matrix design_;
};

/// Least-squares projection of each target column (rows are paths) onto the
/// basis built from `states`; returns fitted values with the same shape as
/// `targets`. A zero target yields exactly zero. Throws NumericalError when
/// the design matrix has fewer paths than basis functions or is rank deficient.
Matrix regress(const Matrix& states, const Matrix& targets, std::size_t degree, SliceDiagnostic* diagnostic = nullptr);

nlohmann::json to_json(const RegressionDiagnostics& d);

}  // namespace stochpmp
