#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochpmp/error.hpp"
#include "stochpmp/model.hpp"

namespace stochpmp {

/// Finite probability measure on the control grid: sum_j w_j delta_{a_j}.
struct DiscreteMeasure {
    std::vector<Vector> atoms;
    std::vector<double> weights;

    static DiscreteMeasure dirac(Vector a) { return {{std::move(a)}, {1.0}}; }

    /// Throws ConfigError unless weights are nonnegative, finite, sum to 1
    /// within 1e-12, and match the atoms one to one.
    void validate() const;
};

namespace detail {
inline bool all_finite(double v) { return std::isfinite(v); }
template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) { return v.allFinite(); }
}  // namespace detail

/// sum_j w_j f(a_j). Exactly linear in f; throws NumericalError naming the
/// atom when f is not finite there.
template <typename F>
auto integrate(const DiscreteMeasure& mu, F&& f) {
    using Result = std::decay_t<decltype(f(mu.atoms.front()))>;
    Result total{};
    for (std::size_t j = 0; j < mu.atoms.size(); ++j) {
        Result value = f(mu.atoms[j]);
        if (!detail::all_finite(value)) {
            std::ostringstream os;
            os << "non-finite integrand at atom " << j << " = [" << mu.atoms[j].transpose() << "]";
            throw NumericalError(os.str());
        }
        if (j == 0) {
            total = mu.weights[j] * value;
        } else {
            total += mu.weights[j] * value;
        }
    }
    return total;
}

/// Strict control values v on the grid cells, shared by all paths
/// (paths() == 1) or given per path.
class StrictControl {
public:
    StrictControl(std::size_t paths, std::size_t cells, std::vector<Vector> values);
    static StrictControl constant(std::size_t cells, const Vector& value);

    std::size_t paths() const { return paths_; }
    std::size_t cells() const { return cells_; }
    const Vector& at(std::size_t path, std::size_t cell) const {
        return values_[(paths_ == 1 ? 0 : path) * cells_ + cell];
    }
    const std::vector<Vector>& values() const { return values_; }

    /// Throws ConfigError unless every value is a point of the U1 grid.
    void check_on_grid(const ProblemSpec& spec) const;

private:
    std::size_t paths_;
    std::size_t cells_;
    std::vector<Vector> values_;
};

/// Measure-valued control q: one DiscreteMeasure per cell (and per path).
class RelaxedControl {
public:
    RelaxedControl(std::size_t paths, std::size_t cells, std::vector<DiscreteMeasure> measures);
    static RelaxedControl constant(std::size_t cells, const DiscreteMeasure& mu);

    std::size_t paths() const { return paths_; }
    std::size_t cells() const { return cells_; }
    const DiscreteMeasure& at(std::size_t path, std::size_t cell) const {
        return measures_[(paths_ == 1 ? 0 : path) * cells_ + cell];
    }
    const std::vector<DiscreteMeasure>& measures() const { return measures_; }

    void check_on_grid(const ProblemSpec& spec) const;

private:
    std::size_t paths_;
    std::size_t cells_;
    std::vector<DiscreteMeasure> measures_;
};

/// Nondecreasing singular control eta, stored as nonnegative increments over
/// the half-open cells (t_j, t_{j+1}]. eta(t_j) is the partial sum of the
/// increments before cell j, so eta_0 = 0 and eta is left-continuous.
class SingularControl {
public:
    SingularControl(std::size_t paths, std::size_t cells, std::size_t dim, std::vector<double> increments);
    static SingularControl zero(std::size_t cells, std::size_t dim);
    /// Single increment of `size` over cell `cell`, shared by all paths.
    static SingularControl impulse(std::size_t cells, std::size_t cell, const Vector& size);

    std::size_t paths() const { return paths_; }
    std::size_t cells() const { return cells_; }
    std::size_t dim() const { return dim_; }
    Eigen::Map<const Vector> increment(std::size_t path, std::size_t cell) const {
        return Eigen::Map<const Vector>(increments_.data() + ((paths_ == 1 ? 0 : path) * cells_ + cell) * dim_,
                                        static_cast<Eigen::Index>(dim_));
    }
    /// eta at t_j (j in 0..cells).
    Vector cumulative(std::size_t path, std::size_t j) const;
    const std::vector<double>& increments() const { return increments_; }
    bool is_zero() const;

private:
    std::size_t paths_;
    std::size_t cells_;
    std::size_t dim_;
    std::vector<double> increments_;
};

/// Direction (q, eta) and step theta for the convex perturbation
/// (mu, xi) + theta [(q, eta) - (mu, xi)].
struct PerturbationSpec {
    double theta = 0.0;
    RelaxedControl direction_measure;
    SingularControl direction_singular;

    void validate() const;
};

RelaxedControl dirac_embed(const StrictControl& v);

/// (1 - theta)(mu, xi) + theta (q, eta). Atoms are merged by exact equality;
/// at theta = 0 (resp. 1) the base (resp. direction) is returned unchanged.
std::pair<RelaxedControl, SingularControl> convex_combine(const RelaxedControl& mu, const SingularControl& xi,
                                                          const RelaxedControl& q, const SingularControl& eta,
                                                          double theta);

/// Chattering approximation of a relaxed control by a strict one on the same
/// grid. [0, T] is cut into `windows` consecutive windows of whole cells; in
/// each window the atoms of the window-averaged measure are laid out in
/// consecutive blocks whose cell counts are the largest-remainder
/// apportionment of the weights, so occupation fractions are within one cell
/// of the weights. Throws ConfigError when a window has fewer cells than
/// positively weighted atoms.
StrictControl chattering(const RelaxedControl& q, std::size_t windows);

/// Example 1 switching control: value (-1)^k on the k-th of `blocks` equal
/// blocks of cells.
StrictControl switching_control(std::size_t cells, std::size_t blocks);

nlohmann::json to_json(const StrictControl& v);
nlohmann::json to_json(const RelaxedControl& q);
nlohmann::json to_json(const SingularControl& eta);
StrictControl strict_control_from_json(const nlohmann::json& j);
RelaxedControl relaxed_control_from_json(const nlohmann::json& j);
SingularControl singular_control_from_json(const nlohmann::json& j);

}  // namespace stochpmp
