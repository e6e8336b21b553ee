#include "stochpmp/controls.hpp"

#include <algorithm>
#include <numeric>

namespace stochpmp {

using nlohmann::json;

void DiscreteMeasure::validate() const {
    if (atoms.empty()) {
        throw ConfigError("measure has no atoms");
    }
    if (atoms.size() != weights.size()) {
        throw ConfigError("measure has " + std::to_string(atoms.size()) + " atoms but " +
                          std::to_string(weights.size()) + " weights");
    }
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) {
            throw ConfigError("measure weights must be finite and nonnegative");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw ConfigError("measure weights sum to " + std::to_string(sum) + ", expected 1");
    }
    const auto dim = atoms.front().size();
    for (const auto& a : atoms) {
        if (a.size() != dim) {
            throw ConfigError("measure atoms have inconsistent dimensions");
        }
    }
}

namespace {

void check_layout(std::size_t paths, std::size_t cells, std::size_t count, const char* what) {
    if (paths == 0 || cells == 0) {
        throw ConfigError(std::string(what) + " needs positive path and cell counts");
    }
    if (count != paths * cells) {
        throw ConfigError(std::string(what) + ": expected " + std::to_string(paths * cells) +
                          " entries, got " + std::to_string(count));
    }
}

void require_on_grid(const ProblemSpec& spec, const Vector& a, const char* what) {
    if (!spec.grid_index(a)) {
        std::ostringstream os;
        os << what << " value [" << a.transpose() << "] is not a point of the U1 grid";
        throw ConfigError(os.str());
    }
}

}  // namespace

StrictControl::StrictControl(std::size_t paths, std::size_t cells, std::vector<Vector> values)
    : paths_(paths), cells_(cells), values_(std::move(values)) {
    check_layout(paths_, cells_, values_.size(), "strict control");
    for (const auto& v : values_) {
        if (v.size() != values_.front().size()) {
            throw ConfigError("strict control values have inconsistent dimensions");
        }
    }
}

StrictControl StrictControl::constant(std::size_t cells, const Vector& value) {
    return StrictControl(1, cells, std::vector<Vector>(cells, value));
}

void StrictControl::check_on_grid(const ProblemSpec& spec) const {
    for (const auto& v : values_) require_on_grid(spec, v, "strict control");
}

RelaxedControl::RelaxedControl(std::size_t paths, std::size_t cells, std::vector<DiscreteMeasure> measures)
    : paths_(paths), cells_(cells), measures_(std::move(measures)) {
    check_layout(paths_, cells_, measures_.size(), "relaxed control");
    for (const auto& m : measures_) m.validate();
}

RelaxedControl RelaxedControl::constant(std::size_t cells, const DiscreteMeasure& mu) {
    return RelaxedControl(1, cells, std::vector<DiscreteMeasure>(cells, mu));
}

void RelaxedControl::check_on_grid(const ProblemSpec& spec) const {
    for (const auto& m : measures_) {
        for (const auto& a : m.atoms) require_on_grid(spec, a, "relaxed control atom");
    }
}

SingularControl::SingularControl(std::size_t paths, std::size_t cells, std::size_t dim,
                                 std::vector<double> increments)
    : paths_(paths), cells_(cells), dim_(dim), increments_(std::move(increments)) {
    if (dim_ == 0) {
        throw ConfigError("singular control needs positive dimension");
    }
    check_layout(paths_, cells_, increments_.size() / dim_, "singular control");
    if (increments_.size() % dim_ != 0) {
        throw ConfigError("singular control increments are not a whole number of vectors");
    }
    for (double v : increments_) {
        if (!std::isfinite(v) || v < 0.0) {
            throw ConfigError("singular control increments must be finite and nonnegative");
        }
    }
}

SingularControl SingularControl::zero(std::size_t cells, std::size_t dim) {
    return SingularControl(1, cells, dim, std::vector<double>(cells * dim, 0.0));
}

SingularControl SingularControl::impulse(std::size_t cells, std::size_t cell, const Vector& size) {
    if (cell >= cells) {
        throw ConfigError("impulse cell " + std::to_string(cell) + " outside grid of " +
                          std::to_string(cells) + " cells");
    }
    const auto dim = static_cast<std::size_t>(size.size());
    std::vector<double> inc(cells * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) inc[cell * dim + i] = size[static_cast<Eigen::Index>(i)];
    return SingularControl(1, cells, dim, std::move(inc));
}

Vector SingularControl::cumulative(std::size_t path, std::size_t j) const {
    Vector eta = Vector::Zero(static_cast<Eigen::Index>(dim_));
    for (std::size_t c = 0; c < j && c < cells_; ++c) eta += increment(path, c);
    return eta;
}

bool SingularControl::is_zero() const {
    return std::all_of(increments_.begin(), increments_.end(), [](double v) { return v == 0.0; });
}

void PerturbationSpec::validate() const {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw ConfigError("perturbation theta must lie in [0, 1], got " + std::to_string(theta));
    }
}

RelaxedControl dirac_embed(const StrictControl& v) {
    std::vector<DiscreteMeasure> measures;
    measures.reserve(v.values().size());
    for (const auto& value : v.values()) measures.push_back(DiscreteMeasure::dirac(value));
    return RelaxedControl(v.paths(), v.cells(), std::move(measures));
}

namespace {

std::size_t combined_paths(std::size_t a, std::size_t b) {
    if (a != 1 && b != 1 && a != b) {
        throw ConfigError("controls have incompatible path counts " + std::to_string(a) + " and " +
                          std::to_string(b));
    }
    return std::max(a, b);
}

// Adds w * delta_a to an atom list, merging exact duplicates.
void accumulate(DiscreteMeasure& out, const Vector& a, double w) {
    for (std::size_t i = 0; i < out.atoms.size(); ++i) {
        if (out.atoms[i].size() == a.size() && out.atoms[i] == a) {
            out.weights[i] += w;
            return;
        }
    }
    out.atoms.push_back(a);
    out.weights.push_back(w);
}

}  // namespace

std::pair<RelaxedControl, SingularControl> convex_combine(const RelaxedControl& mu, const SingularControl& xi,
                                                          const RelaxedControl& q, const SingularControl& eta,
                                                          double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw ConfigError("convex_combine: theta must lie in [0, 1], got " + std::to_string(theta));
    }
    if (mu.cells() != q.cells() || xi.cells() != eta.cells() || mu.cells() != xi.cells()) {
        throw ConfigError("convex_combine: controls must share the time grid");
    }
    if (xi.dim() != eta.dim()) {
        throw ConfigError("convex_combine: singular controls have different dimensions");
    }
    const std::size_t cells = mu.cells();
    const std::size_t mpaths = combined_paths(mu.paths(), q.paths());
    std::vector<DiscreteMeasure> measures;
    measures.reserve(mpaths * cells);
    for (std::size_t p = 0; p < mpaths; ++p) {
        for (std::size_t c = 0; c < cells; ++c) {
            DiscreteMeasure out;
            if (theta < 1.0) {
                const auto& base = mu.at(p, c);
                for (std::size_t i = 0; i < base.atoms.size(); ++i) {
                    accumulate(out, base.atoms[i], (1.0 - theta) * base.weights[i]);
                }
            }
            if (theta > 0.0) {
                const auto& dir = q.at(p, c);
                for (std::size_t i = 0; i < dir.atoms.size(); ++i) {
                    accumulate(out, dir.atoms[i], theta * dir.weights[i]);
                }
            }
            measures.push_back(std::move(out));
        }
    }

    const std::size_t spaths = combined_paths(xi.paths(), eta.paths());
    const std::size_t dim = xi.dim();
    std::vector<double> inc(spaths * cells * dim);
    for (std::size_t p = 0; p < spaths; ++p) {
        for (std::size_t c = 0; c < cells; ++c) {
            const auto a = xi.increment(p, c);
            const auto b = eta.increment(p, c);
            for (std::size_t i = 0; i < dim; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                inc[(p * cells + c) * dim + i] = (1.0 - theta) * a[ii] + theta * b[ii];
            }
        }
    }
    return {RelaxedControl(mpaths, cells, std::move(measures)), SingularControl(spaths, cells, dim, std::move(inc))};
}

StrictControl chattering(const RelaxedControl& q, std::size_t windows) {
    const std::size_t cells = q.cells();
    if (windows == 0 || windows > cells) {
        throw ConfigError("chattering: window count must be in [1, " + std::to_string(cells) + "]");
    }
    std::vector<Vector> values(q.paths() * cells);
    for (std::size_t p = 0; p < q.paths(); ++p) {
        for (std::size_t w = 0; w < windows; ++w) {
            const std::size_t begin = w * cells / windows;
            const std::size_t end = (w + 1) * cells / windows;
            const std::size_t len = end - begin;

            DiscreteMeasure avg;
            for (std::size_t c = begin; c < end; ++c) {
                const auto& m = q.at(p, c);
                for (std::size_t i = 0; i < m.atoms.size(); ++i) {
                    accumulate(avg, m.atoms[i], m.weights[i] / static_cast<double>(len));
                }
            }
            const auto positive = static_cast<std::size_t>(
                std::count_if(avg.weights.begin(), avg.weights.end(), [](double x) { return x > 0.0; }));
            if (len < positive) {
                throw ConfigError("chattering: window of " + std::to_string(len) + " cells cannot represent " +
                                  std::to_string(positive) + " weighted atoms; the grid needs at least " +
                                  std::to_string(windows * positive) + " cells for " + std::to_string(windows) +
                                  " windows");
            }

            // Largest-remainder apportionment of len cells.
            const std::size_t k = avg.atoms.size();
            std::vector<std::size_t> counts(k);
            std::vector<double> frac(k);
            std::size_t assigned = 0;
            for (std::size_t i = 0; i < k; ++i) {
                const double quota = avg.weights[i] * static_cast<double>(len);
                counts[i] = static_cast<std::size_t>(std::floor(quota));
                frac[i] = quota - static_cast<double>(counts[i]);
                assigned += counts[i];
            }
            std::vector<std::size_t> order(k);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
            for (std::size_t r = 0; assigned < len && r < k; ++r) {
                ++counts[order[r]];
                ++assigned;
            }
            // rounding of the weight sum can leave a surplus of one cell
            while (assigned > len) {
                auto it = std::max_element(counts.begin(), counts.end());
                --*it;
                --assigned;
            }

            std::size_t c = begin;
            for (std::size_t i = 0; i < k; ++i) {
                for (std::size_t s = 0; s < counts[i]; ++s) values[p * cells + c++] = avg.atoms[i];
            }
        }
    }
    return StrictControl(q.paths(), cells, std::move(values));
}

StrictControl switching_control(std::size_t cells, std::size_t blocks) {
    if (blocks == 0 || cells == 0) {
        throw ConfigError("switching control needs positive cell and block counts");
    }
    std::vector<Vector> values(cells);
    for (std::size_t j = 0; j < cells; ++j) {
        const std::size_t block = j * blocks / cells;
        values[j] = Vector::Constant(1, block % 2 == 0 ? 1.0 : -1.0);
    }
    return StrictControl(1, cells, std::move(values));
}

namespace {

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from(const json& j) {
    const auto v = j.is_number() ? std::vector<double>{j.get<double>()} : j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void expect_type(const json& j, const char* type) {
    if (j.value("type", std::string()) != type) {
        throw ConfigError(std::string("expected a control document of type '") + type + "'");
    }
}

}  // namespace

json to_json(const StrictControl& v) {
    json values = json::array();
    for (const auto& x : v.values()) values.push_back(vec_json(x));
    return {{"type", "strict"}, {"paths", v.paths()}, {"cells", v.cells()}, {"values", std::move(values)}};
}

json to_json(const RelaxedControl& q) {
    json measures = json::array();
    for (const auto& m : q.measures()) {
        json atoms = json::array();
        for (const auto& a : m.atoms) atoms.push_back(vec_json(a));
        measures.push_back({{"atoms", std::move(atoms)}, {"weights", m.weights}});
    }
    return {{"type", "relaxed"}, {"paths", q.paths()}, {"cells", q.cells()}, {"measures", std::move(measures)}};
}

json to_json(const SingularControl& eta) {
    json inc = json::array();
    for (std::size_t p = 0; p < eta.paths(); ++p) {
        for (std::size_t c = 0; c < eta.cells(); ++c) inc.push_back(vec_json(eta.increment(p, c)));
    }
    return {{"type", "singular"}, {"paths", eta.paths()}, {"cells", eta.cells()}, {"dim", eta.dim()},
            {"increments", std::move(inc)}};
}

StrictControl strict_control_from_json(const json& j) {
    try {
        expect_type(j, "strict");
        std::vector<Vector> values;
        for (const auto& v : j.at("values")) values.push_back(vec_from(v));
        return StrictControl(j.value("paths", std::size_t{1}), j.at("cells").get<std::size_t>(), std::move(values));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid strict control JSON: ") + e.what());
    }
}

RelaxedControl relaxed_control_from_json(const json& j) {
    try {
        expect_type(j, "relaxed");
        std::vector<DiscreteMeasure> measures;
        for (const auto& m : j.at("measures")) {
            DiscreteMeasure mu;
            for (const auto& a : m.at("atoms")) mu.atoms.push_back(vec_from(a));
            mu.weights = m.at("weights").get<std::vector<double>>();
            measures.push_back(std::move(mu));
        }
        return RelaxedControl(j.value("paths", std::size_t{1}), j.at("cells").get<std::size_t>(), std::move(measures));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid relaxed control JSON: ") + e.what());
    }
}

SingularControl singular_control_from_json(const json& j) {
    try {
        expect_type(j, "singular");
        const auto dim = j.at("dim").get<std::size_t>();
        std::vector<double> inc;
        for (const auto& v : j.at("increments")) {
            const Vector x = vec_from(v);
            if (static_cast<std::size_t>(x.size()) != dim) {
                throw ConfigError("singular increment has wrong dimension");
            }
            inc.insert(inc.end(), x.data(), x.data() + x.size());
        }
        return SingularControl(j.value("paths", std::size_t{1}), j.at("cells").get<std::size_t>(), dim, std::move(inc));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid singular control JSON: ") + e.what());
    }
}

}  // namespace stochpmp
