#include <fstream>

#include "stochpmp/error.hpp"
#include "stochpmp/model.hpp"

namespace stochpmp {

using nlohmann::json;

namespace {

std::vector<int> read_powers(const json& j, const char* key, std::size_t count) {
    std::vector<int> out(count, 0);
    if (!j.contains(key)) {
        return out;
    }
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != count) {
        throw ConfigError(std::string("polynomial term field '") + key + "' must be an array of " +
                          std::to_string(count) + " exponents");
    }
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = arr[i].get<int>();
    }
    return out;
}

std::vector<double> read_coeffs(const json& j, const char* key, std::size_t count) {
    std::vector<double> out(count, 0.0);
    if (!j.contains(key)) {
        return out;
    }
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != count) {
        throw ConfigError(std::string("affine field '") + key + "' must be an array of " +
                          std::to_string(count) + " coefficients");
    }
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = arr[i].get<double>();
    }
    return out;
}

std::vector<Polynomial> read_poly_list(const json& j, const VariableLayout& layout, std::size_t count,
                                       const char* what) {
    if (!j.is_array() || j.size() != count) {
        throw ConfigError(std::string(what) + " must be an array of " + std::to_string(count) + " forms");
    }
    std::vector<Polynomial> out;
    for (const auto& e : j) {
        out.push_back(polynomial_from_json(e, layout));
    }
    return out;
}

// rows x cols matrix given as an array of rows
std::vector<Polynomial> read_poly_matrix(const json& j, const VariableLayout& layout, std::size_t rows,
                                         std::size_t cols, const char* what) {
    if (!j.is_array() || j.size() != rows) {
        throw ConfigError(std::string(what) + " must have " + std::to_string(rows) + " rows");
    }
    std::vector<Polynomial> out;
    for (const auto& row : j) {
        auto r = read_poly_list(row, layout, cols, what);
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

json write_poly_list(const std::vector<Polynomial>& ps, const VariableLayout& layout) {
    json arr = json::array();
    for (const auto& p : ps) arr.push_back(polynomial_to_json(p, layout));
    return arr;
}

json write_poly_matrix(const std::vector<Polynomial>& ps, const VariableLayout& layout, std::size_t rows,
                       std::size_t cols) {
    json out = json::array();
    for (std::size_t i = 0; i < rows; ++i) {
        json row = json::array();
        for (std::size_t c = 0; c < cols; ++c) row.push_back(polynomial_to_json(ps[i * cols + c], layout));
        out.push_back(row);
    }
    return out;
}

}  // namespace

json polynomial_to_json(const Polynomial& p, const VariableLayout& layout) {
    json terms = json::array();
    for (const auto& term : p.terms()) {
        json t;
        t["c"] = term.coeff;
        t["t"] = term.powers[VariableLayout::time()];
        std::vector<int> xs(layout.state_dim), as(layout.control_dim);
        for (std::size_t i = 0; i < layout.state_dim; ++i) xs[i] = term.powers[layout.state(i)];
        for (std::size_t j = 0; j < layout.control_dim; ++j) as[j] = term.powers[layout.control(j)];
        t["x"] = xs;
        t["a"] = as;
        terms.push_back(std::move(t));
    }
    return json{{"form", "polynomial"}, {"terms", std::move(terms)}};
}

Polynomial polynomial_from_json(const json& j, const VariableLayout& layout) {
    const std::size_t nv = layout.size();
    if (j.is_number()) {
        return Polynomial::constant(nv, j.get<double>());
    }
    if (!j.is_object() || !j.contains("form")) {
        throw ConfigError("coefficient form must be a number or an object with a 'form' tag");
    }
    const auto form = j.at("form").get<std::string>();
    if (form == "constant") {
        return Polynomial::constant(nv, j.at("value").get<double>());
    }
    if (form == "affine") {
        Polynomial p = Polynomial::constant(nv, j.value("const", 0.0));
        const double ct = j.value("t", 0.0);
        if (ct != 0.0) p += Polynomial::variable(nv, VariableLayout::time(), ct);
        const auto xs = read_coeffs(j, "x", layout.state_dim);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (xs[i] != 0.0) p += Polynomial::variable(nv, layout.state(i), xs[i]);
        }
        const auto as = read_coeffs(j, "a", layout.control_dim);
        for (std::size_t i = 0; i < as.size(); ++i) {
            if (as[i] != 0.0) p += Polynomial::variable(nv, layout.control(i), as[i]);
        }
        return p;
    }
    if (form == "polynomial") {
        Polynomial p(nv);
        for (const auto& term : j.at("terms")) {
            std::vector<int> powers(nv, 0);
            powers[VariableLayout::time()] = term.value("t", 0);
            const auto xs = read_powers(term, "x", layout.state_dim);
            const auto as = read_powers(term, "a", layout.control_dim);
            for (std::size_t i = 0; i < xs.size(); ++i) powers[layout.state(i)] = xs[i];
            for (std::size_t i = 0; i < as.size(); ++i) powers[layout.control(i)] = as[i];
            p.add_term(term.at("c").get<double>(), std::move(powers));
        }
        return p;
    }
    throw ConfigError("unknown coefficient form '" + form + "' (expected constant, affine or polynomial)");
}

json problem_to_json(const ProblemSpec& spec) {
    const auto& d = spec.dims();
    const auto lay = spec.layout();
    const auto& f = spec.forms();
    json j;
    j["name"] = spec.name();
    j["dims"] = {{"n", d.state}, {"d", d.noise}, {"k", d.control}, {"m", d.singular}};
    j["horizon"] = spec.horizon();
    j["x0"] = std::vector<double>(spec.x0().data(), spec.x0().data() + spec.x0().size());
    json c;
    c["drift"] = write_poly_list(f.drift, lay);
    c["diffusion"] = write_poly_matrix(f.diffusion, lay, d.state, d.noise);
    c["singular_gain"] = write_poly_matrix(f.singular_gain, lay, d.state, d.singular);
    c["running_cost"] = polynomial_to_json(f.running_cost, lay);
    c["terminal_cost"] = polynomial_to_json(f.terminal_cost, lay);
    c["singular_cost"] = write_poly_list(f.singular_cost, lay);
    j["coefficients"] = std::move(c);

    const auto& g = spec.declared();
    if (g.drift_x || g.diffusion_x || g.running_cost_x || g.terminal_cost_x) {
        json gj = json::object();
        if (g.drift_x) gj["drift_x"] = write_poly_matrix(*g.drift_x, lay, d.state, d.state);
        if (g.diffusion_x) {
            json blocks = json::array();
            for (std::size_t k = 0; k < d.noise; ++k) {
                std::vector<Polynomial> block(g.diffusion_x->begin() + static_cast<std::ptrdiff_t>(k * d.state * d.state),
                                              g.diffusion_x->begin() + static_cast<std::ptrdiff_t>((k + 1) * d.state * d.state));
                blocks.push_back(write_poly_matrix(block, lay, d.state, d.state));
            }
            gj["diffusion_x"] = std::move(blocks);
        }
        if (g.running_cost_x) gj["running_cost_x"] = write_poly_list(*g.running_cost_x, lay);
        if (g.terminal_cost_x) gj["terminal_cost_x"] = write_poly_list(*g.terminal_cost_x, lay);
        j["gradients"] = std::move(gj);
    }

    json grid = json::array();
    for (const auto& a : spec.u1_grid()) grid.push_back(std::vector<double>(a.data(), a.data() + a.size()));
    j["u1_grid"] = std::move(grid);
    const auto& box = spec.box();
    j["assumptions_box"] = {{"x_lo", box.x_lo}, {"x_hi", box.x_hi}, {"bound", box.bound},
                            {"samples", box.samples}, {"seed", box.seed}};
    j["convexity"] = {{"terminal_cost", spec.convexity().terminal_cost},
                      {"hamiltonian", spec.convexity().hamiltonian}};
    return j;
}

ProblemSpec problem_from_json(const json& j) {
    try {
        Dimensions dims;
        const auto& dj = j.at("dims");
        dims.state = dj.at("n").get<std::size_t>();
        dims.noise = dj.at("d").get<std::size_t>();
        dims.control = dj.at("k").get<std::size_t>();
        dims.singular = dj.at("m").get<std::size_t>();
        if (dims.state == 0 || dims.noise == 0 || dims.control == 0 || dims.singular == 0) {
            throw ConfigError("all dimensions (n, d, k, m) must be positive");
        }
        const VariableLayout lay{dims.state, dims.control};

        const auto x0v = j.at("x0").get<std::vector<double>>();
        Vector x0 = Eigen::Map<const Vector>(x0v.data(), static_cast<Eigen::Index>(x0v.size()));

        const auto& cj = j.at("coefficients");
        CoefficientForms forms;
        forms.drift = read_poly_list(cj.at("drift"), lay, dims.state, "drift");
        forms.diffusion = read_poly_matrix(cj.at("diffusion"), lay, dims.state, dims.noise, "diffusion");
        forms.singular_gain = cj.contains("singular_gain")
            ? read_poly_matrix(cj.at("singular_gain"), lay, dims.state, dims.singular, "singular_gain")
            : std::vector<Polynomial>(dims.state * dims.singular, Polynomial::constant(lay.size(), 0.0));
        forms.running_cost = polynomial_from_json(cj.at("running_cost"), lay);
        forms.terminal_cost = cj.contains("terminal_cost") ? polynomial_from_json(cj.at("terminal_cost"), lay)
                                                           : Polynomial::constant(lay.size(), 0.0);
        forms.singular_cost = cj.contains("singular_cost")
            ? read_poly_list(cj.at("singular_cost"), lay, dims.singular, "singular_cost")
            : std::vector<Polynomial>(dims.singular, Polynomial::constant(lay.size(), 0.0));

        DeclaredGradients declared;
        if (j.contains("gradients")) {
            const auto& gj = j.at("gradients");
            if (gj.contains("drift_x")) {
                declared.drift_x = read_poly_matrix(gj.at("drift_x"), lay, dims.state, dims.state, "gradients.drift_x");
            }
            if (gj.contains("diffusion_x")) {
                const auto& blocks = gj.at("diffusion_x");
                if (!blocks.is_array() || blocks.size() != dims.noise) {
                    throw ConfigError("gradients.diffusion_x must hold d blocks of n x n forms");
                }
                std::vector<Polynomial> all;
                for (const auto& b : blocks) {
                    auto m = read_poly_matrix(b, lay, dims.state, dims.state, "gradients.diffusion_x");
                    all.insert(all.end(), m.begin(), m.end());
                }
                declared.diffusion_x = std::move(all);
            }
            if (gj.contains("running_cost_x")) {
                declared.running_cost_x = read_poly_list(gj.at("running_cost_x"), lay, dims.state, "gradients.running_cost_x");
            }
            if (gj.contains("terminal_cost_x")) {
                declared.terminal_cost_x = read_poly_list(gj.at("terminal_cost_x"), lay, dims.state, "gradients.terminal_cost_x");
            }
        }

        std::vector<Vector> grid;
        for (const auto& pt : j.at("u1_grid")) {
            const auto v = pt.is_number() ? std::vector<double>{pt.get<double>()} : pt.get<std::vector<double>>();
            grid.emplace_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
        }

        AssumptionsBox box;
        if (j.contains("assumptions_box")) {
            const auto& bj = j.at("assumptions_box");
            box.x_lo = bj.value("x_lo", std::vector<double>{});
            box.x_hi = bj.value("x_hi", std::vector<double>{});
            box.bound = bj.value("bound", box.bound);
            box.samples = bj.value("samples", box.samples);
            box.seed = bj.value("seed", box.seed);
        }
        ConvexityDeclaration convexity;
        if (j.contains("convexity")) {
            convexity.terminal_cost = j.at("convexity").value("terminal_cost", false);
            convexity.hamiltonian = j.at("convexity").value("hamiltonian", false);
        }
        return ProblemSpec(j.value("name", std::string("custom")), dims, j.at("horizon").get<double>(),
                           std::move(x0), std::move(forms), std::move(grid), std::move(declared),
                           std::move(box), convexity);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid problem JSON: ") + e.what());
    }
}

json to_json(const ValidationReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks) {
        checks.push_back({{"name", c.name},
                          {"passed", c.passed},
                          {"measured", c.measured},
                          {"threshold", c.threshold},
                          {"detail", c.detail}});
    }
    return {{"ok", r.ok()}, {"checks", std::move(checks)}};
}

ProblemSpec load_problem_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open problem file " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse problem file " + path + ": " + e.what());
    }
    return problem_from_json(j);
}

}  // namespace stochpmp
