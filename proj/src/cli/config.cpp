#include <algorithm>
#include <fstream>
#include <set>

#include "stochpmp/cli.hpp"
#include "stochpmp/error.hpp"
#include "stochpmp/io.hpp"

namespace stochpmp::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

const json& object_at(const json& j, const char* key, const json& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_object()) {
        throw ConfigError(std::string("'") + key + "' must be an object");
    }
    return j.at(key);
}

std::size_t positive_count(const json& j, const char* key, const std::string& where) {
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() <= 0) {
        throw ConfigError(where + "." + key + " must be a positive integer");
    }
    return v.get<std::size_t>();
}

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

ProblemSpec load_problem(const json& source, const std::filesystem::path& base) {
    if (source.is_string()) {
        const auto name = source.get<std::string>();
        const auto names = builtin_problem_names();
        if (std::find(names.begin(), names.end(), name) != names.end()) return builtin_problem(name);
        return load_problem_file(resolve_path(base, name).string());
    }
    if (!source.is_object()) {
        throw ConfigError("'problem' must be a built-in name, a file path or an object");
    }
    if (source.contains("builtin")) {
        reject_unknown(source, {"builtin", "kappa", "horizon", "u1_points"}, "problem");
        BuiltinOptions opts;
        if (source.contains("kappa")) opts.kappa = source.at("kappa").get<double>();
        if (source.contains("horizon")) opts.horizon = source.at("horizon").get<double>();
        if (source.contains("u1_points")) opts.u1_points = positive_count(source, "u1_points", "problem");
        return builtin_problem(source.at("builtin").get<std::string>(), opts);
    }
    if (source.contains("file")) {
        reject_unknown(source, {"file"}, "problem");
        return load_problem_file(resolve_path(base, source.at("file").get<std::string>()).string());
    }
    return problem_from_json(source);
}

json load_if_file(const json& source, const std::filesystem::path& base) {
    if (source.is_string()) return read_json_file(resolve_path(base, source.get<std::string>()));
    return source;
}

}  // namespace

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir, const Overrides& overrides) {
    try {
        if (!j.is_object()) {
            throw ConfigError("config must be a JSON object");
        }
        reject_unknown(j,
                       {"problem", "grid", "monte_carlo", "regression", "tolerances", "candidate", "direction",
                        "chatter", "adjoint", "verify", "export"},
                       "config");
        RunConfig c;
        c.base_dir = base_dir;
        if (!j.contains("problem")) {
            throw ConfigError("config needs a 'problem'");
        }
        c.problem_source = j.at("problem");
        c.problem = std::make_shared<const ProblemSpec>(load_problem(c.problem_source, base_dir));

        const json empty = json::object();
        const auto& grid = object_at(j, "grid", empty);
        reject_unknown(grid, {"N"}, "grid");
        if (grid.contains("N")) c.steps = positive_count(grid, "N", "grid");

        const auto& mc = object_at(j, "monte_carlo", empty);
        reject_unknown(mc, {"M", "seed"}, "monte_carlo");
        if (mc.contains("M")) c.paths = positive_count(mc, "M", "monte_carlo");
        if (mc.contains("seed")) {
            const auto& seed = mc.at("seed");
            if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
                throw ConfigError("monte_carlo.seed must be a nonnegative integer");
            }
            c.seed = mc.at("seed").get<std::uint64_t>();
        } else if (!overrides.seed) {
            throw ConfigError("monte_carlo.seed is required (or pass --seed)");
        }

        const auto& reg = object_at(j, "regression", empty);
        reject_unknown(reg, {"degree"}, "regression");
        if (reg.contains("degree")) c.regression.degree = positive_count(reg, "degree", "regression");

        c.tolerances = tolerances_from_json(object_at(j, "tolerances", empty));

        if (j.contains("candidate")) {
            if (!j.at("candidate").is_object()) throw ConfigError("'candidate' must be an object");
            c.candidate = j.at("candidate");
            reject_unknown(c.candidate, {"control", "singular"}, "candidate");
        }
        if (j.contains("direction")) {
            if (!j.at("direction").is_object()) throw ConfigError("'direction' must be an object");
            c.direction = j.at("direction");
            reject_unknown(c.direction, {"control", "singular"}, "direction");
        }

        const auto& chatter = object_at(j, "chatter", empty);
        reject_unknown(chatter, {"levels"}, "chatter");
        if (chatter.contains("levels")) {
            c.chatter_levels.clear();
            for (const auto& v : chatter.at("levels")) {
                if (!v.is_number_integer() || v.get<long long>() <= 0) {
                    throw ConfigError("chatter.levels must be positive integers");
                }
                c.chatter_levels.push_back(v.get<std::size_t>());
            }
            if (c.chatter_levels.empty()) throw ConfigError("chatter.levels is empty");
        }

        const auto& adj = object_at(j, "adjoint", empty);
        reject_unknown(adj, {"method"}, "adjoint");
        if (adj.contains("method")) {
            c.adjoint_method = adj.at("method").get<std::string>();
            if (c.adjoint_method != "bsde" && c.adjoint_method != "explicit") {
                throw ConfigError("adjoint.method must be 'bsde' or 'explicit'");
            }
        }

        const auto& verify = object_at(j, "verify", empty);
        reject_unknown(verify, {"directions"}, "verify");
        if (verify.contains("directions")) {
            const auto d = verify.at("directions").get<std::string>();
            if (d != "default" && d != "none") throw ConfigError("verify.directions must be 'default' or 'none'");
            c.default_directions = d == "default";
        }

        const auto& exp = object_at(j, "export", empty);
        reject_unknown(exp, {"csv", "binary"}, "export");
        if (exp.contains("csv")) c.export_csv = exp.at("csv").get<bool>();
        if (exp.contains("binary")) c.export_binary = exp.at("binary").get<bool>();

        if (overrides.seed) c.seed = *overrides.seed;
        if (overrides.paths) c.paths = *overrides.paths;
        if (overrides.steps) c.steps = *overrides.steps;
        if (c.paths == 0 || c.steps == 0) throw ConfigError("paths and steps must be positive");
        if (c.problem->deterministic() && c.paths != 1) {
            c.paths = 1;
            c.paths_forced = true;
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
}

RunConfig load_config(const std::filesystem::path& file, const Overrides& overrides) {
    return parse_config(read_json_file(file), file.has_parent_path() ? file.parent_path() : ".", overrides);
}

json RunConfig::echo() const {
    json out = {{"problem", problem_to_json(*problem)},
                {"problem_source", problem_source},
                {"grid", {{"N", steps}, {"T", problem->horizon()}}},
                {"monte_carlo", {{"M", paths}, {"seed", seed}, {"paths_forced", paths_forced}}},
                {"regression", {{"degree", regression.degree}}},
                {"tolerances", to_json(tolerances)},
                {"candidate", candidate},
                {"chatter", {{"levels", chatter_levels}}},
                {"adjoint", {{"method", adjoint_method}}},
                {"verify", {{"directions", default_directions ? "default" : "none"}}},
                {"export", {{"csv", export_csv}, {"binary", export_binary}}}};
    if (!direction.is_null()) out["direction"] = direction;
    // Recorded for the reader; a failed probe does not stop the run.
    try {
        out["validation"] = to_json(validate_problem(*problem));
    } catch (const NumericalError& e) {
        out["validation"] = {{"ok", false}, {"error", e.what()}};
    }
    return out;
}

ResolvedCandidate resolve_candidate(const json& source_in, const RunConfig& config) {
    try {
        const auto& spec = *config.problem;
        const std::size_t cells = config.steps;
        if (!source_in.is_object() || !source_in.contains("control")) {
            throw ConfigError("candidate.control is required");
        }
        std::optional<StrictControl> strict;
        std::optional<RelaxedControl> measure;
        const json control = load_if_file(source_in.at("control"), config.base_dir);
        if (!control.is_object()) throw ConfigError("candidate control must be an object or a file path");
        if (control.contains("builtin")) {
            const auto kind = control.at("builtin").get<std::string>();
            if (kind == "switching") {
                reject_unknown(control, {"builtin", "blocks"}, "switching control");
                if (spec.dims().control != 1) throw ConfigError("switching control needs a scalar control");
                strict = switching_control(cells, positive_count(control, "blocks", "switching control"));
            } else if (kind == "constant") {
                reject_unknown(control, {"builtin", "value"}, "constant control");
                const auto v = control.at("value").get<std::vector<double>>();
                strict = StrictControl::constant(cells, Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
            } else if (kind == "mixture") {
                reject_unknown(control, {"builtin", "atoms", "weights"}, "mixture control");
                DiscreteMeasure mu;
                for (const auto& a : control.at("atoms")) {
                    const auto v = a.get<std::vector<double>>();
                    mu.atoms.emplace_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
                }
                mu.weights = control.at("weights").get<std::vector<double>>();
                measure = RelaxedControl::constant(cells, mu);
            } else {
                throw ConfigError("unknown built-in control '" + kind + "' (switching, constant, mixture)");
            }
        } else {
            const auto type = control.value("type", std::string());
            if (type == "strict") {
                strict = strict_control_from_json(control);
            } else if (type == "relaxed") {
                measure = relaxed_control_from_json(control);
            } else {
                throw ConfigError("candidate control needs 'builtin' or 'type' (strict | relaxed)");
            }
        }
        if (strict) {
            strict->check_on_grid(spec);
            measure = dirac_embed(*strict);
        } else {
            measure->check_on_grid(spec);
        }

        const std::size_t m = spec.dims().singular;
        std::optional<SingularControl> singular;
        if (!source_in.contains("singular")) {
            singular = SingularControl::zero(cells, m);
        } else {
            const json s = load_if_file(source_in.at("singular"), config.base_dir);
            if (!s.is_object()) throw ConfigError("candidate singular control must be an object or a file path");
            if (s.contains("builtin")) {
                const auto kind = s.at("builtin").get<std::string>();
                if (kind == "zero") {
                    reject_unknown(s, {"builtin"}, "zero singular control");
                    singular = SingularControl::zero(cells, m);
                } else if (kind == "impulse") {
                    reject_unknown(s, {"builtin", "cell", "size"}, "impulse singular control");
                    const auto cell = s.at("cell").get<long long>();
                    if (cell < 0 || static_cast<std::size_t>(cell) >= cells) {
                        throw ConfigError("impulse cell must lie in [0, N)");
                    }
                    const auto v = s.at("size").get<std::vector<double>>();
                    singular = SingularControl::impulse(cells, static_cast<std::size_t>(cell),
                                                        Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
                } else {
                    throw ConfigError("unknown built-in singular control '" + kind + "' (zero, impulse)");
                }
            } else {
                singular = singular_control_from_json(s);
            }
        }
        if (singular->dim() != m) {
            throw ConfigError("singular control dimension differs from m = " + std::to_string(m));
        }
        return {strict, *measure, *singular};
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed candidate: ") + e.what());
    }
}

}  // namespace stochpmp::cli
