#include <filesystem>
#include <sstream>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stochpmp/adjoint.hpp"
#include "stochpmp/cli.hpp"
#include "stochpmp/error.hpp"
#include "stochpmp/pmp.hpp"
#include "stochpmp/sde.hpp"

namespace py = pybind11;
using namespace stochpmp;

namespace {

cli::RunConfig parse(const std::string& config, const std::string& base_dir) {
    return cli::parse_config(nlohmann::json::parse(config), base_dir, {});
}

py::array_t<double> to_numpy(const PathArray& a, bool matrix = false) {
    std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(a.paths()), static_cast<py::ssize_t>(a.points()),
                                   static_cast<py::ssize_t>(a.rows())};
    if (matrix || a.cols() > 1) shape.push_back(static_cast<py::ssize_t>(a.cols()));
    py::array_t<double> out(shape);
    std::copy(a.raw().begin(), a.raw().end(), out.mutable_data());
    return out;
}

struct Prepared {
    cli::RunConfig config;
    cli::ResolvedCandidate candidate;
    NoiseBatch noise;
    TrajectoryEnsemble traj;
};

// Same construction as the command-line tool, so seeds give identical paths.
Prepared prepare(const std::string& config_text, const std::string& base_dir) {
    auto config = parse(config_text, base_dir);
    const auto& spec = *config.problem;
    auto candidate = cli::resolve_candidate(config.candidate, config);
    const auto grid = config.grid();
    auto noise = NoiseBatch::generate(config.paths, grid, spec.dims().noise, config.seed);
    auto traj = candidate.strict ? simulate_strict(spec, *candidate.strict, candidate.singular, grid, noise)
                                 : simulate_relaxed(spec, candidate.measure, candidate.singular, grid, noise);
    return {std::move(config), std::move(candidate), std::move(noise), std::move(traj)};
}

ProblemSpec problem_from_source(const std::string& source, const std::string& base_dir) {
    // Reuse the config parser so every accepted problem form works here too.
    nlohmann::json j = {{"problem", nlohmann::json::parse(source)}, {"monte_carlo", {{"seed", 0}}}};
    return *parse(j.dump(), base_dir).problem;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native core of stochpmp";

    static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
    static py::exception<NumericalError> numerical_error(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            py::set_error(config_error, e.what());
        } catch (const NumericalError& e) {
            py::set_error(numerical_error, e.what());
        } catch (const nlohmann::json::exception& e) {
            py::set_error(config_error, e.what());
        }
    });

    m.def("builtin_names", &builtin_problem_names);
    m.def("command_names", &cli::command_names);

    m.def(
        "problem_json",
        [](const std::string& source, const std::string& base_dir) {
            return problem_to_json(problem_from_source(source, base_dir)).dump();
        },
        py::arg("source"), py::arg("base_dir") = ".");

    m.def(
        "validate",
        [](const std::string& source, const std::string& base_dir) {
            return to_json(validate_problem(problem_from_source(source, base_dir))).dump();
        },
        py::arg("source"), py::arg("base_dir") = ".");

    m.def(
        "run_command",
        [](const std::string& command, const std::string& config, const std::string& out_dir,
           const std::string& base_dir) {
            const auto c = parse(config, base_dir);
            std::ostringstream log;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = cli::run_command(command, c, out_dir, log);
            }
            return py::make_tuple(code, log.str());
        },
        py::arg("command"), py::arg("config"), py::arg("out_dir"), py::arg("base_dir") = ".");

    m.def(
        "simulate",
        [](const std::string& config, const std::string& base_dir) {
            auto prepared = [&] {
                py::gil_scoped_release release;
                return prepare(config, base_dir);
            }();
            py::dict out;
            out["states"] = to_numpy(prepared.traj.states);
            const auto& noise = prepared.noise;
            py::array_t<double> dw({static_cast<py::ssize_t>(noise.paths()), static_cast<py::ssize_t>(noise.steps()),
                                    static_cast<py::ssize_t>(noise.dim())});
            std::copy(noise.raw().begin(), noise.raw().end(), dw.mutable_data());
            out["noise"] = dw;
            out["times"] = [&] {
                const auto grid = prepared.config.grid();
                py::array_t<double> t(static_cast<py::ssize_t>(grid.steps() + 1));
                for (std::size_t j = 0; j <= grid.steps(); ++j) t.mutable_at(j) = grid.time(j);
                return t;
            }();
            return out;
        },
        py::arg("config"), py::arg("base_dir") = ".");

    m.def(
        "adjoint",
        [](const std::string& config, const std::string& method, const std::string& base_dir) {
            if (method != "bsde" && method != "explicit") {
                throw ConfigError("adjoint method must be 'bsde' or 'explicit'");
            }
            AdjointPair pair;
            {
                py::gil_scoped_release release;
                const auto prepared = prepare(config, base_dir);
                const auto& spec = *prepared.config.problem;
                const auto& mu = prepared.candidate.measure;
                if (method == "explicit") {
                    const auto fund = fundamental_solutions(spec, mu, prepared.traj, prepared.noise);
                    pair = adjoint_explicit(spec, mu, prepared.traj, fund, prepared.config.regression);
                } else {
                    pair = adjoint_bsde(spec, mu, prepared.traj, prepared.noise, prepared.config.regression);
                }
            }
            py::dict out;
            out["p"] = to_numpy(pair.p);
            out["P"] = pair.has_P() ? py::object(to_numpy(pair.P, true)) : py::object(py::none());
            out["diagnostics"] = to_json(pair.diagnostics).dump();
            return out;
        },
        py::arg("config"), py::arg("method") = "bsde", py::arg("base_dir") = ".");

    m.def(
        "hamiltonian",
        [](const std::string& source, double t, const Vector& x, const Vector& a, const Vector& p, const Matrix& P,
           const std::string& base_dir) {
            const auto spec = problem_from_source(source, base_dir);
            return hamiltonian_strict(spec, t, x, a, p, P);
        },
        py::arg("problem"), py::arg("t"), py::arg("x"), py::arg("a"), py::arg("p"), py::arg("P"),
        py::arg("base_dir") = ".");
}
