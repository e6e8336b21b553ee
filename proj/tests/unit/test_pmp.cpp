#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "stochpmp/adjoint.hpp"
#include "stochpmp/pmp.hpp"

using namespace stochpmp;
using testing_support::data_path;
using testing_support::fixture;
using testing_support::vec;

namespace {

DiscreteMeasure half_pm1() { return {{vec({-1}), vec({1})}, {0.5, 0.5}}; }

struct Checked {
    ProblemSpec spec;
    TimeGrid grid;
    NoiseBatch noise;
    Candidate candidate;
    TrajectoryEnsemble traj;
    AdjointPair adjoint;
};

Checked prepare(ProblemSpec spec, Candidate candidate, std::size_t steps, std::size_t paths, std::uint64_t seed) {
    TimeGrid grid(spec.horizon(), steps);
    auto noise = NoiseBatch::generate(paths, grid, spec.dims().noise, seed);
    auto traj = simulate_relaxed(spec, candidate.measure, candidate.singular, grid, noise);
    auto adjoint = adjoint_bsde(spec, candidate.measure, traj, noise, {});
    return {std::move(spec), grid, std::move(noise), std::move(candidate), std::move(traj), std::move(adjoint)};
}

Candidate relaxed(std::size_t steps, const DiscreteMeasure& m, std::size_t singular_dim = 1) {
    return {RelaxedControl::constant(steps, m), SingularControl::zero(steps, singular_dim), false};
}

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

TEST_CASE("Hamiltonian values") {
    const auto spec = fixture("nonlinear.json");
    // (a - x^2/2) p + (0.3 + 0.1 x) P + x^2
    CHECK(hamiltonian_strict(spec, 0.0, vec({1.0}), vec({1.0}), vec({2.0}), scalar(3.0)) ==
          doctest::Approx(0.5 * 2.0 + 0.4 * 3.0 + 1.0));
    const auto e2 = builtin_problem("example2_separated");
    // a p + x^2 + (1 - a^2)^2
    CHECK(hamiltonian_strict(e2, 0.0, vec({0.5}), vec({0.0}), vec({0.0}), scalar(0.0)) == doctest::Approx(1.25));
    CHECK(hamiltonian_relaxed(e2, 0.0, vec({0.0}), half_pm1(), vec({3.0}), scalar(0.0)) == 0.0);
}

TEST_CASE("relaxed Hamiltonian of a Dirac measure is the strict one") {
    const auto spec = fixture("nonlinear.json");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        const Vector x = vec({u(rng)}), a = vec({u(rng)}), p = vec({u(rng)});
        const Matrix P = scalar(u(rng));
        CHECK(hamiltonian_relaxed(spec, 0.3, x, DiscreteMeasure::dirac(a), p, P) ==
              hamiltonian_strict(spec, 0.3, x, a, p, P));
    }
}

TEST_CASE("relaxed Hamiltonian lies between the grid extremes") {
    const auto spec = builtin_problem("example2_stochastic", {.u1_points = 5});
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> w01(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const Vector x = vec({u(rng)}), p = vec({u(rng)});
        const Matrix P = scalar(u(rng));
        std::vector<Vector> atoms;
        std::vector<double> weights;
        double total = 0.0;
        for (const auto& a : spec.u1_grid()) {
            atoms.push_back(a);
            weights.push_back(w01(rng) + 1e-3);
            total += weights.back();
        }
        for (auto& w : weights) w /= total;
        const double h = hamiltonian_relaxed(spec, 0.0, x, DiscreteMeasure(atoms, weights), p, P);
        const auto best = minimize_hamiltonian(spec, 0.0, x, p, P);
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& a : spec.u1_grid()) worst = std::max(worst, hamiltonian_strict(spec, 0.0, x, a, p, P));
        CHECK(h >= best.value - 1e-12);
        CHECK(h <= worst + 1e-12);
    }
}

TEST_CASE("grid minimization matches brute force and breaks ties toward the first point") {
    const auto spec = fixture("nonlinear.json");
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        const Vector x = vec({u(rng)}), p = vec({u(rng)});
        const Matrix P = scalar(u(rng));
        const auto best = minimize_hamiltonian(spec, 0.1, x, p, P);
        std::size_t arg = 0;
        double value = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < spec.u1_grid().size(); ++k) {
            const double h = hamiltonian_strict(spec, 0.1, x, spec.u1_grid()[k], p, P);
            if (h < value) {
                value = h;
                arg = k;
            }
        }
        CHECK(best.index == arg);
        CHECK(best.value == value);
        // Shifting x only moves the a-independent part here, so with p = 0 the argmin stays put.
        const auto shifted = minimize_hamiltonian(spec, 0.1, x.array() + 0.5, vec({0.0}), P);
        const auto base = minimize_hamiltonian(spec, 0.1, x, vec({0.0}), P);
        CHECK(shifted.index == base.index);
    }
    const auto e1 = builtin_problem("example1");
    const auto tie = minimize_hamiltonian(e1, 0.0, vec({0.3}), vec({0.0}), scalar(0.0));
    CHECK(tie.index == 0);
    CHECK(tie.point(0) == -1.0);
}

TEST_CASE("tolerances round trip and reject unknown keys") {
    Tolerances t;
    t.hamiltonian = 2e-3;
    t.vi_allowance = 0.5;
    const auto back = tolerances_from_json(to_json(t));
    CHECK(back.hamiltonian == 2e-3);
    CHECK(back.vi_allowance == 0.5);
    CHECK_THROWS_AS(tolerances_from_json(nlohmann::json{{"tol_X", 1.0}}), ConfigError);
}

TEST_CASE("example2_separated: the symmetric mixture passes, u = 0 fails") {
    auto good = prepare(builtin_problem("example2_separated"), relaxed(100, half_pm1()), 100, 1, 1);
    const auto dirs = default_directions(good.spec, good.candidate.singular);
    const auto ok = verify_necessary(good.spec, good.candidate, good.adjoint, good.traj, {}, dirs);
    CHECK(ok.passed());
    CHECK(ok.record("hamiltonian-minimality").statistic == 0.0);
    CHECK(ok.record("hamiltonian-minimality").detail.at("worst_gap").get<double>() == 0.0);

    auto bad = prepare(builtin_problem("example2_separated"), relaxed(100, DiscreteMeasure::dirac(vec({0}))), 100, 1, 1);
    bad.candidate.strict = true;
    const auto ko = verify_necessary(bad.spec, bad.candidate, bad.adjoint, bad.traj, {}, dirs);
    CHECK_FALSE(ko.passed());
    CHECK_FALSE(ko.record("hamiltonian-minimality").passed);
    CHECK(ko.record("hamiltonian-minimality").detail.at("worst_gap").get<double>() == doctest::Approx(1.0));
    CHECK(ko.record("variational-inequality").statistic == doctest::Approx(-1.0));
    CHECK_FALSE(ko.record("variational-inequality").passed);
}

TEST_CASE("example2_stochastic: the mixture is not minimal once the state spreads") {
    auto c = prepare(builtin_problem("example2_stochastic"), relaxed(100, half_pm1()), 100, 2000, 3);
    const auto r = verify_necessary(c.spec, c.candidate, c.adjoint, c.traj, {});
    CHECK_FALSE(r.record("hamiltonian-minimality").passed);
    CHECK(r.record("hamiltonian-minimality").statistic > 0.5);
}

TEST_CASE("singular_block: zero singular control passes, an injected impulse fails flat-off") {
    const auto spec = builtin_problem("singular_block");
    auto c = prepare(spec, relaxed(100, DiscreteMeasure::dirac(vec({0}))), 100, 2000, 11);
    const auto dirs = default_directions(c.spec, c.candidate.singular);
    const auto r = verify_necessary(c.spec, c.candidate, c.adjoint, c.traj, {}, dirs);
    CHECK(r.passed());
    CHECK(r.record("nonnegativity").passed);
    CHECK(r.record("flat-off").statistic == 0.0);

    Candidate injected{RelaxedControl::constant(100, DiscreteMeasure::dirac(vec({0}))),
                       SingularControl::impulse(100, 50, vec({1})), false};
    auto d = prepare(spec, injected, 100, 2000, 11);
    const auto r2 = verify_necessary(d.spec, d.candidate, d.adjoint, d.traj, {}, dirs);
    CHECK_FALSE(r2.record("flat-off").passed);
    CHECK(r2.record("flat-off").statistic > 0.5);
}

TEST_CASE("fused Dirac directions agree with the direct estimate") {
    auto c = prepare(fixture("nonlinear.json"), relaxed(50, half_pm1()), 50, 400, 4);
    auto fused = default_directions(c.spec, c.candidate.singular);
    auto direct = fused;
    for (auto& d : direct) {
        if (d.grid_point) {
            d.measure = RelaxedControl::constant(50, DiscreteMeasure::dirac(c.spec.u1_grid()[*d.grid_point]));
            d.grid_point.reset();
        }
    }
    const auto a = verify_necessary(c.spec, c.candidate, c.adjoint, c.traj, {}, fused);
    const auto b = verify_necessary(c.spec, c.candidate, c.adjoint, c.traj, {}, direct);
    const auto& da = a.record("variational-inequality").detail.at("directions");
    const auto& db = b.record("variational-inequality").detail.at("directions");
    REQUIRE(da.size() == db.size());
    for (std::size_t i = 0; i < da.size(); ++i) {
        CHECK(da[i].at("value").get<double>() == doctest::Approx(db[i].at("value").get<double>()).epsilon(1e-12));
    }
}

TEST_CASE("sufficiency certificates") {
    SUBCASE("singular_block with zero singular control") {
        auto c = prepare(builtin_problem("singular_block"), relaxed(100, DiscreteMeasure::dirac(vec({0}))), 100, 2000, 11);
        const auto cert = certify_sufficient(c.spec, c.candidate, c.adjoint, c.traj, {},
                                             default_directions(c.spec, c.candidate.singular));
        CHECK(cert.certified);
        CHECK(cert.terminal.passed);
        CHECK(cert.hamiltonian.passed);
    }
    SUBCASE("example2_separated at the mixture") {
        auto c = prepare(builtin_problem("example2_separated"), relaxed(100, half_pm1()), 100, 1, 1);
        CHECK(certify_sufficient(c.spec, c.candidate, c.adjoint, c.traj, {}).certified);
    }
    SUBCASE("a concave terminal cost is not certified") {
        std::ifstream in(data_path("nonlinear.json"));
        auto j = nlohmann::json::parse(in);
        j["coefficients"]["terminal_cost"] = {{"form", "polynomial"}, {"terms", {{{"c", -1.0}, {"x", {2}}}}}};
        auto c = prepare(problem_from_json(j), relaxed(50, DiscreteMeasure::dirac(vec({0}))), 50, 200, 2);
        const auto cert = certify_sufficient(c.spec, c.candidate, c.adjoint, c.traj, {});
        CHECK_FALSE(cert.terminal.passed);
        CHECK(cert.terminal.violations > 0);
        CHECK_FALSE(cert.certified);
    }
}

TEST_CASE("certified candidates beat random competitors") {
    std::mt19937_64 rng(2024);
    SUBCASE("singular_block") {
        const auto spec = builtin_problem("singular_block");
        TimeGrid grid(1.0, 50);
        const auto noise = NoiseBatch::generate(300, grid, 1, 6);
        const auto mu = RelaxedControl::constant(50, DiscreteMeasure::dirac(vec({0})));
        const auto base_traj = simulate_relaxed(spec, mu, SingularControl::zero(50, 1), grid, noise);
        const auto base = path_cost_parts(spec, mu, SingularControl::zero(50, 1), base_traj).total;
        std::uniform_int_distribution<std::size_t> cell(0, 49);
        std::uniform_real_distribution<double> size(0.0, 1.0);
        for (int i = 0; i < 200; ++i) {
            const auto eta = SingularControl::impulse(50, cell(rng), vec({size(rng)}));
            const auto t = simulate_relaxed(spec, mu, eta, grid, noise);
            const auto cost = path_cost_parts(spec, mu, eta, t).total;
            std::vector<double> diff(cost.size());
            for (std::size_t p = 0; p < diff.size(); ++p) diff[p] = cost[p] - base[p];
            const auto e = estimate_mean(diff);
            CHECK(e.mean >= -3.0 * e.std_error);
        }
    }
    SUBCASE("example2_separated") {
        const auto spec = builtin_problem("example2_separated");
        TimeGrid grid(1.0, 40);
        const auto noise = NoiseBatch::generate(1, grid, 1, 1);
        const auto zero = SingularControl::zero(40, 1);
        const double best = estimate_cost(spec, RelaxedControl::constant(40, half_pm1()), zero, grid, noise).mean;
        std::uniform_real_distribution<double> w(0.0, 1.0);
        for (int i = 0; i < 200; ++i) {
            std::vector<DiscreteMeasure> cells;
            for (std::size_t j = 0; j < 40; ++j) {
                const double a = w(rng);
                cells.push_back(DiscreteMeasure({vec({-1}), vec({0}), vec({1})}, {a * 0.5, 1.0 - a, a * 0.5}));
            }
            CHECK(estimate_cost(spec, RelaxedControl(1, 40, cells), zero, grid, noise).mean >= best - 1e-12);
        }
    }
}
