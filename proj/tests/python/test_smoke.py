import json
from pathlib import Path

import numpy as np
import pytest

import stochpmp

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def test_builtins_listed():
    assert set(stochpmp.builtin_names()) >= {"example1", "example2_separated", "example2_stochastic", "singular_block"}
    assert "verify" in stochpmp.command_names()


def test_problem_expansion():
    spec = stochpmp.problem("example1")
    assert spec["dims"]["n"] == 1
    assert spec["horizon"] == 1.0


def test_validation_flags_negative_singular_cost():
    assert stochpmp.validate("example1")["ok"]
    spec = stochpmp.problem("singular_block")
    spec["coefficients"]["singular_cost"] = [-1.0]
    report = stochpmp.validate(spec)
    assert not report["ok"]
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    assert "singular_cost_nonnegative" in failed


def test_simulate_shapes_and_determinism():
    cfg = {
        "problem": "example2_stochastic",
        "grid": {"N": 20},
        "monte_carlo": {"M": 7, "seed": 3},
        "candidate": {"control": {"builtin": "constant", "value": [0]}},
    }
    a = stochpmp.simulate(cfg)
    b = stochpmp.simulate(cfg)
    assert a["states"].shape == (7, 21, 1)
    assert a["noise"].shape == (7, 20, 1)
    assert np.array_equal(a["states"], b["states"])
    # With v = 0 the state is the running sum of the increments.
    assert np.allclose(a["states"][:, 1:, 0], np.cumsum(a["noise"][:, :, 0], axis=1))


def test_example1_cost_and_relaxed_zero():
    sw = stochpmp.cost(CONFIGS / "example1_switching.json")
    assert sw["cost"] == pytest.approx(1 / 192, rel=1e-3)
    mix = stochpmp.cost(CONFIGS / "example1_chatter.json")
    assert abs(mix["cost"]) <= 1e-12


def test_verify_separated():
    good = stochpmp.verify(CONFIGS / "example2_separated_mixture.json")
    bad = stochpmp.verify(CONFIGS / "example2_separated_zero.json")
    assert good["passed"] and good["exit_code"] == 0
    assert not bad["passed"] and bad["exit_code"] == 1


def test_adjoint_routes():
    cfg = json.loads((CONFIGS / "example2_mixture.json").read_text())
    cfg["monte_carlo"]["M"] = 500
    bsde = stochpmp.adjoint(cfg, "bsde")
    expl = stochpmp.adjoint(cfg, "explicit")
    assert bsde["p"].shape == (500, 101, 1)
    assert bsde["P"].shape == (500, 101, 1, 1)
    assert expl["P"] is None
    assert np.sqrt(np.mean((bsde["p"] - expl["p"]) ** 2)) < 0.05


def test_hamiltonian_value():
    # a p + x^2 + (1 - a^2)^2 at x = 0.5, a = 0
    assert stochpmp.hamiltonian("example2_separated", 0.0, [0.5], [0.0], [0.0], [[0.0]]) == pytest.approx(1.25)


def test_errors_map_to_python_exceptions():
    with pytest.raises(stochpmp.ConfigError):
        stochpmp.simulate({"problem": "nope", "monte_carlo": {"seed": 1}})
    with pytest.raises(ValueError):
        stochpmp.simulate({"problem": "example1"})
