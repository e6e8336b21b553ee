"""Python access to the stochpmp simulator and verifier.

Configurations are the same JSON objects the command-line tool reads; pass a
dict, a JSON string, or a path to a config file.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Union

from . import _core
from ._core import ConfigError, NumericalError

__all__ = [
    "ConfigError",
    "NumericalError",
    "builtin_names",
    "command_names",
    "problem",
    "validate",
    "run_command",
    "simulate",
    "cost",
    "verify",
    "certify",
    "chatter",
    "adjoint",
    "hamiltonian",
]

ConfigLike = Union[dict, str, os.PathLike]


def _config(config: ConfigLike) -> tuple[str, str]:
    """Returns (JSON text, directory that relative references resolve against)."""
    if isinstance(config, dict):
        return json.dumps(config), os.getcwd()
    if isinstance(config, os.PathLike) or (isinstance(config, str) and not config.lstrip().startswith("{")):
        path = Path(config)
        return path.read_text(), str(path.resolve().parent)
    return config, os.getcwd()


def builtin_names() -> list[str]:
    return _core.builtin_names()


def command_names() -> list[str]:
    return _core.command_names()


def problem(source: Any) -> dict:
    """Fully expanded problem definition for a built-in name, file path or inline object."""
    return json.loads(_core.problem_json(json.dumps(source), os.getcwd()))


def validate(source: Any) -> dict:
    """Standing-assumption probes: {"ok": bool, "checks": [{name, passed, measured, threshold, detail}]}."""
    return json.loads(_core.validate(json.dumps(source), os.getcwd()))


def run_command(command: str, config: ConfigLike, out_dir: Union[str, os.PathLike]) -> tuple[int, str]:
    """Runs one CLI subcommand; returns (exit code, log text)."""
    text, base = _config(config)
    return _core.run_command(command, text, str(out_dir), base)


def _run_and_read(command: str, config: ConfigLike, file: str) -> dict:
    with tempfile.TemporaryDirectory() as tmp:
        code, _ = run_command(command, config, tmp)
        out = json.loads((Path(tmp) / file).read_text())
    out["exit_code"] = code
    return out


def simulate(config: ConfigLike) -> dict:
    """States (M, N+1, n), Brownian increments (M, N, d) and grid times as numpy arrays."""
    text, base = _config(config)
    return _core.simulate(text, base)


def cost(config: ConfigLike) -> dict:
    return _run_and_read("cost", config, "cost.json")


def verify(config: ConfigLike) -> dict:
    return _run_and_read("verify", config, "report.json")


def certify(config: ConfigLike) -> dict:
    return _run_and_read("certify", config, "certificate.json")


def chatter(config: ConfigLike) -> dict:
    return _run_and_read("chatter", config, "chatter.json")


def adjoint(config: ConfigLike, method: str = "bsde") -> dict:
    """p as (M, N+1, n); P as (M, N+1, n, d) for the BSDE route, None for the explicit one."""
    text, base = _config(config)
    out = _core.adjoint(text, method, base)
    out["diagnostics"] = json.loads(out["diagnostics"])
    return out


def hamiltonian(problem_source: Any, t: float, x, a, p, P) -> float:
    """Strict Hamiltonian h + b.p + tr(sigma' P) at one point."""
    import numpy as np

    return _core.hamiltonian(
        json.dumps(problem_source),
        float(t),
        np.atleast_1d(np.asarray(x, dtype=float)),
        np.atleast_1d(np.asarray(a, dtype=float)),
        np.atleast_1d(np.asarray(p, dtype=float)),
        np.atleast_2d(np.asarray(P, dtype=float)),
        os.getcwd(),
    )
