"""Built-in scenarios: the worked examples and the two prototypes.

Each entry is a plain configuration dictionary (see :mod:`.config`), so the
scenarios double as templates for user configs.
"""

from __future__ import annotations

import copy
import math

from .config import Config, config_from_dict
from .errors import ConfigError

__all__ = ["SCENARIOS", "get_scenario", "scenario_dict"]

_G_QUAD = ["2*(l^2-1)", "0"]
_HILL = "2*(x1/alpha)^b/(1+(x1/alpha)^b)-1"

SCENARIOS: dict[str, dict] = {
    "example-fil": {
        "description": "Nonlinear sliding with two branches l* = +-1/sqrt(2); linear combination crosses.",
        "system": {"n": 2, "h": "x1", "f_plus": ["1", "1"], "f_minus": ["1", "-2"], "G": _G_QUAD},
        "run": {"x0": [-0.5, 0.0], "t_span": [0.0, 2.0]},
        "task": {"point": [0.0, 0.0], "delta": 0.1, "transition": "poly_c1", "psi": "nonmono_sine"},
    },
    "example-reg": {
        "description": "Swapped fields: attracting branch l* = -1/sqrt(2) with x2' = 0.5606601...",
        "system": {"n": 2, "h": "x1", "f_plus": ["1", "-2"], "f_minus": ["1", "1"], "G": _G_QUAD},
        "run": {"x0": [-0.5, 0.0], "t_span": [0.0, 2.0]},
        "task": {
            "point": [0.0, 0.0], "delta": 0.01, "transition": "poly_c1",
            "probes": [[0.0, 0.0], [0.0, 1.0]], "settle_time": 0.1, "branch_seed": -0.7,
        },
    },
    "hill-extrinsic": {
        "description": "Hill-function switch pinched by a small external eps (completion G = 0).",
        "smooth": {"F": ["-x1", _HILL], "h": "x1", "params": {"alpha": 1.0, "b": 10.0}},
        "run": {"x0": [0.0, 1.0], "t_span": [0.0, 1.0]},
        "task": {"mode": "extrinsic", "eps": [0.04, 0.02, 0.01], "points": [[0.0]]},
    },
    "hill-intrinsic": {
        "description": "Hill-function switch pinched at eps = alpha*sqrt(2); completion (0, 2(l^2-1)).",
        "smooth": {
            "F": ["-x1", "2*(x1/mu)^b/(1+(x1/mu)^b)-1"], "h": "x1",
            "mu_of_eps": "eps/sqrt(2)", "M": 1.0, "manifolds": ["0"], "params": {"b": 10.0},
        },
        "run": {"x0": [0.0, 1.0], "t_span": [0.0, 1.0]},
        "task": {"mode": "intrinsic-given", "G": ["0", "2*(l^2-1)"], "eps": [0.1 * math.sqrt(2.0)],
                 "points": [[0.0]]},
    },
    "s2": {
        "description": "x1' = x1^2 pinched extrinsically: crossing only without G, quadratic completion.",
        "smooth": {"F": ["x1^2", "-x2"], "h": "x1"},
        "run": {"x0": [0.0, 1.0], "t_span": [0.0, 1.0]},
        "task": {"mode": "extrinsic", "eps": [0.1, 0.05, 0.025]},
    },
    "proto-thm5": {
        "description": "x1' = x1 - mu, x2' = mu x2 with mu = eps; one slow manifold x1 = eps.",
        "smooth": {"F": ["x1-mu", "mu*x2"], "h": "x1", "mu_of_eps": "eps", "M": 2.0, "manifolds": ["eps"]},
        "run": {"x0": [0.0, 1.0], "t_span": [0.0, 1.0]},
        "task": {"mode": "intrinsic-single", "eps": [0.1, 0.05, 0.025]},
    },
    "proto-thm6": {
        "description": "x1' = x1^2 - mu, x2' = mu x2 with mu = eps^2; slow manifolds x1 = +-eps.",
        "smooth": {"F": ["x1^2-mu", "mu*x2"], "h": "x1", "mu_of_eps": "eps^2", "M": 2.0,
                   "manifolds": ["eps", "-eps"]},
        "run": {"x0": [0.0, 1.0], "t_span": [0.0, 1.0], "initial_lambda": 0.5},
        "task": {"mode": "intrinsic-double", "eps": [0.1, 0.05, 0.025]},
    },
}


def scenario_dict(name: str) -> dict:
    try:
        raw = copy.deepcopy(SCENARIOS[name])
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    raw["name"] = name
    return raw


def get_scenario(name: str) -> Config:
    return config_from_dict(scenario_dict(name))
