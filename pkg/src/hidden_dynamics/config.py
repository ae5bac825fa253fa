"""JSON run configurations.

A configuration is a mapping with some of these blocks::

    {
      "name": "example-reg",
      "system": {"n": 2, "h": "x1", "f_plus": [...], "f_minus": [...], "G": [...], "params": {}},
      "smooth": {"F": [...], "h": "x1", "mu_of_eps": "eps^2", "M": 2, "manifolds": [...], "params": {}},
      "run":    {"x0": [...], "t_span": [0, 2], "options": {"max_step": 0.05}},
      "task":   {"delta": 0.01, "transition": "poly_c1", "eps": [...], "probes": [...], ...}
    }

``smooth`` either describes a family to pinch (key ``F``) or a plain smooth
field to integrate (key ``field``, as exported by ``regularize``).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError, ExpressionError, ModelError
from .expressions import parse
from .integrator import IntegratorOptions
from .pinch import SmoothSystem
from .regularize import function_table
from .system import SwitchingSystem

__all__ = ["Config", "RunBlock", "load_config", "config_from_dict"]


@dataclass(frozen=True)
class RunBlock:
    x0: tuple | None = None
    t_span: tuple = (0.0, 1.0)
    options: IntegratorOptions = field(default_factory=IntegratorOptions)
    initial_lambda: float = 0.0


@dataclass(frozen=True, eq=False)
class Config:
    name: str
    system: SwitchingSystem | None
    smooth: SmoothSystem | None
    smooth_field: tuple | None
    smooth_params: dict
    run: RunBlock
    task: dict
    raw: dict

    def with_param(self, name: str, value: float) -> "Config":
        """Copy with one model parameter replaced (system and smooth blocks)."""
        raw = copy.deepcopy(self.raw)
        hit = False
        for block in ("system", "smooth"):
            if block in raw and name in raw[block].get("params", {}):
                raw[block]["params"][name] = value
                hit = True
        if not hit:
            raise ConfigError(f"parameter {name!r} is not defined in the configuration")
        return config_from_dict(raw)


def _strings(block, key, where, required=True):
    v = block.get(key)
    if v is None:
        if required:
            raise ConfigError(f"{where}.{key} is required")
        return None
    if not isinstance(v, list) or not all(isinstance(s, (str, int, float)) for s in v):
        raise ConfigError(f"{where}.{key} must be a list of expression strings")
    return [str(s) for s in v]


def _params(block, where):
    p = block.get("params", {}) or {}
    if not isinstance(p, dict):
        raise ConfigError(f"{where}.params must be an object")
    try:
        return {str(k): float(v) for k, v in p.items()}
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.params values must be numbers") from None


def _system(block) -> SwitchingSystem:
    fp = _strings(block, "f_plus", "system")
    fm = _strings(block, "f_minus", "system")
    G = _strings(block, "G", "system", required=False)
    n = block.get("n", len(fp))
    if len(fp) != n or len(fm) != n or (G is not None and len(G) != n):
        raise ConfigError(f"system arrays must all have length n={n}")
    try:
        return SwitchingSystem.from_strings(fp, fm, str(block.get("h", "x1")), G, _params(block, "system"),
                                            functions=function_table(), name=str(block.get("name", "")))
    except (ExpressionError, ModelError) as exc:
        raise ConfigError(f"system: {exc}") from None


def _smooth(block):
    params = _params(block, "smooth")
    if "field" in block:
        try:
            return None, tuple(parse(s, function_table()) for s in _strings(block, "field", "smooth")), params
        except ExpressionError as exc:
            raise ConfigError(f"smooth.field: {exc}") from None
    try:
        sm = SmoothSystem.from_strings(
            _strings(block, "F", "smooth"), str(block.get("h", "x1")), block.get("mu_of_eps"),
            block.get("M"), _strings(block, "manifolds", "smooth", required=False) or (), params,
        )
    except (ExpressionError, ModelError) as exc:
        raise ConfigError(f"smooth: {exc}") from None
    return sm, None, params


def _run(block) -> RunBlock:
    x0 = block.get("x0")
    t_span = block.get("t_span", [0.0, 1.0])
    try:
        t_span = tuple(float(t) for t in t_span)
        if len(t_span) != 2 or t_span[1] < t_span[0]:
            raise ValueError
    except (TypeError, ValueError):
        raise ConfigError("run.t_span must be [t0, t1] with t1 >= t0") from None
    try:
        opts = IntegratorOptions.from_dict(block.get("options"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"run.options: {exc}") from None
    return RunBlock(None if x0 is None else tuple(float(v) for v in x0), t_span, opts,
                    float(block.get("initial_lambda", 0.0)))


def config_from_dict(raw: dict[str, Any]) -> Config:
    """Validate and build a :class:`Config`.

    Raises
    ------
    ConfigError
        Unparseable expressions, inconsistent lengths, undefined parameters
        or malformed blocks.
    """
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(raw) - {"name", "system", "smooth", "run", "task", "description"}
    if unknown:
        raise ConfigError(f"unknown configuration blocks {sorted(unknown)}")
    if "system" not in raw and "smooth" not in raw:
        raise ConfigError("configuration needs a 'system' or a 'smooth' block")
    system = _system(raw["system"]) if "system" in raw else None
    smooth, smooth_field, smooth_params = _smooth(raw["smooth"]) if "smooth" in raw else (None, None, {})
    run = _run(raw.get("run", {}))
    n = system.n if system is not None else (smooth.n if smooth is not None else len(smooth_field))
    if run.x0 is not None and len(run.x0) != n:
        raise ConfigError(f"run.x0 must have {n} components")
    task = dict(raw.get("task", {}))
    return Config(str(raw.get("name", "")), system, smooth, smooth_field, smooth_params, run, task, raw)


def load_config(path: str | Path) -> Config:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return config_from_dict(raw)
