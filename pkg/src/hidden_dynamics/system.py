"""Discontinuous systems with a nonlinear switching term.

A :class:`SwitchingSystem` holds the two smooth fields ``f_plus`` and
``f_minus`` (valid where ``h > 0`` and ``h < 0``), the switching function
``h`` and the hidden term ``G(x; l)``.  On the switching manifold
``h = 0`` the flow is

    f(x; l) = (1 + l)/2 f_plus(x) + (1 - l)/2 f_minus(x) + G(x; l),  l in [-1, 1]

and the scalar ``K(p; l) = f(p; l) . grad h(p)`` decides between sliding
and crossing.  ``G`` is only ever evaluated on the manifold or inside a
regularization layer, so it is stored as an ordinary vector of
expressions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateGradientError, ModelError, OffManifoldError
from .expressions import Const, Expression, differentiate, parse

__all__ = [
    "SwitchingSystem",
    "PointOnSigma",
    "ValidationReport",
    "eval_field",
    "grad_h",
    "normal_component",
    "validate",
    "project_to_sigma",
    "state_names",
    "H_TOL",
    "GRAD_TOL",
]

H_TOL = 1e-10
GRAD_TOL = 1e-12
LAMBDA = "l"


def state_names(n: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n)]


def _parse_all(items, functions):
    return tuple(parse(s, functions) for s in items)


@dataclass(frozen=True, eq=False)
class SwitchingSystem:
    """The triple of fields plus switching function, with parameter values.

    Parameters
    ----------
    f_plus, f_minus : sequence of Expression
        Field components over ``x1..xn`` (and parameters).
    h : Expression
        Switching function.
    G : sequence of Expression, optional
        Nonlinear term over ``x1..xn`` and ``l``; ``None`` means ``G = 0``.
    params : mapping
        Values for every other free variable.
    """

    f_plus: tuple
    f_minus: tuple
    h: Expression
    G: tuple | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "f_plus", tuple(self.f_plus))
        object.__setattr__(self, "f_minus", tuple(self.f_minus))
        if self.G is not None:
            object.__setattr__(self, "G", tuple(self.G))
        object.__setattr__(self, "params", MappingProxyType({k: float(v) for k, v in dict(self.params).items()}))
        n = len(self.f_plus)
        if n == 0:
            raise ModelError("system dimension must be at least 1")
        if len(self.f_minus) != n or (self.G is not None and len(self.G) != n):
            raise ModelError(
                f"component counts differ: f_plus={n}, f_minus={len(self.f_minus)}, "
                f"G={None if self.G is None else len(self.G)}"
            )
        states = set(state_names(n))
        allowed = states | set(self.params)
        for label, exprs, extra in (
            ("f_plus", self.f_plus, set()),
            ("f_minus", self.f_minus, set()),
            ("h", (self.h,), set()),
            ("G", self.G or (), {LAMBDA}),
        ):
            for i, e in enumerate(exprs):
                unknown = e.free_variables - allowed - extra
                if unknown:
                    raise ModelError(f"{label}[{i}] uses undefined variables {sorted(unknown)}")

    @classmethod
    def from_strings(cls, f_plus: Sequence[str], f_minus: Sequence[str], h: str = "x1",
                     G: Sequence[str] | None = None, params: Mapping[str, float] | None = None,
                     functions=None, name: str = "") -> "SwitchingSystem":
        return cls(
            _parse_all(f_plus, functions),
            _parse_all(f_minus, functions),
            parse(h, functions),
            None if G is None else _parse_all(G, functions),
            params or {},
            name,
        )

    @property
    def n(self) -> int:
        return len(self.f_plus)

    @property
    def has_G(self) -> bool:
        return self.G is not None and not all(isinstance(g, Const) and g.value == 0.0 for g in self.G)

    def with_params(self, **params) -> "SwitchingSystem":
        merged = dict(self.params)
        merged.update(params)
        return SwitchingSystem(self.f_plus, self.f_minus, self.h, self.G, merged, self.name)

    def with_G(self, G) -> "SwitchingSystem":
        """Copy with ``G`` replaced (expressions or expression text; ``None`` removes it)."""
        if G is not None:
            G = tuple(parse(g) if isinstance(g, str) else g for g in G)
        return SwitchingSystem(self.f_plus, self.f_minus, self.h, G, self.params, self.name)

    # -- compiled pieces -----------------------------------------------------

    @cached_property
    def _names(self):
        return state_names(self.n)

    @cached_property
    def _grad_h_exprs(self):
        return tuple(differentiate(self.h, v) for v in self._names)

    @cached_property
    def _dG_exprs(self):
        if self.G is None:
            return None
        return tuple(differentiate(g, LAMBDA) for g in self.G)

    @cached_property
    def _d2G_exprs(self):
        if self.G is None:
            return None
        return tuple(differentiate(g, LAMBDA) for g in self._dG_exprs)

    def env(self, x, lam: float | None = None) -> dict:
        env = dict(self.params)
        for name, v in zip(self._names, x):
            env[name] = float(v)
        if lam is not None:
            env[LAMBDA] = float(lam)
        return env

    def _vec(self, exprs, env) -> np.ndarray:
        return np.array([e.evaluate(env) for e in exprs])

    # -- evaluation ------------------------------------------------------------

    def f_plus_at(self, x) -> np.ndarray:
        return self._vec(self.f_plus, self.env(x))

    def f_minus_at(self, x) -> np.ndarray:
        return self._vec(self.f_minus, self.env(x))

    def G_at(self, x, lam: float) -> np.ndarray:
        if self.G is None:
            return np.zeros(self.n)
        return self._vec(self.G, self.env(x, lam))

    def h_at(self, x) -> float:
        return self.h.evaluate(self.env(x))

    def grad_h(self, x, tol: float = GRAD_TOL) -> np.ndarray:
        g = self._vec(self._grad_h_exprs, self.env(x))
        if not np.linalg.norm(g) > tol:
            raise DegenerateGradientError(f"grad h vanishes at x={list(map(float, x))}")
        return g

    def field(self, x, lam: float) -> np.ndarray:
        env = self.env(x, lam)
        lam = float(lam)
        fp = self._vec(self.f_plus, env)
        fm = self._vec(self.f_minus, env)
        out = (1.0 + lam) / 2.0 * fp + (1.0 - lam) / 2.0 * fm
        if self.G is not None:
            out = out + self._vec(self.G, env)
        return out

    def field_lambda_derivative(self, x, lam: float) -> np.ndarray:
        """``df/dl`` at ``(x, l)``."""
        env = self.env(x, lam)
        d = (self._vec(self.f_plus, env) - self._vec(self.f_minus, env)) / 2.0
        if self.G is not None:
            d = d + self._vec(self._dG_exprs, env)
        return d

    def normal_component(self, p, lam: float, check: bool = True, h_tol: float = H_TOL) -> float:
        if check:
            _require_on_sigma(self, p, h_tol)
        return float(self.field(p, lam) @ self.grad_h(p))

    def normal_derivative(self, p, lam: float) -> float:
        """``dK/dl`` at ``(p, l)``."""
        return float(self.field_lambda_derivative(p, lam) @ self.grad_h(p))

    def normal_second_derivative(self, p, lam: float) -> float:
        """``d2K/dl2`` at ``(p, l)``; only ``G`` contributes."""
        if self.G is None:
            return 0.0
        return float(self._vec(self._d2G_exprs, self.env(p, lam)) @ self.grad_h(p))


@dataclass(frozen=True)
class PointOnSigma:
    """A point checked to lie on the switching manifold."""

    x: np.ndarray

    @classmethod
    def of(cls, system: SwitchingSystem, x, h_tol: float = H_TOL) -> "PointOnSigma":
        x = np.asarray(x, dtype=float)
        _require_on_sigma(system, x, h_tol)
        return cls(x)


def _require_on_sigma(system, p, h_tol):
    if isinstance(p, PointOnSigma):
        return
    hv = system.h_at(p)
    if abs(hv) > h_tol:
        raise OffManifoldError(f"point {list(map(float, p))} is off the switching manifold (h={hv:.3e})")


def _coords(p):
    return p.x if isinstance(p, PointOnSigma) else np.asarray(p, dtype=float)


def eval_field(system: SwitchingSystem, x, lam: float) -> np.ndarray:
    """Nonlinear combination ``f(x; l)`` for ``l`` in ``[-1, 1]``."""
    if not -1.0 <= lam <= 1.0:
        raise ValueError(f"lambda={lam} outside [-1, 1]")
    return system.field(_coords(x), lam)


def grad_h(system: SwitchingSystem, x) -> np.ndarray:
    return system.grad_h(_coords(x))


def normal_component(system: SwitchingSystem, p, lam: float, h_tol: float = H_TOL) -> float:
    """``K(p; l) = f(p; l) . grad h(p)`` for ``p`` on the switching manifold."""
    if isinstance(p, PointOnSigma):
        return system.normal_component(p.x, lam, check=False)
    return system.normal_component(np.asarray(p, dtype=float), lam, check=True, h_tol=h_tol)


def project_to_sigma(system: SwitchingSystem, x, max_iter: int = 80, h_tol: float = 0.0) -> np.ndarray:
    """Newton projection of ``x`` onto ``h = 0`` along ``grad h``.

    Runs until ``|h| <= h_tol``, the correction stops changing ``x`` or
    ``max_iter`` is reached; the last iterate is returned either way.
    """
    x = np.array(x, dtype=float)
    for _ in range(max_iter):
        hv = system.h_at(x)
        if abs(hv) <= h_tol:
            break
        g = system._vec(system._grad_h_exprs, system.env(x))
        gg = float(g @ g)
        if gg == 0.0:
            break
        step = hv / gg * g
        x_new = x - step
        if np.array_equal(x_new, x):
            break
        x = x_new
    return x


@dataclass
class ValidationReport:
    samples: int
    max_G_at_plus1: float
    max_G_at_minus1: float
    min_grad_h: float
    G_tol: float
    grad_tol: float
    failures: list = field(default_factory=list)

    @property
    def G_ok(self) -> bool:
        return max(self.max_G_at_plus1, self.max_G_at_minus1) <= self.G_tol

    @property
    def grad_ok(self) -> bool:
        return self.min_grad_h > self.grad_tol

    @property
    def passed(self) -> bool:
        return self.G_ok and self.grad_ok and not self.failures

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "max_G_at_plus1": self.max_G_at_plus1,
            "max_G_at_minus1": self.max_G_at_minus1,
            "min_grad_h": self.min_grad_h,
            "G_ok": self.G_ok,
            "grad_ok": self.grad_ok,
            "passed": self.passed,
            "failures": list(self.failures),
        }


def validate(system: SwitchingSystem, sample_count: int = 64, box: float = 1.0, seed: int = 0,
             G_tol: float = 1e-9, grad_tol: float = GRAD_TOL) -> ValidationReport:
    """Check ``G(x; +-1) = 0`` and ``grad h != 0`` on sampled points.

    Points are drawn uniformly from ``[-box, box]^n`` (seeded) and each is
    also projected onto the switching manifold, where the gradient test is
    the one that matters.
    """
    rng = np.random.default_rng(seed)
    gp = gm = 0.0
    min_grad = np.inf
    failures = []
    for _ in range(sample_count):
        x = rng.uniform(-box, box, system.n)
        p = project_to_sigma(system, x)
        for pt in (x, p):
            try:
                gp = max(gp, float(np.max(np.abs(system.G_at(pt, 1.0)))))
                gm = max(gm, float(np.max(np.abs(system.G_at(pt, -1.0)))))
                g = system._vec(system._grad_h_exprs, system.env(pt))
                min_grad = min(min_grad, float(np.linalg.norm(g)))
            except Exception as exc:  # report, never raise
                failures.append(f"{type(exc).__name__} at {pt.tolist()}: {exc}")
    return ValidationReport(sample_count, gp, gm, min_grad, G_tol, grad_tol, failures)
