"""Regularization of the switching and its slow-fast structure.

Replacing ``l`` by ``phi(h(x)/delta)`` for a transition function ``phi``
turns the discontinuous system into a smooth one.  With a monotonic
``phi`` the nonlinear combination regularizes to a slow-fast system whose
critical manifold is the sliding set; a non-monotonic ``psi`` applied to the
plain linear combination gives the same fields once the matching ``G`` is
added.

Transition functions are stored as Python callables wrapped in
:class:`~hidden_dynamics.expressions.ScalarFunction` nodes, so they can be
embedded in expression trees (and differentiated, through the attached
derivative functions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import PreconditionError
from .expressions import (
    Apply, Binary, Const, Expression, ScalarFunction, Unary, Var, add, differentiate, div, mul, parse, sub, substitute,
)
from .integrator import IntegratorOptions, integrate_smooth
from .sliding import HYPER_TOL, SlidingBranch, sliding_set
from .system import LAMBDA, SwitchingSystem

__all__ = [
    "TransitionFunction",
    "TransitionCheck",
    "builtin_transition",
    "BUILTIN_TRANSITIONS",
    "RegularizedSystem",
    "phi_regularize",
    "psi_regularize",
    "psi_to_G",
    "G_to_psi",
    "ReducedProblem",
    "reduced_problem",
    "LayerProblem",
    "layer_problem",
    "ConjugacyMap",
    "conjugacy_H",
    "SlowManifoldReport",
    "slow_manifold_distance",
    "function_table",
]

S = "s"


def _clipped(core: Callable[[float], float]) -> Callable[[float], float]:
    def f(s):
        if s >= 1.0:
            return 1.0
        if s <= -1.0:
            return -1.0
        return float(core(s))
    return f


def _inside(core: Callable[[float], float]) -> Callable[[float], float]:
    """Derivative pieces vanish outside the open interval."""
    def f(s):
        if -1.0 < s < 1.0:
            return float(core(s))
        return 0.0
    return f


@dataclass
class TransitionCheck:
    sign_error: float
    min_derivative: float
    inverse_error: float | None
    monotonic: bool

    @property
    def passed(self) -> bool:
        ok = self.sign_error <= 1e-12
        if self.monotonic:
            ok = ok and self.min_derivative > 0 and self.inverse_error is not None and self.inverse_error <= 1e-10
        return ok


@dataclass(frozen=True, eq=False)
class TransitionFunction:
    """A continuous function equal to ``sign(s)`` for ``|s| >= 1``.

    Parameters
    ----------
    name : str
        Name used for the expression node.
    core, dcore, d2core : callable
        The function and its first two derivatives on ``(-1, 1)``;
        ``d2core`` may be ``None``.
    monotonic : bool
        Whether ``core' > 0`` on ``(-1, 1)``.
    """

    name: str
    core: Callable[[float], float]
    dcore: Callable[[float], float]
    d2core: Callable[[float], float] | None = None
    monotonic: bool = True

    @property
    def function(self) -> ScalarFunction:
        d2 = None if self.d2core is None else ScalarFunction(f"d2_{self.name}", _inside(self.d2core))
        d1 = ScalarFunction(f"d_{self.name}", _inside(self.dcore), d2)
        return ScalarFunction(self.name, _clipped(self.core), d1)

    @property
    def expr(self) -> Expression:
        return Apply(self.function, Var(S))

    @property
    def derivative(self) -> Expression:
        return differentiate(self.expr, S)

    def __call__(self, s: float) -> float:
        return _clipped(self.core)(float(s))

    def prime(self, s: float) -> float:
        return _inside(self.dcore)(float(s))

    def of(self, arg: Expression) -> Expression:
        """Expression node ``self(arg)``."""
        return Apply(self.function, arg)

    def inverse(self, lam: float) -> float:
        """``u`` in ``[-1, 1]`` with ``self(u) = lam`` (monotonic only).

        Newton with a bisection safeguard, run until the bracket stops
        shrinking; the endpoints map exactly to ``+-1``.
        """
        if not self.monotonic:
            raise PreconditionError(f"transition {self.name!r} is not monotonic and has no inverse")
        lam = float(lam)
        if not -1.0 <= lam <= 1.0:
            raise ValueError(f"inverse argument {lam} outside [-1, 1]")
        if lam in (-1.0, 1.0):
            return lam
        lo, hi = -1.0, 1.0
        u = lam
        for _ in range(200):
            r = self.core(u) - lam
            if r == 0.0:
                return u
            if r > 0:
                hi = u
            else:
                lo = u
            d = self.dcore(u)
            u_new = u - r / d if d > 0 else 0.5 * (lo + hi)
            if not lo < u_new < hi:
                u_new = 0.5 * (lo + hi)
            if u_new == u or hi - lo <= 1e-15 * max(1.0, abs(u)):
                return u_new
            u = u_new
        return u

    def check(self, grid: int = 1001) -> TransitionCheck:
        """Numerical check of the defining properties."""
        pts = [1.0, 1.5, 10.0]
        sign_err = max(max(abs(self(s) - 1.0), abs(self(-s) + 1.0)) for s in pts)
        interior = np.linspace(-1.0, 1.0, grid)[1:-1]
        min_d = float(min(self.dcore(s) for s in interior))
        inv_err = None
        if self.monotonic:
            inv_err = float(max(abs(self.inverse(self(s)) - s) for s in np.linspace(-0.999, 0.999, 201)))
        return TransitionCheck(sign_err, min_d, inv_err, self.monotonic)

    @classmethod
    def from_expression(cls, name: str, text: str | Expression, monotonic: bool | None = None) -> "TransitionFunction":
        """Transition whose interior part is an expression in ``s``.

        The caller is responsible for ``text(+-1) = +-1``; ``check()`` reports
        it.  ``monotonic=None`` decides from the derivative on a grid.
        """
        e = parse(text) if isinstance(text, str) else text
        extra = e.free_variables - {S}
        if extra:
            raise ValueError(f"transition expression uses variables other than 's': {sorted(extra)}")
        de = differentiate(e, S)
        d2e = differentiate(de, S)
        core = lambda s: e.evaluate({S: s})  # noqa: E731
        dcore = lambda s: de.evaluate({S: s})  # noqa: E731
        d2core = lambda s: d2e.evaluate({S: s})  # noqa: E731
        if monotonic is None:
            monotonic = bool(all(dcore(s) > 0 for s in np.linspace(-1, 1, 1001)[1:-1]))
        return cls(name, core, dcore, d2core, monotonic)


def _poly_c1():
    return TransitionFunction(
        "poly_c1",
        lambda s: s * (3.0 - s * s) / 2.0,
        lambda s: 1.5 * (1.0 - s * s),
        lambda s: -3.0 * s,
        True,
    )


def _linear_clip():
    return TransitionFunction("linear_clip", lambda s: s, lambda s: 1.0, lambda s: 0.0, True)


def _nonmono_sine():
    return TransitionFunction(
        "nonmono_sine",
        lambda s: s + 0.5 * math.sin(math.pi * s),
        lambda s: 1.0 + 0.5 * math.pi * math.cos(math.pi * s),
        lambda s: -0.5 * math.pi ** 2 * math.sin(math.pi * s),
        False,
    )


BUILTIN_TRANSITIONS = {
    "poly_c1": _poly_c1(),
    "linear_clip": _linear_clip(),
    "nonmono_sine": _nonmono_sine(),
}


def builtin_transition(name: str) -> TransitionFunction:
    """``poly_c1`` (C1, monotonic), ``linear_clip`` (C0) or ``nonmono_sine``."""
    try:
        return BUILTIN_TRANSITIONS[name]
    except KeyError:
        raise ValueError(f"unknown transition {name!r}; choose from {sorted(BUILTIN_TRANSITIONS)}") from None


# ----------------------------------------------------------------------------
# regularized systems


@dataclass(frozen=True, eq=False)
class RegularizedSystem:
    """Smooth field obtained by replacing ``l`` with ``transition(h/delta)``."""

    base: SwitchingSystem
    transition: TransitionFunction
    delta: float
    field: tuple
    kind: str = "phi"

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def params(self) -> Mapping[str, float]:
        return self.base.params

    def __call__(self, x) -> np.ndarray:
        env = self.base.env(x)
        return np.array([e.evaluate(env) for e in self.field])

    def rhs(self, _t, x) -> np.ndarray:
        return self(x)

    def to_dict(self) -> dict:
        return {
            "smooth": {
                "field": [str(e) for e in self.field],
                "params": dict(self.params),
            },
            "regularization": {"kind": self.kind, "transition": self.transition.name, "delta": self.delta},
        }


def _combination(f_plus, f_minus, lam: Expression, G=None):
    half_p = div(add(1.0, lam), 2.0)
    half_m = div(sub(1.0, lam), 2.0)
    out = []
    for i, (fp, fm) in enumerate(zip(f_plus, f_minus)):
        e = add(mul(half_p, fp), mul(half_m, fm))
        if G is not None:
            e = add(e, substitute(G[i], {LAMBDA: lam}))
        out.append(e)
    return tuple(out)


def phi_regularize(system: SwitchingSystem, phi: TransitionFunction, delta: float) -> RegularizedSystem:
    """Smooth field ``f(x; phi(h(x)/delta))`` of the nonlinear combination.

    Raises
    ------
    PreconditionError
        If ``phi`` is not monotonic (use :func:`psi_regularize`).
    """
    if not phi.monotonic:
        raise PreconditionError(f"phi-regularization needs a monotonic transition; {phi.name!r} is not")
    if not delta > 0:
        raise ValueError("delta must be positive")
    lam = phi.of(div(system.h, Const(float(delta))))
    field = _combination(system.f_plus, system.f_minus, lam, system.G)
    # Psi(phi(a)) = psi(a) exactly, including |a| >= 1
    field = tuple(_cancel_inverse(e) for e in field)
    return RegularizedSystem(system, phi, float(delta), field, "phi")


def _as_system(f_plus, f_minus, h, params):
    if isinstance(f_plus, SwitchingSystem):
        return SwitchingSystem(f_plus.f_plus, f_plus.f_minus, f_plus.h, None, f_plus.params, f_plus.name)
    fp = tuple(parse(e) if isinstance(e, str) else e for e in f_plus)
    fm = tuple(parse(e) if isinstance(e, str) else e for e in f_minus)
    hh = parse(h) if isinstance(h, str) else h
    return SwitchingSystem(fp, fm, hh, None, params or {})


def psi_regularize(f_plus, f_minus, psi: TransitionFunction, delta: float, h="x1",
                   params: Mapping[str, float] | None = None) -> RegularizedSystem:
    """Regularize the linear combination with any transition ``psi``.

    ``f_plus`` may also be a :class:`SwitchingSystem` (its ``G`` is ignored;
    ``f_minus`` is then unused).
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    base = _as_system(f_plus, f_minus, h, params)
    lam = psi.of(div(base.h, Const(float(delta))))
    return RegularizedSystem(base, psi, float(delta), _combination(base.f_plus, base.f_minus, lam), "psi")


# ----------------------------------------------------------------------------
# conversions between psi and G


@dataclass(frozen=True, eq=False)
class _InverseComposite(ScalarFunction):
    """``psi o phi^-1``; remembers both parts so ``Psi(phi(a))`` can be
    rewritten to ``psi(a)`` without a round trip through the inverse."""

    inner: str = ""
    outer: ScalarFunction | None = None


def _cancel_inverse(e: Expression) -> Expression:
    if isinstance(e, Apply):
        arg = _cancel_inverse(e.arg)
        f = e.function
        if isinstance(f, _InverseComposite) and isinstance(arg, Apply) and arg.function.name == f.inner:
            return Apply(f.outer, arg.arg)
        return e if arg is e.arg else Apply(f, arg)
    if isinstance(e, Unary):
        arg = _cancel_inverse(e.arg)
        return e if arg is e.arg else Unary(e.op, arg)
    if isinstance(e, Binary):
        a, b = _cancel_inverse(e.left), _cancel_inverse(e.right)
        return e if (a is e.left and b is e.right) else Binary(e.op, a, b)
    return e


def _composite(phi: TransitionFunction, psi: TransitionFunction) -> ScalarFunction:
    """``Psi = psi o phi^-1`` on ``[-1, 1]`` as an expression function."""

    def Psi(lam):
        return psi(phi.inverse(min(1.0, max(-1.0, lam))))

    def dPsi(lam):
        u = phi.inverse(min(1.0, max(-1.0, lam)))
        d = phi.dcore(u)
        if d <= 0.0:
            # endpoint of a C1 transition: use the one-sided value just inside
            u = math.copysign(1.0 - 1e-9, u)
            d = phi.dcore(u)
        return psi.dcore(u) / d

    name = f"psi_{psi.name}_over_{phi.name}"
    return _InverseComposite(name, Psi, ScalarFunction(f"d_{name}", dPsi), phi.name, psi.function)


def psi_to_G(phi: TransitionFunction, psi: TransitionFunction, f_plus, f_minus) -> tuple:
    """The ``G`` whose phi-regularization equals the psi-regularization.

    ``G(x; l) = (Psi(l) - l) (f_plus(x) - f_minus(x)) / 2`` with
    ``Psi = psi o phi^-1``; ``G(x; +-1) = 0`` holds exactly.
    """
    if not phi.monotonic:
        raise PreconditionError(f"phi={phi.name!r} is not invertible")
    fp = [parse(e) if isinstance(e, str) else e for e in f_plus]
    fm = [parse(e) if isinstance(e, str) else e for e in f_minus]
    if psi is phi:
        return tuple(Const(0.0) for _ in fp)
    lam = Var(LAMBDA)
    gamma = sub(Apply(_composite(phi, psi), lam), lam)
    return tuple(mul(gamma, div(sub(a, b), 2.0)) for a, b in zip(fp, fm))


def G_to_psi(system: SwitchingSystem, phi: TransitionFunction, samples: int = 20, seed: int = 0,
             tol: float = 1e-8, box: float = 1.0) -> TransitionFunction | None:
    """Transition ``psi`` equivalent to the system's ``G``, if one exists.

    ``G`` must be ``gamma(l) (f_plus - f_minus)/2`` for a scalar ``gamma``;
    this is tested by comparing component ratios over ``samples`` random
    points and a grid in ``l``.  Returns ``psi = gamma o phi + phi`` or
    ``None``.
    """
    if not phi.monotonic:
        raise PreconditionError(f"phi={phi.name!r} is not invertible")
    if not system.has_G:
        return phi
    rng = np.random.default_rng(seed)
    lams = np.linspace(-1.0, 1.0, 21)
    ref = None
    for _ in range(samples):
        x = rng.uniform(-box, box, system.n)
        d = (system.f_plus_at(x) - system.f_minus_at(x)) / 2.0
        nz = np.abs(d) > 1e-12
        for lv in lams:
            g = system.G_at(x, lv)
            if np.any(np.abs(g[~nz]) > tol):
                return None
            if not nz.any():
                continue
            ratios = g[nz] / d[nz]
            if np.ptp(ratios) > tol:
                return None
        if ref is None and nz.any():
            ref = (x, int(np.argmax(nz)))
    if ref is None:
        return None
    x_ref, i = ref
    d_ref = (system.f_plus_at(x_ref)[i] - system.f_minus_at(x_ref)[i]) / 2.0
    env = system.env(x_ref)
    g_expr = system.G[i]
    dg_expr = system._dG_exprs[i]

    def gamma(lv):
        return g_expr.evaluate({**env, LAMBDA: lv}) / d_ref

    def dgamma(lv):
        return dg_expr.evaluate({**env, LAMBDA: lv}) / d_ref

    core = lambda s: gamma(phi.core(s)) + phi.core(s)  # noqa: E731
    dcore = lambda s: (dgamma(phi.core(s)) + 1.0) * phi.dcore(s)  # noqa: E731
    monotonic = bool(all(dcore(s) > 0 for s in np.linspace(-1, 1, 1001)[1:-1]))
    name = f"psi_from_G_over_{phi.name}"
    return TransitionFunction(name, core, dcore, None, monotonic)


def function_table(extra: Sequence[TransitionFunction] = ()) -> dict:
    """Names usable in expression text: built-in transitions and their
    composites ``psi_<psi>_over_<phi>``."""
    table = {}
    trans = list(BUILTIN_TRANSITIONS.values()) + list(extra)
    for t in trans:
        table[t.name] = t.function
    for phi in trans:
        if not phi.monotonic:
            continue
        for psi in trans:
            f = _composite(phi, psi)
            table[f.name] = f
    return table


# ----------------------------------------------------------------------------
# slow-fast structure


def _require_h_x1(system):
    if not (isinstance(system.h, Var) and system.h.name == "x1"):
        raise PreconditionError("this construction needs coordinates with h = x1")


@dataclass(frozen=True)
class ReducedProblem:
    """Slow flow ``v' = f_{2..n}((0, v); l*(0, v))`` on the branch."""

    system: SwitchingSystem
    transition: TransitionFunction
    branch: SlidingBranch
    hyper_tol: float = HYPER_TOL

    def point(self, v) -> np.ndarray:
        return np.concatenate([[0.0], np.asarray(v, dtype=float)])

    def lam(self, v) -> float:
        return self.branch(self.system, self.point(v))

    def rhs(self, v) -> np.ndarray:
        p = self.point(v)
        lv = self.branch(self.system, p)
        if abs(self.system.normal_derivative(p, lv)) < self.hyper_tol:
            raise PreconditionError(f"fold on branch at v={list(map(float, v))}")
        return self.system.field(p, lv)[1:]

    def integrate(self, v0, times: Sequence[float], opts: IntegratorOptions | None = None) -> np.ndarray:
        """Values of ``v`` at each of ``times`` (ascending, starting at t0)."""
        times = np.asarray(times, dtype=float)
        out = np.empty((times.size, self.system.n - 1))
        v = np.asarray(v0, dtype=float)
        out[0] = v
        f = lambda _t, y: self.rhs(y)  # noqa: E731
        for k in range(1, times.size):
            if times[k] > times[k - 1]:
                v = integrate_smooth(f, v, (times[k - 1], times[k]), opts).final_state
            out[k] = v
        return out


def reduced_problem(system: SwitchingSystem, phi: TransitionFunction, branch: SlidingBranch) -> ReducedProblem:
    """Slow side of the slow-fast decomposition (coordinates with ``h = x1``)."""
    _require_h_x1(system)
    p0 = branch.seed_point
    if abs(system.normal_derivative(p0, branch.seed_lambda)) < HYPER_TOL:
        raise PreconditionError("branch is not hyperbolic at its seed")
    return ReducedProblem(system, phi, branch)


@dataclass(frozen=True)
class LayerEquilibrium:
    u: float
    lam: float
    stability: int


@dataclass(frozen=True)
class LayerProblem:
    """Fast flow ``u' = K(p; phi(u))`` at a fixed point ``p``."""

    system: SwitchingSystem
    transition: TransitionFunction
    p: np.ndarray
    equilibria: tuple

    def rhs(self, u: float) -> float:
        return self.system.normal_component(self.p, self.transition(u), check=False)


def layer_problem(system: SwitchingSystem, phi: TransitionFunction, p) -> LayerProblem:
    """Fast problem and its equilibria ``u_k = phi^-1(l*_k)``.

    The stability sign of each equilibrium is
    ``sign(phi'(u_k) dK/dl(p; l*_k))``; negative means attracting.
    """
    p = np.asarray(p, dtype=float)
    eq = []
    for r in sliding_set(system, p):
        u = phi.inverse(r.value) if phi.monotonic else float("nan")
        st = int(np.sign(phi.prime(u) * r.slope)) if phi.monotonic else 0
        eq.append(LayerEquilibrium(u, r.value, st))
    return LayerProblem(system, phi, p, tuple(eq))


@dataclass(frozen=True)
class ConjugacyMap:
    """``H(0, v) = (phi^-1(l*(0, v)), v)`` and its inverse."""

    system: SwitchingSystem
    transition: TransitionFunction
    branch: SlidingBranch
    edge_tol: float = 1e-12

    def forward(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        lv = self.branch(self.system, p)
        if abs(lv) >= 1.0 - self.edge_tol:
            raise PreconditionError(f"l*={lv} at the edge of [-1, 1]; phi^-1 is singular there")
        return np.concatenate([[self.transition.inverse(lv)], p[1:]])

    def inverse(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return np.concatenate([[0.0], w[1:]])

    __call__ = forward


def conjugacy_H(system: SwitchingSystem, phi: TransitionFunction, branch: SlidingBranch) -> ConjugacyMap:
    _require_h_x1(system)
    if not phi.monotonic:
        raise PreconditionError(f"phi={phi.name!r} is not invertible")
    return ConjugacyMap(system, phi, branch)


@dataclass
class SlowManifoldReport:
    """Result of :func:`slow_manifold_distance`.

    ``distance`` is the largest ``|h|`` of the settled orbits (how far the
    slow manifold sits from the switching manifold); ``u_discrepancy`` is
    the largest ``|x1/delta - phi^-1(l*)|`` at the settled states.
    """

    delta: float
    distance: float
    u_discrepancy: float
    probes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"delta": self.delta, "distance": self.distance, "u_discrepancy": self.u_discrepancy,
                "probes": self.probes}


def slow_manifold_distance(reg: RegularizedSystem, branch: SlidingBranch, probes: Sequence[Sequence[float]],
                           settle_time: float = 0.2, offset: float = 0.2,
                           opts: IntegratorOptions | None = None) -> SlowManifoldReport:
    """Settle orbits onto the slow manifold and measure where they sit.

    Each probe ``p`` on the switching manifold is started at
    ``x1 = delta (phi^-1(l*(p)) + offset)`` (inside the layer) and integrated
    for ``settle_time``.

    Raises
    ------
    PreconditionError
        If the branch is not attracting, does not exist at a probe, or an
        orbit leaves the layer.
    """
    system, phi, delta = reg.base, reg.transition, reg.delta
    _require_h_x1(system)
    if reg.kind != "phi":
        raise PreconditionError("slow_manifold_distance needs a phi-regularized system")
    if branch.stability_sign >= 0:
        raise PreconditionError("slow_manifold_distance needs an attracting branch")
    opts = opts or IntegratorOptions(max_step=delta)
    dist = disc = 0.0
    rows = []
    for p in probes:
        p = np.asarray(p, dtype=float)
        u_star = phi.inverse(branch(system, p))
        u0 = float(np.clip(u_star + offset, -0.999, 0.999))
        if u0 == u_star:
            u0 = u_star - offset
        x0 = p.copy()
        x0[0] = delta * u0
        xe = integrate_smooth(reg, x0, (0.0, settle_time), opts).final_state
        u_end = xe[0] / delta
        if abs(u_end) >= 1.0:
            raise PreconditionError(f"orbit from probe {p.tolist()} left the layer (u={u_end:.3g})")
        q = xe.copy()
        q[0] = 0.0
        u_target = phi.inverse(branch(system, q))
        rows.append({"probe": p.tolist(), "settled": xe.tolist(), "u": u_end, "u_star": u_target})
        dist = max(dist, abs(xe[0]))
        disc = max(disc, abs(u_end - u_target))
    return SlowManifoldReport(delta, dist, disc, rows)
