"""Pinching: discontinuous approximations of smooth systems.

A smooth system ``x' = F(x)`` with an invariant (or critical) manifold
``x1 = 0`` is *pinched* by removing the layer ``|x1| <= eps`` and gluing
the two sides together: ``f_plus(x) = F(x1 + eps M, y)`` and ``f_minus``
mirrored (``M = 1`` for an extrinsic pinch).  The pinched system usually
slides with the wrong dynamics; a *completion* ``G^eps`` is a hidden term
that restores the invariant-manifold dynamics of ``F``.

Everything here works in graph coordinates ``h = x1``; ``y`` denotes
``(x2, ..., xn)``.  Pinching keeps ``eps`` as a symbolic variable, so the
expansion coefficients of ``K^eps`` in ``eps`` are exact derivatives.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import DerivativeError, DomainError, HypothesisError, ModelError, PreconditionError
from .expressions import Const, Expression, Var, add, differentiate, div, mul, parse, sub, substitute
from .sliding import ROOT_TOL, sliding_set
from .system import LAMBDA, SwitchingSystem, state_names

__all__ = [
    "SmoothSystem",
    "PinchedSystem",
    "CompletionReport",
    "ManifoldDynamics",
    "extrinsic_pinch",
    "intrinsic_pinch",
    "kappa_coefficients",
    "kappa_numeric",
    "complete_extrinsic",
    "complete_intrinsic",
    "verify_completion",
    "manifold_dynamics",
    "fit_order",
    "ZERO_TOL",
    "NONZERO_TOL",
]

EPS = "eps"
MU = "mu"
ZERO_TOL = 1e-9
NONZERO_TOL = 1e-6
ORDER_CAP = 8.0


def _parse(e, functions=None):
    return parse(e, functions) if isinstance(e, str) else e


@dataclass(frozen=True, eq=False)
class SmoothSystem:
    """Smooth field ``F`` over ``x1..xn`` (and ``mu`` for intrinsic families).

    Parameters
    ----------
    F : sequence of Expression
        The full field; intrinsic families include the ``mu`` factor on the
        slow components themselves, e.g. ``(x1 - mu, mu*x2)``.
    mu_of_eps : Expression, optional
        ``mu`` as a function of ``eps`` (intrinsic pinching only).
    M : float, optional
        Offset bound of the intrinsic pinch.
    manifolds : sequence of Expression
        Invariant graphs ``x1 = m_eps(y)`` in ``eps`` and ``y``, used as
        verification targets.
    """

    F: tuple
    h: Expression = Var("x1")
    mu_of_eps: Expression | None = None
    M: float | None = None
    manifolds: tuple = ()
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "F", tuple(self.F))
        object.__setattr__(self, "manifolds", tuple(self.manifolds))
        object.__setattr__(self, "params", dict(self.params))
        if not (isinstance(self.h, Var) and self.h.name == "x1"):
            raise ModelError("pinching works in graph coordinates: h must be x1")
        if self.n < 2:
            raise ModelError("pinching needs at least two state variables")
        allowed = set(state_names(self.n)) | set(self.params) | {MU}
        for i, e in enumerate(self.F):
            bad = e.free_variables - allowed
            if bad:
                raise ModelError(f"F[{i}] uses undefined variables {sorted(bad)}")
        if self.mu_of_eps is not None:
            bad = self.mu_of_eps.free_variables - {EPS} - set(self.params)
            if bad:
                raise ModelError(f"mu_of_eps uses undefined variables {sorted(bad)}")
        for i, m in enumerate(self.manifolds):
            bad = m.free_variables - {EPS} - set(state_names(self.n)[1:]) - set(self.params)
            if bad:
                raise ModelError(f"manifold {i} uses undefined variables {sorted(bad)}")

    @classmethod
    def from_strings(cls, F: Sequence[str], h: str = "x1", mu_of_eps: str | None = None, M: float | None = None,
                     manifolds: Sequence[str] = (), params: Mapping[str, float] | None = None,
                     functions=None, name: str = "") -> "SmoothSystem":
        return cls(
            tuple(_parse(e, functions) for e in F),
            _parse(h, functions),
            None if mu_of_eps is None else _parse(mu_of_eps, functions),
            None if M is None else float(M),
            tuple(_parse(m, functions) for m in manifolds),
            params or {},
            name,
        )

    @property
    def n(self) -> int:
        return len(self.F)

    @property
    def intrinsic(self) -> bool:
        return self.mu_of_eps is not None

    def env(self, x, eps: float | None = None) -> dict:
        env = dict(self.params)
        env.update(zip(state_names(self.n), map(float, x)))
        if eps is not None:
            env[EPS] = float(eps)
            if self.mu_of_eps is not None:
                env[MU] = self.mu_of_eps.evaluate(env)
        return env

    def field(self, x, eps: float | None = None) -> np.ndarray:
        env = self.env(x, eps)
        return np.array([e.evaluate(env) for e in self.F])

    def sample_y(self, count: int = 16, seed: int = 0, box: float = 1.0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return rng.uniform(-box, box, (count, self.n - 1))

    def F_at_mu(self, mu_expr: Expression) -> tuple:
        return tuple(substitute(e, {MU: mu_expr}) for e in self.F)

    def to_dict(self) -> dict:
        d = {"F": [str(e) for e in self.F], "h": str(self.h), "params": dict(self.params)}
        if self.mu_of_eps is not None:
            d["mu_of_eps"] = str(self.mu_of_eps)
        if self.M is not None:
            d["M"] = self.M
        if self.manifolds:
            d["manifolds"] = [str(m) for m in self.manifolds]
        return d


@dataclass(frozen=True, eq=False)
class PinchedSystem:
    """A pinched system; ``eps`` stays symbolic inside the expressions."""

    smooth: SmoothSystem
    system: SwitchingSystem
    eps: float
    kind: str
    M: float = 1.0
    rationale: str = ""

    @property
    def G(self):
        return self.system.G

    def at(self, eps: float) -> "PinchedSystem":
        return replace(self, system=self.system.with_params(**{EPS: float(eps)}), eps=float(eps))

    def with_G(self, G, rationale: str = "") -> "PinchedSystem":
        G = None if G is None else tuple(G)
        return replace(self, system=self.system.with_G(G), rationale=rationale or self.rationale)

    def incomplete(self) -> "PinchedSystem":
        return self.with_G(None, "incomplete")

    def K_expression(self, lam_var: bool = True) -> Expression:
        """``K^eps(x; l)``, the first component of the combination."""
        s = self.system
        e = add(mul(div(add(1.0, Var(LAMBDA)), 2.0), s.f_plus[0]), mul(div(sub(1.0, Var(LAMBDA)), 2.0), s.f_minus[0]))
        if s.G is not None:
            e = add(e, s.G[0])
        return e


def _shifted(smooth: SmoothSystem, offset: Expression) -> tuple:
    F = smooth.F_at_mu(smooth.mu_of_eps) if smooth.mu_of_eps is not None else smooth.F
    return tuple(substitute(e, {"x1": add(Var("x1"), offset)}) for e in F)


def _check_zero_band(values, quantity, where):
    a = np.abs(np.asarray(values, dtype=float))
    if np.all(a <= ZERO_TOL):
        return True
    if np.all(a >= NONZERO_TOL):
        return False
    raise HypothesisError(
        f"{quantity} is indeterminate (between {ZERO_TOL:g} and {NONZERO_TOL:g} or mixed) at {where}",
        quantity, list(map(float, values)),
    )


def extrinsic_pinch(smooth: SmoothSystem, eps: float, samples: int = 16, check: bool = True) -> PinchedSystem:
    """``f_plus = F(x1 + eps, y)``, ``f_minus = F(x1 - eps, y)``, ``G = 0``.

    Raises
    ------
    PreconditionError
        ``F1(0, y) != 0`` at a sample (the manifold is not invariant).
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if check:
        ys = smooth.sample_y(samples)
        vals = [smooth.field(np.concatenate([[0.0], y]))[0] for y in ys]
        if max(map(abs, vals)) > ZERO_TOL:
            raise PreconditionError(f"x1 = 0 is not invariant for F: max |F1(0, y)| = {max(map(abs, vals)):.3e}")
    e = Var(EPS)
    sysm = SwitchingSystem(_shifted(smooth, e), _shifted(smooth, mul(-1.0, e)), Var("x1"), None,
                           {**smooth.params, EPS: float(eps)}, smooth.name)
    return PinchedSystem(smooth, sysm, float(eps), "extrinsic", 1.0)


def _m_coefficients(smooth: SmoothSystem, ys) -> np.ndarray:
    """``m_i(y) = d m_eps / d eps`` at ``eps = 0`` for each manifold."""
    out = []
    for m in smooth.manifolds:
        dm = differentiate(m, EPS)
        row = []
        for y in ys:
            env = {**smooth.params, **dict(zip(state_names(smooth.n)[1:], map(float, y))), EPS: 0.0}
            row.append(dm.evaluate(env))
        out.append(row)
    return np.array(out)


def intrinsic_pinch(smooth: SmoothSystem, eps: float, M: float | None = None, samples: int = 16,
                    check: bool = True) -> PinchedSystem:
    """``f_plus = F(x1 + eps M, y; mu(eps))`` and mirrored, ``G = 0``.

    Raises
    ------
    PreconditionError
        ``mu(0) != 0``, ``M <= 0``, ``M <= max |m_i|`` for the supplied
        manifolds, or ``F1(0, y; 0) != 0``.
    """
    if smooth.mu_of_eps is None:
        raise PreconditionError("intrinsic pinching needs mu_of_eps")
    M = smooth.M if M is None else float(M)
    if M is None or not M > 0:
        raise PreconditionError("intrinsic pinching needs M > 0")
    env0 = {**smooth.params, EPS: 0.0}
    mu0 = smooth.mu_of_eps.evaluate(env0)
    if abs(mu0) > ZERO_TOL:
        raise PreconditionError(f"mu_of_eps(0) = {mu0} must vanish")
    if check:
        ys = smooth.sample_y(samples)
        vals = []
        for y in ys:
            env = smooth.env(np.concatenate([[0.0], y]))
            env[MU] = 0.0
            vals.append(smooth.F[0].evaluate(env))
        if max(map(abs, vals)) > ZERO_TOL:
            raise PreconditionError(f"x1 = 0 is not a critical manifold: max |F1(0, y; 0)| = {max(map(abs, vals)):.3e}")
        if smooth.manifolds:
            mi = _m_coefficients(smooth, ys)
            if np.max(np.abs(mi)) >= M:
                raise PreconditionError(f"M = {M} must exceed max |m_i| = {np.max(np.abs(mi))}")
    e = mul(Var(EPS), Const(M))
    sysm = SwitchingSystem(_shifted(smooth, e), _shifted(smooth, mul(-1.0, e)), Var("x1"), None,
                           {**smooth.params, EPS: float(eps)}, smooth.name)
    return PinchedSystem(smooth, sysm, float(eps), "intrinsic", M)


# ----------------------------------------------------------------------------
# expansion of K in eps


def kappa_coefficients(pinched: PinchedSystem, p, lam: float, k: int) -> np.ndarray:
    """``kappa_i = d^i K^eps(p; l) / d eps^i`` at ``eps = 0``, ``i = 1..k``.

    Computed by exact differentiation of the pinched expressions (the
    completion included).
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    e = pinched.K_expression()
    env = pinched.system.env(p, lam)
    env[EPS] = 0.0
    out = []
    for _ in range(k):
        e = differentiate(e, EPS)
        try:
            out.append(e.evaluate(env))
        except DomainError as exc:
            raise DerivativeError(f"K^eps is not differentiable at eps = 0: {exc}") from None
    return np.array(out)


def kappa_numeric(pinched: PinchedSystem, p, lam: float, k: int, h: float = 1e-2) -> np.ndarray:
    """Finite-difference estimate of the same derivatives.

    Fits a polynomial of degree ``k + 4`` to ``K^eps`` sampled at
    ``eps = j h``, ``|j| <= k + 4``.
    """
    e = pinched.K_expression()
    env = pinched.system.env(p, lam)
    deg = k + 4
    js = np.arange(-deg, deg + 1)
    vals = []
    for j in js:
        env[EPS] = j * h
        vals.append(e.evaluate(env))
    coef = np.polynomial.polynomial.polyfit(js * h, vals, deg)
    return np.array([math.factorial(i) * coef[i] for i in range(1, k + 1)])


# ----------------------------------------------------------------------------
# completions


@dataclass
class Completion:
    pinched: PinchedSystem
    rationale: str
    quantities: dict = field(default_factory=dict)

    @property
    def G(self):
        return self.pinched.G


def _at_zero(smooth, e, ys, mu_zero=False):
    vals = []
    for y in ys:
        env = smooth.env(np.concatenate([[0.0], y]))
        if mu_zero:
            env[MU] = 0.0
        vals.append(e.evaluate(env))
    return np.array(vals)


def complete_extrinsic(smooth: SmoothSystem, eps: float, samples: int = 16) -> Completion:
    """Completion of the extrinsic pinch from the normal derivatives of ``F1``.

    With ``a1 = dF1/dx1(0, y)`` and ``a2 = d2F1/dx1^2(0, y)``:
    ``a1 != 0`` gives ``G = 0`` (``case_a_zero``); ``a1 = 0, a2 != 0``
    gives ``G = eps^2 (l^2 - 1) (a2/2, 0, ...)`` (``case_b_quadratic``),
    whose sliding root is ``l* = 0``; otherwise ``incomplete``.

    Raises
    ------
    HypothesisError
        ``a1`` changes sign across samples, or a value falls between the
        zero and non-zero bands.
    """
    pinched = extrinsic_pinch(smooth, eps, samples)
    ys = smooth.sample_y(samples)
    d1 = differentiate(smooth.F[0], "x1")
    d2 = differentiate(d1, "x1")
    a1 = _at_zero(smooth, d1, ys)
    a2 = _at_zero(smooth, d2, ys)
    q = {"a1": a1.tolist(), "a2": a2.tolist()}
    if not _check_zero_band(a1, "a1", "sampled y"):
        if np.any(np.sign(a1) != np.sign(a1[0])):
            bad = [ys[i].tolist() for i in range(len(a1)) if np.sign(a1[i]) != np.sign(a1[0])]
            raise HypothesisError(f"a1 changes sign across samples (e.g. at y={bad[:3]})", "a1", a1)
        return Completion(pinched.with_G(None, "case_a_zero"), "case_a_zero", q)
    if _check_zero_band(a2, "a2", "sampled y"):
        return Completion(pinched.incomplete(), "incomplete", q)
    C = div(substitute(d2, {"x1": 0.0}), 2.0)
    e = Var(EPS)
    g1 = mul(mul(mul(e, e), sub(mul(Var(LAMBDA), Var(LAMBDA)), 1.0)), C)
    G = (g1,) + tuple(Const(0.0) for _ in range(smooth.n - 1))
    return Completion(pinched.with_G(G, "case_b_quadratic"), "case_b_quadratic", q)


def complete_intrinsic(smooth: SmoothSystem, eps: float, mode: str = "single", M: float | None = None,
                       samples: int = 16) -> Completion:
    """Completion of the intrinsic pinch for one or two invariant manifolds.

    ``single`` requires ``mu'(0) dF1/dmu dF1/dx1 != 0`` on ``x1 = 0``
    (``mu = 0``) and returns ``G = 0``.  ``double`` requires
    ``mu'(0) = 0`` and ``mu''(0) dF1/dmu d2F1/dx1^2 != 0`` and returns
    ``G = eps^2 (l^2 - 1) (M^2/2 d2F1/dx1^2(0, y; 0), 0, ...)``.

    Raises
    ------
    HypothesisError
        A hypothesis fails; ``quantity`` names the offending expression.
    """
    if mode not in ("single", "double"):
        raise ValueError("mode must be 'single' or 'double'")
    pinched = intrinsic_pinch(smooth, eps, M, samples)
    ys = smooth.sample_y(samples)
    mu = smooth.mu_of_eps
    env0 = {**smooth.params, EPS: 0.0}
    dmu = differentiate(mu, EPS)
    d2mu = differentiate(dmu, EPS)
    mu1, mu2 = dmu.evaluate(env0), d2mu.evaluate(env0)
    F1 = smooth.F[0]
    dF1_mu = differentiate(F1, MU)
    dF1_x = differentiate(F1, "x1")
    d2F1_x = differentiate(dF1_x, "x1")
    q = {"mu'(0)": mu1, "mu''(0)": mu2}
    if mode == "single":
        vals = mu1 * _at_zero(smooth, dF1_mu, ys, True) * _at_zero(smooth, dF1_x, ys, True)
        q["mu'(0)*dF1/dmu*dF1/dx1"] = vals.tolist()
        if _check_zero_band(vals, "mu'(0)*dF1/dmu*dF1/dx1", "x1=0, mu=0"):
            raise HypothesisError("single-manifold hypothesis fails: mu'(0)*dF1/dmu*dF1/dx1 vanishes",
                                  "mu'(0)*dF1/dmu*dF1/dx1", vals)
        return Completion(pinched.with_G(None, "intrinsic_single_zero"), "intrinsic_single_zero", q)
    if abs(mu1) > ZERO_TOL:
        raise HypothesisError(f"double mode needs mu(eps) = O(eps^2) but mu'(0) = {mu1}", "mu'(0)", [mu1])
    vals = mu2 * _at_zero(smooth, dF1_mu, ys, True) * _at_zero(smooth, d2F1_x, ys, True)
    q["mu''(0)*dF1/dmu*d2F1/dx1^2"] = vals.tolist()
    if _check_zero_band(vals, "mu''(0)*dF1/dmu*d2F1/dx1^2", "x1=0, mu=0"):
        raise HypothesisError("double-manifold hypothesis fails: mu''(0)*dF1/dmu*d2F1/dx1^2 vanishes",
                              "mu''(0)*dF1/dmu*d2F1/dx1^2", vals)
    Mv = pinched.M
    C = mul(Mv * Mv / 2.0, substitute(d2F1_x, {"x1": 0.0, MU: 0.0}))
    e = Var(EPS)
    g1 = mul(mul(mul(e, e), sub(mul(Var(LAMBDA), Var(LAMBDA)), 1.0)), C)
    G = (g1,) + tuple(Const(0.0) for _ in range(smooth.n - 1))
    return Completion(pinched.with_G(G, "intrinsic_double_quadratic"), "intrinsic_double_quadratic", q)


# ----------------------------------------------------------------------------
# invariant-manifold dynamics and verification


@dataclass(frozen=True, eq=False)
class ManifoldDynamics:
    """``y' = F_y(m_eps(y), y; mu(eps))`` on the graph ``x1 = m_eps(y)``."""

    smooth: SmoothSystem
    m_eps: Expression
    eps: float
    max_residual: float

    def point(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        env = {**self.smooth.params, **dict(zip(state_names(self.smooth.n)[1:], map(float, y))), EPS: self.eps}
        return np.concatenate([[self.m_eps.evaluate(env)], y])

    def __call__(self, y) -> np.ndarray:
        return self.smooth.field(self.point(y), self.eps)[1:]


def manifold_dynamics(smooth: SmoothSystem, m_eps, eps: float, ys=None, tol: float = 1e-8) -> ManifoldDynamics:
    """Induced dynamics on an invariant graph, after checking invariance.

    Raises
    ------
    PreconditionError
        ``|F1 - grad m . F_y|`` exceeds ``tol * scale`` at a sample.
    """
    m = _parse(m_eps)
    names = state_names(smooth.n)[1:]
    grads = [differentiate(m, v) for v in names]
    ys = smooth.sample_y() if ys is None else np.atleast_2d(np.asarray(ys, dtype=float))
    worst = 0.0
    md = ManifoldDynamics(smooth, m, float(eps), 0.0)
    for y in ys:
        x = md.point(y)
        F = smooth.field(x, eps)
        env = {**smooth.params, **dict(zip(names, map(float, y))), EPS: float(eps)}
        g = np.array([d.evaluate(env) for d in grads])
        r = abs(F[0] - g @ F[1:])
        scale = max(1.0, float(np.max(np.abs(F))))
        if r > tol * scale:
            raise PreconditionError(f"x1 = {m} is not invariant at y={list(map(float, y))}: residual {r:.3e}")
        worst = max(worst, r)
    return ManifoldDynamics(smooth, m, float(eps), worst)


def fit_order(eps, residuals, floor: float = 1e-13, cap: float = ORDER_CAP) -> tuple[float, bool]:
    """Least-squares slope of ``log residual`` against ``log eps``.

    Residuals at or below ``floor`` count as exact; if all are, the order
    is reported as ``cap`` with ``exact=True``.
    """
    eps = np.asarray(eps, dtype=float)
    r = np.asarray(residuals, dtype=float)
    if np.all(r <= floor):
        return cap, True
    keep = r > floor
    if keep.sum() < 2:
        return cap, False
    slope = float(np.polyfit(np.log(eps[keep]), np.log(r[keep]), 1)[0])
    return min(slope, cap), False


@dataclass
class CompletionReport:
    """Sliding roots and residuals of a completed pinch over an eps ladder."""

    kind: str
    rationale: str
    G: list
    eps: list
    roots: list
    residuals: list
    root_offsets: list
    order: float
    exact: bool

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rationale": self.rationale,
            "G": self.G,
            "eps": self.eps,
            "roots": self.roots,
            "residuals": self.residuals,
            "root_offsets": self.root_offsets,
            "order": self.order,
            "exact": self.exact,
        }


def _verify_one(pinched: PinchedSystem, eps: float, ys, root_tol):
    P = pinched.at(eps)
    system, smooth = P.system, P.smooth
    dyn = [manifold_dynamics(smooth, m, eps, ys) for m in smooth.manifolds] if P.kind == "intrinsic" else []
    worst, offsets, table = 0.0, 0.0, []
    for y in ys:
        p = np.concatenate([[0.0], y])
        roots = sliding_set(system, p, root_tol=root_tol)
        if not roots:
            raise HypothesisError(f"no sliding root at p={p.tolist()}, eps={eps} (completion failed)",
                                  "sliding roots", [eps, *p.tolist()])
        table.append([r.value for r in roots])
        if P.kind == "extrinsic":
            target = smooth.field(p, eps)
            for r in roots:
                worst = max(worst, float(np.max(np.abs(system.field(p, r.value) - target))))
            continue
        if len(roots) != len(dyn):
            raise HypothesisError(
                f"{len(roots)} sliding roots but {len(dyn)} invariant manifolds at p={p.tolist()}, eps={eps}",
                "sliding roots", [r.value for r in roots])
        order = sorted(range(len(dyn)), key=lambda i: dyn[i].point(y)[0])
        for r, i in zip(roots, order):
            fy = system.field(p, r.value)[1:]
            worst = max(worst, float(np.max(np.abs(fy - dyn[i](y)))))
            m_i = dyn[i].point(y)[0] / (eps * P.M)
            offsets = max(offsets, abs(r.value - m_i))
    return worst, offsets, table


def verify_completion(pinched: PinchedSystem, eps_ladder: Sequence[float], ys=None, root_tol: float = ROOT_TOL,
                      threads: int | None = None) -> CompletionReport:
    """Compare completed sliding with the smooth target along an eps ladder.

    Extrinsic pinches are compared with ``F`` on ``x1 = 0``; intrinsic ones
    with :func:`manifold_dynamics` on each supplied manifold (roots and
    manifolds are matched in ascending order).

    Raises
    ------
    HypothesisError
        No sliding root (or the wrong number of roots) at a sample.
    """
    if pinched.kind == "intrinsic" and not pinched.smooth.manifolds:
        raise PreconditionError("intrinsic verification needs the invariant manifolds")
    ys = pinched.smooth.sample_y(8) if ys is None else np.atleast_2d(np.asarray(ys, dtype=float))
    ladder = [float(e) for e in eps_ladder]
    if not ladder:
        raise ValueError("empty eps ladder")
    with ThreadPoolExecutor(max_workers=threads or min(len(ladder), 4)) as pool:
        results = list(pool.map(lambda e: _verify_one(pinched, e, ys, root_tol), ladder))
    residuals = [r[0] for r in results]
    order, exact = fit_order(ladder, residuals) if len(ladder) > 1 else (float("nan"), residuals[0] <= 1e-13)
    G = None if pinched.G is None else [str(g) for g in pinched.G]
    return CompletionReport(pinched.kind, pinched.rationale, G, ladder, [r[2] for r in results], residuals,
                            [r[1] for r in results], order, exact)
