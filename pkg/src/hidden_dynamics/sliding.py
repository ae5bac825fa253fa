"""Sliding and crossing on the switching manifold.

The sliding set at ``p`` is the set of roots ``l*`` in ``[-1, 1]`` of the
normal component ``K(p; l)``.  Roots are located by a uniform scan for sign
changes followed by Brent refinement; roots of even multiplicity (``K``
touches zero without changing sign) are picked up from local minima of
``|K|`` and refined as zeros of ``dK/dl``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import PreconditionError
from .system import H_TOL, SwitchingSystem, _coords, _require_on_sigma

__all__ = [
    "SlidingRoot",
    "SlidingBranch",
    "PointClassification",
    "Region",
    "LinearRegion",
    "ContinuationResult",
    "sliding_set",
    "classify_point",
    "linear_sliding_lambda",
    "is_degenerate",
    "sliding_field",
    "branch_continuation",
    "normal_hyperbolicity",
    "solve_lambda",
    "ROOT_TOL",
    "HYPER_TOL",
]

ROOT_TOL = 1e-12
HYPER_TOL = 1e-8
GRID_POINTS = 256


class SlidingRoot(NamedTuple):
    """A root of ``K(p; .)`` with the slope ``dK/dl`` there."""

    value: float
    slope: float
    tangential: bool = False

    def hyperbolic(self, hyper_tol: float = HYPER_TOL) -> bool:
        return not self.tangential and abs(self.slope) > hyper_tol

    @property
    def attracting(self) -> bool:
        # attracting for the fast dynamics l' = K(p; l)
        return self.slope < 0


def sliding_set(system: SwitchingSystem, p, grid_points: int = GRID_POINTS, root_tol: float = ROOT_TOL,
                check: bool = True, h_tol: float = H_TOL) -> list[SlidingRoot]:
    """All roots of ``K(p; l) = 0`` with ``l`` in ``[-1, 1]``, ascending.

    An empty list means ``p`` is a crossing point.
    """
    x = _coords(p)
    if check:
        _require_on_sigma(system, p, h_tol)
    gh = system.grad_h(x)

    def K(lam):
        return float(system.field(x, lam) @ gh)

    def dK(lam):
        return float(system.field_lambda_derivative(x, lam) @ gh)

    grid = np.linspace(-1.0, 1.0, grid_points + 1)
    vals = np.array([K(v) for v in grid])
    found: list[tuple[float, bool]] = []

    for v, k in zip(grid, vals):
        if k == 0.0:
            found.append((float(v), False))

    xtol = max(root_tol * 1e-3, 1e-300)
    for i in range(grid_points):
        a, b = vals[i], vals[i + 1]
        if a * b < 0.0:
            r = brentq(K, grid[i], grid[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
            found.append((_polish(K, dK, r, grid[i], grid[i + 1], root_tol), False))

    # even-multiplicity roots: local minima of |K| with no adjacent sign change
    absv = np.abs(vals)
    for i in range(1, grid_points):
        if vals[i] == 0.0 or vals[i - 1] * vals[i] < 0 or vals[i] * vals[i + 1] < 0:
            continue
        if absv[i] <= absv[i - 1] and absv[i] <= absv[i + 1]:
            lo, hi = grid[i - 1], grid[i + 1]
            da, db = dK(lo), dK(hi)
            if da == 0.0:
                m = lo
            elif db == 0.0:
                m = hi
            elif da * db < 0.0:
                m = brentq(dK, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
            else:
                continue
            if abs(K(m)) <= root_tol:
                found.append((float(m), True))

    found.sort()
    roots: list[SlidingRoot] = []
    for value, tangential in found:
        if roots and abs(value - roots[-1].value) <= 10 * root_tol:
            continue
        slope = dK(value)
        roots.append(SlidingRoot(value, slope, tangential or abs(slope) <= HYPER_TOL and _no_sign_change(K, value)))
    return roots


def _no_sign_change(K, value, eta=1e-6):
    lo, hi = max(-1.0, value - eta), min(1.0, value + eta)
    return K(lo) * K(hi) > 0


def _polish(K, dK, r, lo, hi, root_tol):
    k = K(r)
    for _ in range(5):
        if abs(k) <= root_tol:
            break
        d = dK(r)
        if d == 0.0:
            break
        r_new = r - k / d
        if not lo <= r_new <= hi:
            break
        k_new = K(r_new)
        if abs(k_new) >= abs(k):
            break
        r, k = r_new, k_new
    return float(r)


class Region(enum.Enum):
    NONLINEAR_SLIDING = "nonlinear_sliding"
    CROSSING = "crossing"


class LinearRegion(enum.Enum):
    LINEAR_SLIDING = "linear_sliding"
    LINEAR_CROSSING = "linear_crossing"


@dataclass
class PointClassification:
    kind: Region
    roots: list
    linear_kind: LinearRegion
    linear_lambda: float | None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "region": self.kind.value,
            "roots": [
                {"lambda": r.value, "dK_dlambda": r.slope, "hyperbolic": r.hyperbolic(),
                 "attracting": r.attracting and r.hyperbolic()}
                for r in self.roots
            ],
            "linear_region": self.linear_kind.value,
            "linear_lambda": self.linear_lambda,
            "degenerate": self.degenerate,
        }


def _normal_parts(system, x):
    gh = system.grad_h(x)
    return float(system.f_plus_at(x) @ gh), float(system.f_minus_at(x) @ gh)


def is_degenerate(system: SwitchingSystem, p) -> bool:
    """Both one-sided fields tangent to the manifold (undefined case)."""
    kp, km = _normal_parts(system, _coords(p))
    return kp == 0.0 and km == 0.0


def linear_sliding_lambda(system: SwitchingSystem, p) -> float | None:
    """Filippov's convex-combination parameter, or ``None`` at crossing points.

    Returns ``0`` at the degenerate point where both normal components
    vanish; use :func:`is_degenerate` to tell that case apart.
    """
    kp, km = _normal_parts(system, _coords(p))
    if kp == km:
        return 0.0 if kp == 0.0 else None
    lam = -(kp + km) / (kp - km)
    return lam if abs(lam) <= 1.0 else None


def classify_point(system: SwitchingSystem, p, grid_points: int = GRID_POINTS,
                   root_tol: float = ROOT_TOL) -> PointClassification:
    roots = sliding_set(system, p, grid_points=grid_points, root_tol=root_tol)
    lin = linear_sliding_lambda(system, p)
    return PointClassification(
        Region.NONLINEAR_SLIDING if roots else Region.CROSSING,
        roots,
        LinearRegion.LINEAR_CROSSING if lin is None else LinearRegion.LINEAR_SLIDING,
        lin,
        is_degenerate(system, p),
    )


def sliding_field(system: SwitchingSystem, p, lam: float, root_tol: float = ROOT_TOL,
                  check: bool = True) -> np.ndarray:
    """Nonlinear sliding vector field ``f(p; l*)`` projected onto the tangent space.

    Raises
    ------
    PreconditionError
        ``|K(p; l*)| > root_tol``.
    """
    x = _coords(p)
    gh = system.grad_h(x)
    f = system.field(x, lam)
    if check:
        k = float(f @ gh)
        if abs(k) > root_tol:
            raise PreconditionError(f"lambda={lam!r} is not a sliding root at p (K={k:.3e})")
    return f - (f @ gh) / (gh @ gh) * gh


def normal_hyperbolicity(system: SwitchingSystem, p, lam: float) -> float:
    """``dK/dl`` at a root; nonzero means the slow manifold is normally hyperbolic."""
    return system.normal_derivative(_coords(p), lam)


def solve_lambda(system: SwitchingSystem, p, guess: float, tol: float = ROOT_TOL, max_iter: int = 50,
                 hyper_tol: float = HYPER_TOL, tangential: bool = False) -> float:
    """Newton iteration for a root of ``K(p; .)`` (or of ``dK/dl`` if tangential).

    Raises
    ------
    PreconditionError
        No convergence, a vanishing derivative or an iterate far outside
        ``[-1, 1]``.
    """
    x = _coords(p)
    gh = system.grad_h(x)
    lam = float(guess)
    if tangential:
        def g(v):
            return float(system.field_lambda_derivative(x, v) @ gh)

        def dg(v):
            return system.normal_second_derivative(x, v)
    else:
        def g(v):
            return float(system.field(x, v) @ gh)

        def dg(v):
            return float(system.field_lambda_derivative(x, v) @ gh)

    prev = None
    for _ in range(max_iter):
        gv = g(lam)
        if abs(gv) <= tol * 1e-2:
            break
        d = dg(lam)
        if abs(d) < (0.0 if tangential else hyper_tol * 1e-3) or d == 0.0:
            raise PreconditionError(f"vanishing derivative while solving for lambda at {lam!r}")
        step = gv / d
        lam -= step
        if not -2.0 <= lam <= 2.0:
            raise PreconditionError(f"Newton iterate {lam!r} left the admissible range")
        if abs(step) <= 4e-16 * max(1.0, abs(lam)) or (prev is not None and abs(step) >= abs(prev) and abs(step) < 1e-12):
            break
        prev = step
    if tangential:
        if abs(float(system.field(x, lam) @ gh)) > tol * 10:
            raise PreconditionError("tangential root disappeared")
    elif abs(g(lam)) > tol * 10:
        raise PreconditionError(f"Newton did not converge (K={g(lam):.3e})")
    return lam


@dataclass(frozen=True)
class SlidingBranch:
    """A root function ``l*_i(p)`` tracked from a seed.

    Calling the branch at a point runs Newton from the seed value and falls
    back to the nearest root of the full sliding set with the same slope sign.
    """

    branch_id: int
    seed_point: np.ndarray
    seed_lambda: float
    stability_sign: int
    root_tol: float = ROOT_TOL

    @classmethod
    def from_seed(cls, system: SwitchingSystem, p0, lam0: float, branch_id: int = 0,
                  root_tol: float = ROOT_TOL, hyper_tol: float = HYPER_TOL) -> "SlidingBranch":
        x = np.asarray(_coords(p0), dtype=float)
        lam = solve_lambda(system, x, lam0, tol=root_tol)
        slope = system.normal_derivative(x, lam)
        if abs(slope) <= hyper_tol:
            raise PreconditionError(f"branch seed is a fold (dK/dl={slope:.3e})")
        return cls(branch_id, x, lam, int(np.sign(slope)), root_tol)

    def __call__(self, system: SwitchingSystem, p) -> float:
        try:
            lam = solve_lambda(system, p, self.seed_lambda, tol=self.root_tol)
            if -1.0 <= lam <= 1.0 and np.sign(system.normal_derivative(_coords(p), lam)) == self.stability_sign:
                return lam
        except PreconditionError:
            pass
        same = [r for r in sliding_set(system, p, root_tol=self.root_tol, check=False)
                if np.sign(r.slope) == self.stability_sign and not r.tangential]
        if not same:
            raise PreconditionError(f"branch {self.branch_id} does not exist at p={_coords(p).tolist()}")
        return min(same, key=lambda r: abs(r.value - self.seed_lambda)).value


@dataclass
class ContinuationResult:
    s: np.ndarray
    lam: np.ndarray
    points: np.ndarray
    slope: np.ndarray
    stop_reason: str
    meta: dict = field(default_factory=dict)


def branch_continuation(system: SwitchingSystem, p0, lam0: float, curve: Callable[[float], Sequence[float]],
                        s_span: tuple[float, float], step: float = 0.01, root_tol: float = ROOT_TOL,
                        hyper_tol: float = HYPER_TOL, min_step: float = 1e-10,
                        max_points: int = 100_000) -> ContinuationResult:
    """Continue a sliding branch along a path ``s -> curve(s)`` on the manifold.

    Tangent predictor in ``(s, l)`` followed by a Newton corrector in ``l``
    at each new path point.  Stops with reason ``"end"`` (path exhausted),
    ``"exit_interval"`` (``l*`` left ``[-1, 1]``), ``"fold"``
    (``|dK/dl| < hyper_tol`` or a sign change of ``dK/dl``) or
    ``"corrector_failure"``.

    Raises
    ------
    PreconditionError
        The seed is not a root, or is already a fold.
    """
    s0, s1 = map(float, s_span)
    direction = 1.0 if s1 >= s0 else -1.0
    x0 = np.asarray(curve(s0), dtype=float)
    if p0 is not None and np.max(np.abs(x0 - np.asarray(_coords(p0), dtype=float))) > 1e-9:
        raise PreconditionError("seed point does not match curve(s_span[0])")
    k0 = system.normal_component(x0, lam0, check=False)
    if abs(k0) > 1e-8:
        raise PreconditionError(f"seed lambda={lam0!r} is not a root (K={k0:.3e})")
    lam = solve_lambda(system, x0, lam0, tol=root_tol)
    slope = system.normal_derivative(x0, lam)
    if abs(slope) < hyper_tol:
        raise PreconditionError(f"fold at seed (dK/dl={slope:.3e})")

    seed_slope = abs(slope)
    ss, ls, ps, ds_ = [s0], [lam], [x0], [slope]
    s = s0
    h = abs(step)
    reason = "end"

    def K_at(sv, lv):
        return system.normal_component(np.asarray(curve(sv), dtype=float), lv, check=False)

    while direction * (s1 - s) > 1e-14 * max(1.0, abs(s1)):
        if len(ss) >= max_points:
            reason = "max_points"
            break
        ds = direction * min(h, abs(s1 - s))
        eta = 1e-6 * max(1.0, abs(s))
        ks = (K_at(s + eta, lam) - K_at(s - eta, lam)) / (2 * eta)
        lam_pred = lam - ds * ks / slope
        x_new = np.asarray(curve(s + ds), dtype=float)
        try:
            lam_new = solve_lambda(system, x_new, lam_pred, tol=root_tol, hyper_tol=hyper_tol)
            slope_new = system.normal_derivative(x_new, lam_new)
            ok = abs(lam_new - lam_pred) < 0.5 and np.sign(slope_new) == np.sign(slope)
        except PreconditionError:
            ok = False
        if not ok:
            h /= 2.0
            if h < min_step:
                # a quadratic fold leaves |dK/dl| ~ sqrt(step) at the last good point
                reason = "fold" if abs(slope) < 1e-2 * seed_slope else "corrector_failure"
                break
            continue
        if abs(lam_new) > 1.0:
            reason = "exit_interval"
            break
        s, lam, slope = s + ds, lam_new, slope_new
        ss.append(s)
        ls.append(lam)
        ps.append(x_new)
        ds_.append(slope)
        if abs(slope) < hyper_tol:
            reason = "fold"
            break
        h = min(abs(step), h * 2.0)
    return ContinuationResult(np.array(ss), np.array(ls), np.array(ps), np.array(ds_), reason)
