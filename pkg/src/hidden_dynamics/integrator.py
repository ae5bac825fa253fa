"""Hybrid time integration: free flow, crossing, sliding and blow-up.

Free flow in ``h > 0`` / ``h < 0`` uses an embedded Dormand-Prince 5(4)
pair with step-size control.  A sign change of ``h`` over a step is located
by re-stepping from the last accepted state (Brent on the step length), so
the event state is as accurate as an ordinary step.

On reaching the switching manifold from side ``s`` the *layer rule* decides
what happens next: the fast dynamics ``l' = K(p; l)`` is followed from
``l = s``; the first root of ``K`` met on the way becomes the sliding
branch, and if no root blocks the way to ``-s`` the orbit crosses.

Sliding is solve-then-project: every right-hand-side evaluation solves
``K(p; l) = 0`` by Newton warm-started from the last value and returns the
tangential part of ``f(p; l*)``; after every accepted step the state is
projected back onto ``h = 0``.  Sliding ends when ``l*`` reaches ``+-1`` or
at a fold of the branch, and the layer rule is applied again.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import IntegrationError, PreconditionError
from .expressions import Expression, parse
from .sliding import HYPER_TOL, ROOT_TOL, SlidingRoot, sliding_set, solve_lambda
from .system import SwitchingSystem, project_to_sigma, state_names

__all__ = [
    "IntegratorOptions",
    "Trajectory",
    "Sample",
    "Event",
    "LayerOutcome",
    "layer_rule",
    "integrate_hybrid",
    "integrate_smooth",
    "integrate_blowup",
    "dormand_prince_step",
]

PLUS, MINUS, SLIDE, CROSS = "plus", "minus", "slide", "cross"
SMOOTH, BLOWUP = "smooth", "blowup"


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances and limits for all integrators.

    For regularized systems with ``delta <= 1e-4`` the explicit pair needs
    ``max_step`` of order ``delta``.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = 0.1
    event_tol: float = 1e-12
    sliding_root_tol: float = ROOT_TOL
    hyper_tol: float = HYPER_TOL
    first_step: float | None = None
    min_step: float = 1e-14
    max_steps: int = 2_000_000
    grid_points: int = 256

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "event_tol", "sliding_root_tol", "hyper_tol", "min_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"IntegratorOptions.{name} must be positive")
        if self.first_step is not None and not self.first_step > 0:
            raise ValueError("IntegratorOptions.first_step must be positive")

    @classmethod
    def from_dict(cls, d: dict | None) -> "IntegratorOptions":
        d = dict(d or {})
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown integrator options {sorted(unknown)}")
        return cls(**d)


class Sample(NamedTuple):
    t: float
    x: np.ndarray
    mode: str
    lam: float | None = None
    branch: int | None = None


class Event(NamedTuple):
    t: float
    kind: str
    x: np.ndarray
    info: dict = {}

    def to_dict(self) -> dict:
        d = {"t": self.t, "kind": self.kind, "x": [float(v) for v in self.x]}
        d.update(self.info)
        return d


@dataclass
class Trajectory:
    """Time-stamped states with mode labels, plus the event log."""

    n: int
    samples: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def add(self, t, x, mode, lam=None, branch=None):
        s = Sample(float(t), np.array(x, dtype=float), mode, None if lam is None else float(lam), branch)
        if self.samples and s.t <= self.samples[-1].t:
            self.samples[-1] = s
        else:
            self.samples.append(s)

    def event(self, t, kind, x, **info):
        self.events.append(Event(float(t), kind, np.array(x, dtype=float), info))

    @property
    def t(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def x(self) -> np.ndarray:
        return np.array([s.x for s in self.samples]).reshape(len(self.samples), self.n)

    @property
    def lam(self) -> np.ndarray:
        return np.array([np.nan if s.lam is None else s.lam for s in self.samples])

    @property
    def modes(self) -> list:
        return [s.mode for s in self.samples]

    @property
    def branches(self) -> list:
        return [s.branch for s in self.samples]

    @property
    def final_state(self) -> np.ndarray:
        return self.samples[-1].x.copy()

    def events_of(self, kind: str) -> list:
        return [e for e in self.events if e.kind == kind]

    def segment(self, mode: str) -> "Trajectory":
        out = Trajectory(self.n)
        out.samples = [s for s in self.samples if s.mode == mode]
        return out

    def write_csv(self, stream) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["t", *state_names(self.n), "lambda", "mode", "branch"])
        for s in self.samples:
            w.writerow([
                _fmt(s.t), *(_fmt(v) for v in s.x),
                "" if s.lam is None else _fmt(s.lam), s.mode,
                "" if s.branch is None else s.branch,
            ])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def events_json(self) -> list:
        return [e.to_dict() for e in self.events]

    @classmethod
    def read_csv(cls, stream) -> "Trajectory":
        rows = list(csv.reader(stream))
        header, body = rows[0], rows[1:]
        n = len(header) - 4
        traj = cls(n)
        for r in body:
            traj.samples.append(Sample(
                float(r[0]), np.array([float(v) for v in r[1:1 + n]]), r[n + 2],
                None if r[n + 1] == "" else float(r[n + 1]),
                None if r[n + 3] == "" else int(r[n + 3]),
            ))
        return traj


def _fmt(v: float) -> str:
    return "%.17g" % v


# ----------------------------------------------------------------------------
# Dormand-Prince 5(4)

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def dormand_prince_step(f: Callable, t: float, y: np.ndarray, h: float):
    """One Dormand-Prince step; returns ``(y5, error_estimate)``."""
    k = np.empty((7, y.size))
    k[0] = f(t, y)
    for i in range(1, 7):
        yi = y + h * (np.asarray(_A[i]) @ k[:i])
        k[i] = f(t + _C[i] * h, yi)
    y5 = y + h * (_B5 @ k)
    err = h * (_E @ k)
    return y5, err


def _err_norm(err, y0, y1, opts):
    scale = opts.abs_tol + opts.rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(f, t, y, t_end, opts):
    if opts.first_step is not None:
        return min(opts.first_step, opts.max_step)
    scale = opts.abs_tol + opts.rel_tol * np.abs(y)
    d0 = float(np.sqrt(np.mean((y / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f(t, y) / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    return max(min(h0, opts.max_step, abs(t_end - t)), opts.min_step)


def _next_h(h, err, opts):
    fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** (-0.2)))
    return min(h * fac, opts.max_step)


class _Stepper:
    """Adaptive stepping shared by every mode."""

    def __init__(self, f, opts, direction=1.0):
        self.f = f
        self.opts = opts
        self.h = None
        self.direction = direction

    def step(self, t, y, t_end):
        """Advance one accepted step; returns ``(t_new, y_new, h_used)``."""
        opts = self.opts
        if self.h is None:
            self.h = _initial_step(self.f, t, y, t_end, opts)
        while True:
            h = min(self.h, abs(t_end - t))
            if h < opts.min_step * max(1.0, abs(t)) and h < abs(t_end - t):
                raise IntegrationError("step size underflow", t, y)
            y_new, err = dormand_prince_step(self.f, t, y, self.direction * h)
            en = _err_norm(err, y, y_new, opts)
            if en <= 1.0 and np.all(np.isfinite(y_new)):
                self.h = _next_h(h, en, opts)
                return t + self.direction * h, y_new, h
            self.h = h * max(0.2, 0.9 * en ** (-0.2)) if np.isfinite(en) else h * 0.2


def _sub_step(f, t, y, tau):
    if tau == 0.0:
        return y.copy()
    return dormand_prince_step(f, t, y, tau)[0]


# ----------------------------------------------------------------------------
# layer rule


class LayerOutcome(NamedTuple):
    """Result of following ``l' = K(p; l)`` from a starting value.

    ``kind`` is ``"slide"`` (with ``root`` and ``branch`` index into the
    sorted sliding set) or ``"exit"`` (with ``side`` +1 / -1).
    """

    kind: str
    lam: float
    side: int = 0
    root: SlidingRoot | None = None
    branch: int | None = None


def _sign(v):
    return 1 if v > 0 else -1 if v < 0 else 0


def layer_rule(system: SwitchingSystem, p, lam_start: float, direction: int | None = None,
               roots: Sequence[SlidingRoot] | None = None, root_tol: float = ROOT_TOL,
               grid_points: int = 256, exclude: float = 0.0) -> LayerOutcome:
    """Follow the fast flow ``l' = K(p; l)`` from ``lam_start``.

    Parameters
    ----------
    direction : int, optional
        Direction of motion in ``l``; defaults to ``sign(K(p; lam_start))``.
    exclude : float
        Roots within this distance of ``lam_start`` are ignored (used right
        after a fold, where the vanishing root pair sits at ``lam_start``).
    """
    p = np.asarray(p, dtype=float)
    if roots is None:
        roots = sliding_set(system, p, grid_points=grid_points, root_tol=root_tol, check=False)
    if direction is None:
        k = system.normal_component(p, lam_start, check=False)
        if abs(k) <= root_tol and exclude == 0.0:
            idx = min(range(len(roots)), key=lambda i: abs(roots[i].value - lam_start)) if roots else None
            if idx is not None and abs(roots[idx].value - lam_start) <= 1e-9:
                return LayerOutcome("slide", roots[idx].value, 0, roots[idx], idx)
            return LayerOutcome("slide", lam_start, 0, SlidingRoot(lam_start, system.normal_derivative(p, lam_start)), None)
        direction = _sign(k)
    ahead = [
        (i, r) for i, r in enumerate(roots)
        if direction * (r.value - lam_start) > exclude or (exclude == 0.0 and r.value == lam_start)
    ]
    if not ahead:
        return LayerOutcome("exit", float(direction), int(direction))
    i, r = min(ahead, key=lambda ir: abs(ir[1].value - lam_start))
    return LayerOutcome("slide", r.value, 0, r, i)


# ----------------------------------------------------------------------------
# hybrid integration


class _SlideBreak(Exception):
    pass


class _Hybrid:
    def __init__(self, system, opts):
        self.system = system
        self.opts = opts
        self.traj = Trajectory(system.n)
        self.switches_at = (None, 0)

    # -- helpers ---------------------------------------------------------------

    def K(self, p, lam):
        return self.system.normal_component(p, lam, check=False)

    def roots(self, p):
        return sliding_set(self.system, p, grid_points=self.opts.grid_points,
                           root_tol=self.opts.sliding_root_tol, check=False)

    def _count_switch(self, t):
        last, count = self.switches_at
        if last is not None and abs(t - last) <= 1e-12 * max(1.0, abs(t)):
            count += 1
            if count > 50:
                raise IntegrationError("repeated mode switching without time advance (chattering)", t)
        else:
            count = 0
        self.switches_at = (t, count)

    def _degenerate(self, p, roots):
        return len(roots) > self.opts.grid_points // 2

    # -- decisions at the manifold -------------------------------------------

    def arrive(self, t, p, side):
        """Apply the layer rule for an orbit reaching the manifold from ``side``."""
        self._count_switch(t)
        system, opts = self.system, self.opts
        roots = self.roots(p)
        if self._degenerate(p, roots):
            self.traj.add(t, p, CROSS)
            self.traj.event(t, "degenerate", p)
            return None
        k = self.K(p, float(side))
        if abs(k) <= opts.sliding_root_tol:
            # grazing entry: slide at the boundary root
            out = layer_rule(system, p, float(side), direction=None, roots=roots, root_tol=opts.sliding_root_tol)
        elif _sign(k) == side:
            # field points back into the region it came from: touch and go
            self.traj.add(t, p, PLUS if side > 0 else MINUS)
            return (PLUS if side > 0 else MINUS, None)
        else:
            out = layer_rule(system, p, float(side), direction=_sign(k), roots=roots)
        return self._apply(t, p, out, entering=True)

    def _apply(self, t, p, out, entering=False, exit_event=True):
        if out.kind == "slide":
            self.traj.add(t, p, SLIDE, out.lam, out.branch)
            self.traj.event(t, "begin_slide", p, **{"lambda": out.lam, "branch": out.branch})
            return (SLIDE, out)
        side = out.side
        mode = PLUS if side > 0 else MINUS
        if entering:
            self.traj.add(t, p, CROSS)
            self.traj.event(t, "cross", p, to=mode)
        elif exit_event:
            self.traj.event(t, "exit_slide_plus" if side > 0 else "exit_slide_minus", p)
        return (mode, None)

    def start_on_sigma(self, t, p, lam0):
        roots = self.roots(p)
        if self._degenerate(p, roots):
            self.traj.add(t, p, CROSS)
            self.traj.event(t, "degenerate", p)
            return None
        out = layer_rule(self.system, p, lam0, roots=roots, root_tol=self.opts.sliding_root_tol)
        if out.kind == "slide":
            self.traj.add(t, p, SLIDE, out.lam, out.branch)
            self.traj.event(t, "begin_slide", p, **{"lambda": out.lam, "branch": out.branch})
            return (SLIDE, out)
        mode = PLUS if out.side > 0 else MINUS
        self.traj.add(t, p, mode)
        return (mode, None)

    # -- free flow ---------------------------------------------------------------

    def free(self, t, x, t_end, side):
        system = self.system
        fields = system.f_plus if side > 0 else system.f_minus
        mode = PLUS if side > 0 else MINUS

        def f(_t, y):
            env = system.env(y)
            return np.array([e.evaluate(env) for e in fields])

        def g(y):
            return side * system.h_at(y)

        stepper = _Stepper(f, self.opts)
        n_steps = 0
        while t < t_end:
            n_steps += 1
            if n_steps > self.opts.max_steps:
                raise IntegrationError("maximum number of steps exceeded", t, x)
            t_new, x_new, h = stepper.step(t, x, t_end)
            if g(x_new) > 0.0:
                t, x = t_new, x_new
                self.traj.add(t, x, mode)
                continue
            tau = self._locate_free(f, g, t, x, h)
            t_e = t + tau
            x_e = _sub_step(f, t, x, tau)
            p = project_to_sigma(system, x_e)
            self.traj.event(t_e, "hit_sigma", p, side=mode)
            return t_e, p, True
        return t, x, False

    def _locate_free(self, f, g, t, x, h):
        lo = 0.0
        if not g(x) > 0.0:
            tau = h
            for _ in range(80):
                tau /= 2.0
                if g(_sub_step(f, t, x, tau)) > 0.0:
                    lo = tau
                    break
            else:
                return 0.0
        def gg(tau):
            return g(_sub_step(f, t, x, tau))
        if gg(h) == 0.0:
            return h
        return brentq(gg, lo, h, xtol=1e-15 * max(1.0, abs(t)), rtol=4 * np.finfo(float).eps, maxiter=200)

    # -- sliding -----------------------------------------------------------------

    def slide(self, t, x, t_end, out):
        system, opts = self.system, self.opts
        lam = out.lam
        branch = out.branch
        tangential = bool(out.root is not None and (out.root.tangential or abs(out.root.slope) <= opts.hyper_tol))
        slope_sign = 0 if tangential else _sign(system.normal_derivative(x, lam))
        cache = [lam]

        def solve(y, guess):
            try:
                return solve_lambda(system, y, guess, tol=opts.sliding_root_tol, hyper_tol=opts.hyper_tol,
                                    tangential=tangential)
            except PreconditionError as exc:
                raise _SlideBreak(str(exc)) from None

        def f(_t, y):
            lv = solve(y, cache[0])
            cache[0] = lv
            gh = system.grad_h(y)
            fv = system.field(y, lv)
            return fv - (fv @ gh) / (gh @ gh) * gh

        def check(y, guess):
            """Project, solve; returns (ok, lam, why)."""
            p = project_to_sigma(system, y)
            try:
                lv = solve(p, guess)
            except _SlideBreak:
                return False, None, p, "fold"
            if abs(lv) > 1.0:
                return False, lv, p, "exit"
            if not tangential:
                s = system.normal_derivative(p, lv)
                if abs(s) < opts.hyper_tol or _sign(s) != slope_sign:
                    return False, lv, p, "fold"
            return True, lv, p, None

        stepper = _Stepper(f, opts)
        n_steps = 0
        while t < t_end:
            n_steps += 1
            if n_steps > opts.max_steps:
                raise IntegrationError("maximum number of steps exceeded", t, x)
            cache[0] = lam
            try:
                t_new, x_new, h = stepper.step(t, x, t_end)
                ok, lv, p, why = check(x_new, cache[0])
            except _SlideBreak:
                h = min(stepper.h or opts.max_step, t_end - t)
                ok, lv, p, why = False, None, None, "fold"
            except IntegrationError as exc:
                raise IntegrationError(f"sliding: {exc}", t, x) from None
            if ok:
                t, x, lam = t_new, p, lv
                self.traj.add(t, x, SLIDE, lam, branch)
                continue
            return self._slide_break(f, check, t, x, lam, h, cache, branch, slope_sign)
        return t, x, None

    def _slide_break(self, f, check, t, x, lam, h, cache, branch, slope_sign):
        """Bisect the failing step for the last good state and act on the cause."""
        system = self.system
        good = (0.0, x, lam)
        bad_tau, bad = h, None
        for _ in range(200):
            if bad_tau - good[0] <= 1e-13 * max(1.0, abs(t)):
                break
            mid = 0.5 * (good[0] + bad_tau)
            cache[0] = good[2]
            try:
                y = _sub_step(f, t, x, mid)
                ok, lv, p, why = check(y, good[2])
            except _SlideBreak:
                ok, lv, p, why = False, None, None, "fold"
            if ok:
                good = (mid, p, lv)
            else:
                bad_tau, bad = mid, (p, lv, why)
        if bad is None:
            cache[0] = good[2]
            try:
                y = _sub_step(f, t, x, bad_tau)
                ok, lv, p, why = check(y, good[2])
            except _SlideBreak:
                ok, lv, p, why = False, None, None, "fold"
            bad = (p, lv, why)
        tau, p_good, lam_good = good
        t_good = t + tau
        p_bad, lam_bad, why = bad
        if why == "exit":
            sigma = 1 if lam_bad > 0 else -1
            self.traj.add(t_good, p_good, SLIDE, float(sigma), branch)
            direction = sigma if slope_sign <= 0 else -sigma
            out = layer_rule(system, p_good, float(sigma), direction=direction,
                             root_tol=self.opts.sliding_root_tol, grid_points=self.opts.grid_points,
                             exclude=1e-9)
            self._count_switch(t_good)
            if out.kind == "exit":
                self.traj.event(t_good, "exit_slide_plus" if out.side > 0 else "exit_slide_minus", p_good,
                                **{"lambda": float(sigma)})
                mode = PLUS if out.side > 0 else MINUS
                return t_good, p_good, (mode, None)
            self.traj.event(t_good, "begin_slide", p_good, **{"lambda": out.lam, "branch": out.branch})
            return t_good, p_good, (SLIDE, out)
        # fold: the branch ends; re-select from just beyond the fold
        self.traj.add(t_good, p_good, SLIDE, lam_good, branch)
        t_bad = t + bad_tau
        if p_bad is None:
            y = _sub_step(lambda _t, yy: system.field(yy, lam_good), t, x, bad_tau)
            p_bad = project_to_sigma(system, y)
        self.traj.event(t_good, "fold", p_good, **{"lambda": lam_good, "branch": branch})
        self._count_switch(t_good)
        k = self.K(p_bad, lam_good)
        direction = _sign(k) or 1
        out = layer_rule(system, p_bad, lam_good, direction=direction, root_tol=self.opts.sliding_root_tol,
                         grid_points=self.opts.grid_points, exclude=1e-6)
        if out.kind == "exit":
            side = out.side
            self.traj.event(t_bad, "exit_slide_plus" if side > 0 else "exit_slide_minus", p_bad)
            return t_bad, p_bad, (PLUS if side > 0 else MINUS, None)
        self.traj.event(t_bad, "begin_slide", p_bad, **{"lambda": out.lam, "branch": out.branch})
        self.traj.add(t_bad, p_bad, SLIDE, out.lam, out.branch)
        return t_bad, p_bad, (SLIDE, out)


def integrate_hybrid(system: SwitchingSystem, x0: Sequence[float], t_span: tuple[float, float],
                     opts: IntegratorOptions | None = None, initial_lambda: float = 0.0) -> Trajectory:
    """Integrate the discontinuous system through crossings and sliding.

    Parameters
    ----------
    x0 : sequence of float
        Initial state.  If it lies on the manifold (``|h| <= event_tol``)
        the layer rule is applied from ``initial_lambda``; pass the value of
        a root to start sliding on that branch.
    t_span : (float, float)
        Start and end time, ``t0 <= t1``.

    Raises
    ------
    IntegrationError
        Step-size underflow, a root-solver failure during sliding that the
        fold logic cannot resolve, or chattering.
    """
    opts = opts or IntegratorOptions()
    t0, t1 = map(float, t_span)
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    run = _Hybrid(system, opts)
    x = np.asarray(x0, dtype=float)
    if x.shape != (system.n,):
        raise ValueError(f"x0 must have {system.n} components")
    t = t0
    hv = system.h_at(x)
    if abs(hv) <= opts.event_tol:
        x = project_to_sigma(system, x)
        state = run.start_on_sigma(t, x, float(initial_lambda))
    else:
        mode = PLUS if hv > 0 else MINUS
        run.traj.add(t, x, mode)
        state = (mode, None)

    while state is not None and t < t1:
        mode, out = state
        if mode in (PLUS, MINUS):
            side = 1 if mode == PLUS else -1
            t, x, hit = run.free(t, x, t1, side)
            if not hit:
                break
            state = run.arrive(t, x, side)
        else:
            t, x, nxt = run.slide(t, x, t1, out)
            if nxt is None:
                break
            state = nxt
    return run.traj


def _smooth_rhs(field, params):
    if callable(field) and not isinstance(field, (list, tuple)):
        return field, None
    exprs = [parse(e) if not isinstance(e, Expression) else e for e in field]
    n = len(exprs)
    names = state_names(n)
    base = dict(params or {})

    def f(_t, y):
        env = dict(base)
        env.update(zip(names, map(float, y)))
        return np.array([e.evaluate(env) for e in exprs])

    return f, n


def integrate_smooth(field, x0: Sequence[float], t_span: tuple[float, float],
                     opts: IntegratorOptions | None = None, params: dict | None = None) -> Trajectory:
    """Plain adaptive integration of a smooth field (no events).

    ``field`` is a sequence of expressions over ``x1..xn`` (strings are
    parsed), an object with ``field`` and ``params`` attributes such as a
    regularized system, or a callable ``f(t, x)``.
    """
    opts = opts or IntegratorOptions()
    if hasattr(field, "field") and hasattr(field, "params"):
        params = {**field.params, **(params or {})}
        field = field.field
    f, _ = _smooth_rhs(field, params)
    x = np.asarray(x0, dtype=float)
    t0, t1 = map(float, t_span)
    traj = Trajectory(x.size)
    traj.add(t0, x, SMOOTH)
    stepper = _Stepper(f, opts)
    t = t0
    steps = 0
    while t < t1:
        steps += 1
        if steps > opts.max_steps:
            raise IntegrationError("maximum number of steps exceeded", t, x)
        t, x, _ = stepper.step(t, x, t1)
        traj.add(t, x, SMOOTH)
    return traj


def integrate_blowup(system: SwitchingSystem, p0: Sequence[float], lam0: float, t_span: tuple[float, float],
                     timescale_ratio: float = 1.0, opts: IntegratorOptions | None = None,
                     freeze_slow: bool = False) -> Trajectory:
    """Two-timescale system on the manifold with ``l`` as a fast variable.

    ``l' = K(p; l) / timescale_ratio`` and ``p' = f(p; l)`` (tangential
    part).  Stops with an exit event when ``l`` reaches ``+-1`` with ``K``
    pointing outward.  ``freeze_slow`` keeps ``p`` fixed, giving the pure
    layer dynamics.
    """
    opts = opts or IntegratorOptions()
    if not timescale_ratio > 0:
        raise ValueError("timescale_ratio must be positive")
    p = project_to_sigma(system, np.asarray(p0, dtype=float))
    n = system.n
    lam = float(lam0)
    if not -1.0 <= lam <= 1.0:
        raise ValueError("lam0 must lie in [-1, 1]")

    def f(_t, z):
        y, lv = z[:n], z[n]
        gh = system.grad_h(y)
        fv = system.field(y, lv)
        k = float(fv @ gh)
        dp = np.zeros(n) if freeze_slow else fv - k / (gh @ gh) * gh
        return np.append(dp, k / timescale_ratio)

    traj = Trajectory(n)
    t0, t1 = map(float, t_span)
    t = t0
    traj.add(t, p, BLOWUP, lam)
    z = np.append(p, lam)

    def outward(pv, side):
        return side * system.normal_component(pv, float(side), check=False) > 0

    for side in (1, -1):
        if lam == side and outward(p, side):
            traj.event(t, "exit_slide_plus" if side > 0 else "exit_slide_minus", p, **{"lambda": lam})
            return traj

    stepper = _Stepper(f, opts)
    steps = 0
    while t < t1:
        steps += 1
        if steps > opts.max_steps:
            raise IntegrationError("maximum number of steps exceeded", t, z)
        t_new, z_new, h = stepper.step(t, z, t1)
        if abs(z_new[n]) <= 1.0:
            t = t_new
            z = z_new
            z[:n] = project_to_sigma(system, z[:n])
            traj.add(t, z[:n], BLOWUP, z[n])
            continue
        side = 1 if z_new[n] > 0 else -1
        tau = brentq(lambda s: side - _sub_step(f, t, z, s)[n], 0.0, h,
                     xtol=1e-15 * max(1.0, abs(t)), rtol=4 * np.finfo(float).eps)
        z = _sub_step(f, t, z, tau)
        t = t + tau
        z[n] = float(side)
        z[:n] = project_to_sigma(system, z[:n])
        traj.add(t, z[:n], BLOWUP, z[n])
        traj.event(t, "exit_slide_plus" if side > 0 else "exit_slide_minus", z[:n], **{"lambda": float(side)})
        break
    return traj
