"""Command-line front end: ``hidden-dynamics <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 hypothesis failure.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .config import Config, load_config
from .errors import (
    ConfigError, ExpressionError, HiddenDynamicsError, HypothesisError, IntegrationError, ModelError,
    OffManifoldError, PreconditionError,
)
from .expressions import parse
from .integrator import IntegratorOptions, integrate_hybrid, integrate_smooth
from .pinch import (
    PinchedSystem, SmoothSystem, complete_extrinsic, complete_intrinsic, fit_order, intrinsic_pinch,
    verify_completion,
)
from .regularize import (
    builtin_transition, function_table, phi_regularize, psi_regularize, psi_to_G, slow_manifold_distance,
)
from .scenarios import SCENARIOS, get_scenario
from .sliding import SlidingBranch, classify_point, sliding_field
from .system import SwitchingSystem

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_HYPOTHESIS = 0, 2, 3, 4
PINCH_MODES = ("extrinsic", "intrinsic-single", "intrinsic-double", "intrinsic-given")
SWEEP_TASKS = ("simulate", "regularize", "slow-manifold", "pinch")
_LIST_FLAGS = ("--x0", "--point", "--eps", "--values")
_NUMBER_LIST = re.compile(r"^-[0-9.eE+\-,]+$")


class _Usage(Exception):
    pass


def _floats(text: str, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    return vals


def _join_negative_lists(argv):
    """Let ``--x0 -0.5,0`` through argparse (it would read it as an option)."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in _LIST_FLAGS and i + 1 < len(argv) and _NUMBER_LIST.match(argv[i + 1]):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


# ----------------------------------------------------------------------------
# shared helpers


def _load(args) -> Config:
    if bool(args.scenario) == bool(args.config):
        raise ConfigError("give exactly one of --scenario or --config")
    return get_scenario(args.scenario) if args.scenario else load_config(args.config)


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _eps_ladder(cfg: Config, args) -> list[float]:
    if getattr(args, "eps", None):
        return _floats(args.eps, "--eps")
    eps = cfg.task.get("eps")
    if eps is None:
        raise ConfigError("no eps ladder (task.eps or --eps)")
    return [float(e) for e in (eps if isinstance(eps, list) else [eps])]


def build_completion(smooth: SmoothSystem, mode: str, eps: float, G=None):
    """Pinch ``smooth`` at ``eps`` and complete it according to ``mode``.

    Returns ``(pinched, quantities)``.
    """
    if mode == "extrinsic":
        c = complete_extrinsic(smooth, eps)
        return c.pinched, c.quantities
    if mode in ("intrinsic-single", "intrinsic-double"):
        c = complete_intrinsic(smooth, eps, mode.split("-")[1])
        return c.pinched, c.quantities
    if mode == "intrinsic-given":
        if not G:
            raise ConfigError("mode intrinsic-given needs task.G")
        P = intrinsic_pinch(smooth, eps)
        return P.with_G([parse(g) for g in G], "given"), {}
    raise ConfigError(f"unknown pinch mode {mode!r}; choose from {PINCH_MODES}")


def _switching_system(cfg: Config, args) -> SwitchingSystem:
    if cfg.system is not None:
        return cfg.system
    if cfg.smooth is not None:
        mode = getattr(args, "mode", None) or cfg.task.get("mode", "extrinsic")
        P, _ = build_completion(cfg.smooth, mode, _eps_ladder(cfg, args)[0], cfg.task.get("G"))
        return P.system
    raise ConfigError("this command needs a 'system' block (or a 'smooth' block to pinch)")


def _options(cfg: Config, args) -> IntegratorOptions:
    opts = cfg.run.options
    if getattr(args, "max_step", None):
        opts = replace(opts, max_step=args.max_step)
    return opts


# ----------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: Config, args) -> tuple[str, dict | None]:
    t0, t1 = cfg.run.t_span
    if args.t_end is not None:
        t1 = args.t_end
    if args.t0 is not None:
        t0 = args.t0
    if t1 < t0:
        raise ConfigError("t_end must not precede t0")
    opts = _options(cfg, args)
    x0 = _floats(args.x0, "--x0") if args.x0 else cfg.run.x0
    if x0 is None:
        raise ConfigError("no initial state (run.x0 or --x0)")
    delta = args.delta
    if cfg.smooth_field is not None:
        n = len(cfg.smooth_field)
        if len(x0) != n:
            raise ConfigError(f"x0 must have {n} components")
        traj = integrate_smooth(cfg.smooth_field, x0, (t0, t1), opts, cfg.smooth_params)
    else:
        system = _switching_system(cfg, args)
        if len(x0) != system.n:
            raise ConfigError(f"x0 must have {system.n} components")
        if delta is not None:
            phi = builtin_transition(args.transition or cfg.task.get("transition", "poly_c1"))
            reg = phi_regularize(system, phi, delta)
            if args.max_step is None:
                opts = replace(opts, max_step=min(opts.max_step, delta))
            traj = integrate_smooth(reg, x0, (t0, t1), opts)
        else:
            lam0 = cfg.run.initial_lambda if args.initial_lambda is None else args.initial_lambda
            traj = integrate_hybrid(system, x0, (t0, t1), opts, initial_lambda=lam0)
    events = traj.events_json()
    if args.format == "json":
        samples = [
            {"t": s.t, "x": s.x.tolist(), "lambda": s.lam, "mode": s.mode, "branch": s.branch}
            for s in traj.samples
        ]
        return _json({"samples": samples, "events": events}), None
    return traj.to_csv(), {"events": events}


def cmd_analyze(cfg: Config, args) -> tuple[str, None]:
    system = _switching_system(cfg, args)
    p = _floats(args.point, "--point") if args.point else cfg.task.get("point")
    if p is None:
        raise ConfigError("no point (task.point or --point)")
    p = np.asarray(p, dtype=float)
    if p.shape != (system.n,):
        raise ConfigError(f"point must have {system.n} components")
    c = classify_point(system, p)
    out = {"point": p.tolist(), **c.to_dict()}
    for row, r in zip(out["roots"], c.roots):
        row["sliding_field"] = sliding_field(system, p, r.value, check=False).tolist()
    if c.linear_lambda is not None:
        out["linear_sliding_field"] = (
            (1 + c.linear_lambda) / 2 * system.f_plus_at(p) + (1 - c.linear_lambda) / 2 * system.f_minus_at(p)
        ).tolist()
    return _json(out), None


def psi_identity_error(system: SwitchingSystem, phi, psi, delta: float, samples: int = 1000,
                            seed: int = 0, box: float = 1.0) -> tuple[tuple, float]:
    """Max difference between the psi-regularized linear combination and the
    phi-regularized system with ``G = psi_to_G(phi, psi)``, on random points
    with ``|x1| < delta`` (``h = x1``)."""
    G = psi_to_G(phi, psi, system.f_plus, system.f_minus)
    z = psi_regularize(system, None, psi, delta)
    f = phi_regularize(system.with_G(G), phi, delta)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(-box, box, system.n)
        x[0] = rng.uniform(-delta, delta)
        worst = max(worst, float(np.max(np.abs(z(x) - f(x)))))
    return G, worst


def cmd_regularize(cfg: Config, args) -> tuple[str, None]:
    if cfg.system is None:
        raise ConfigError("regularize needs a 'system' block")
    system = cfg.system
    phi = builtin_transition(args.transition or cfg.task.get("transition", "poly_c1"))
    delta = args.delta if args.delta is not None else cfg.task.get("delta")
    if delta is None:
        raise ConfigError("no delta (task.delta or --delta)")
    reg = phi_regularize(system, phi, float(delta))
    out = reg.to_dict()
    if args.psi:
        psi = builtin_transition(args.psi)
        G, err = psi_identity_error(system, phi, psi, float(delta))
        out["psi"] = {"name": psi.name, "G": [str(g) for g in G], "identity_error": err, "samples": 1000}
    return _json(out), None


def cmd_pinch(cfg: Config, args) -> tuple[str, None]:
    if cfg.smooth is None:
        raise ConfigError("pinch needs a 'smooth' block with F")
    mode = args.mode or cfg.task.get("mode", "extrinsic")
    ladder = _eps_ladder(cfg, args)
    P, q = build_completion(cfg.smooth, mode, ladder[0], cfg.task.get("G"))
    ys = cfg.task.get("points")
    report = verify_completion(P, ladder, ys)
    out = {"mode": mode, "smooth": cfg.smooth.to_dict(), **report.to_dict(), "quantities": q}
    return _json(out), None


def _sweep_one(cfg: Config, args, task: str, param: str, value: float) -> dict:
    if param not in ("delta", "eps"):
        cfg = cfg.with_param(param, value)
    if task == "simulate":
        a = argparse.Namespace(**{**vars(args), "format": "csv", "t_end": None, "t0": None, "x0": None,
                                  "delta": value if param == "delta" else None, "transition": None,
                                  "initial_lambda": None, "eps": str(value) if param == "eps" else args.eps})
        x0 = cfg.run.x0
        system = _switching_system(cfg, a)
        if a.delta is not None:
            reg = phi_regularize(system, builtin_transition(cfg.task.get("transition", "poly_c1")), a.delta)
            traj = integrate_smooth(reg, x0, cfg.run.t_span, replace(cfg.run.options, max_step=min(cfg.run.options.max_step, a.delta)))
        else:
            traj = integrate_hybrid(system, x0, cfg.run.t_span, cfg.run.options, cfg.run.initial_lambda)
        return {"final_state": traj.final_state.tolist()}
    if task in ("regularize", "slow-manifold"):
        if cfg.system is None:
            raise ConfigError(f"task {task} needs a 'system' block")
        delta = value if param == "delta" else float(cfg.task.get("delta", 0.01))
        phi = builtin_transition(cfg.task.get("transition", "poly_c1"))
        reg = phi_regularize(cfg.system, phi, delta)
        if task == "regularize":
            x0 = cfg.run.x0
            opts = replace(cfg.run.options, max_step=min(cfg.run.options.max_step, delta))
            xr = integrate_smooth(reg, x0, cfg.run.t_span, opts).final_state
            xh = integrate_hybrid(cfg.system, x0, cfg.run.t_span, cfg.run.options).final_state
            return {"metric": float(np.max(np.abs(xr - xh))), "regularized": xr.tolist(), "hybrid": xh.tolist()}
        probes = cfg.task.get("probes")
        if not probes:
            raise ConfigError("slow-manifold sweep needs task.probes")
        seed = float(cfg.task.get("branch_seed", 0.0))
        branch = SlidingBranch.from_seed(cfg.system, probes[0], seed)
        rep = slow_manifold_distance(reg, branch, probes, float(cfg.task.get("settle_time", 0.1)))
        return {"metric": rep.distance, "u_discrepancy": rep.u_discrepancy}
    if task == "pinch":
        if cfg.smooth is None:
            raise ConfigError("task pinch needs a 'smooth' block")
        eps = value if param == "eps" else _eps_ladder(cfg, args)[0]
        mode = args.mode or cfg.task.get("mode", "extrinsic")
        P, _ = build_completion(cfg.smooth, mode, eps, cfg.task.get("G"))
        rep = verify_completion(P, [eps], cfg.task.get("points"), threads=1)
        return {"metric": rep.residuals[0], "roots": rep.roots[0]}
    raise ConfigError(f"unknown sweep task {task!r}")


def cmd_sweep(cfg: Config, args) -> tuple[str, None]:
    if not args.param:
        raise ConfigError("sweep needs --param")
    values = _floats(args.values or "", "--values")
    if not values:
        raise ConfigError("sweep needs a non-empty --values list")
    values = sorted(values)
    task = args.task
    if task is None:
        if args.param == "delta":
            task = "slow-manifold" if cfg.task.get("probes") else "regularize"
        elif args.param == "eps":
            task = "pinch"
        else:
            task = "simulate"
    if task not in SWEEP_TASKS:
        raise ConfigError(f"unknown sweep task {task!r}; choose from {SWEEP_TASKS}")
    if args.param not in ("delta", "eps"):
        cfg.with_param(args.param, values[0])  # validates the name up front
    threads = _threads(len(values))

    def run(v):
        try:
            return {"value": v, **_sweep_one(cfg, args, task, args.param, v)}
        except ConfigError:
            raise
        except HiddenDynamicsError as exc:
            return {"value": v, "error": f"{type(exc).__name__}: {exc}"}

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(run, values))
    ok = [r for r in results if "error" not in r]
    if not ok:
        raise IntegrationError("every sweep value failed: " + "; ".join(r["error"] for r in results))
    fit = None
    metric = [(r["value"], r["metric"]) for r in ok if "metric" in r]
    if len(metric) >= 2 and all(v > 0 for v, _ in metric):
        order, exact = fit_order([v for v, _ in metric], [m for _, m in metric])
        fit = {"order": order, "exact": exact}
    if args.format == "csv":
        buf = io.StringIO()
        buf.write("value,metric,error\n")
        for r in results:
            m = r.get("metric")
            buf.write(f"{'%.17g' % r['value']},{'' if m is None else '%.17g' % m},{r.get('error', '')}\n")
        return buf.getvalue(), None
    return _json({"param": args.param, "task": task, "results": results, "fit": fit}), None


def _threads(n_tasks: int) -> int:
    cap = os.environ.get("HD_THREADS")
    try:
        limit = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"HD_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(limit, n_tasks))


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "regularize": cmd_regularize,
    "pinch": cmd_pinch,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hidden-dynamics",
                                description="Simulate and analyze switching systems with hidden terms.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formats=("csv", "json"), default="json"):
        src = sp.add_argument_group("input")
        src.add_argument("--scenario", choices=sorted(SCENARIOS), help="built-in scenario")
        src.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--output", "-o", help="output path (default: stdout)")
        sp.add_argument("--format", choices=formats, default=default)
        sp.add_argument("--max-step", type=float, dest="max_step")
        return sp

    s = common(sub.add_parser("simulate", help="integrate a trajectory"), default="csv")
    s.add_argument("--x0", help="initial state, comma separated")
    s.add_argument("--t-end", type=float, dest="t_end")
    s.add_argument("--t0", type=float)
    s.add_argument("--initial-lambda", type=float, dest="initial_lambda",
                   help="lambda used when x0 lies on the switching manifold")
    s.add_argument("--delta", type=float, help="integrate the phi-regularization instead")
    s.add_argument("--transition", help="transition for --delta (default poly_c1)")
    s.add_argument("--eps", help="eps for smooth scenarios (first value is used)")
    s.add_argument("--mode", choices=PINCH_MODES)
    s.add_argument("--events", help="path for the JSON event log (default: <output>.events.json)")

    a = common(sub.add_parser("analyze", help="classify a point on the switching manifold"), ("json",))
    a.add_argument("--point", help="point on the manifold, comma separated")
    a.add_argument("--eps")
    a.add_argument("--mode", choices=PINCH_MODES)

    r = common(sub.add_parser("regularize", help="build a regularized smooth system"), ("json",))
    r.add_argument("--transition", help="monotonic transition (poly_c1, linear_clip)")
    r.add_argument("--delta", type=float)
    r.add_argument("--psi", help="also check the equivalent psi-regularization")

    q = common(sub.add_parser("pinch", help="pinch, complete and verify"), ("json",))
    q.add_argument("--mode", choices=PINCH_MODES)
    q.add_argument("--eps", help="eps ladder, comma separated")

    w = common(sub.add_parser("sweep", help="run a task over parameter values"))
    w.add_argument("--param", help="delta, eps or a model parameter name")
    w.add_argument("--values", help="comma separated values")
    w.add_argument("--task", choices=SWEEP_TASKS)
    w.add_argument("--mode", choices=PINCH_MODES)
    w.add_argument("--eps")
    return p


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, HypothesisError):
        return EXIT_HYPOTHESIS
    if isinstance(exc, (ConfigError, ModelError, ExpressionError, OffManifoldError, PreconditionError)):
        return EXIT_CONFIG
    if isinstance(exc, (IntegrationError, HiddenDynamicsError, ArithmeticError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def main(argv=None) -> int:
    argv = _join_negative_lists(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = _load(args)
        text, extra = COMMANDS[args.command](cfg, args)
        _emit(text, args.output)
        if extra is not None:
            path = args.events or (args.output + ".events.json" if args.output else None)
            if path:
                _emit(_json(extra["events"]), path)
    except Exception as exc:  # mapped to exit codes
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
