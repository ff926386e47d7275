"""Command-line front end.

Exit status: 0 success, 1 a verification check failed, 2 usage or
configuration error, 3 the model violates a standing assumption.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from pathlib import Path

import numpy as np

from . import continuous as cont
from . import discrete as disc
from .errors import ConfigError, DivergenceError, DomainError, ModelAssumptionError, QuadIOCError
from .evidence import DEFAULT_BOX, SamplingSpec
from .systems import BUILTIN_CONFIGS, DISCRETE, UnknownSystemError, builtin_system, load_system_file
from .trajectory import Trajectory
from .verification import estimate_lipschitz, run_suite

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_MODEL = 0, 1, 2, 3

# options whose values may start with "-" (negative numbers)
_VALUE_OPTIONS = ("--x", "--x0", "--box")


class UsageError(Exception):
    pass


def _fmt(v: float) -> str:
    return format(float(v), ".6g")


def parse_vector(text: str, n: int | None = None, what: str = "state") -> np.ndarray:
    try:
        vec = np.array([float(p) for p in text.split(",")], dtype=float)
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r}; expected comma-separated numbers") from None
    if not np.all(np.isfinite(vec)):
        raise UsageError(f"{what} must be finite")
    if n is not None and vec.size != n:
        raise UsageError(f"{what} has {vec.size} entries, the system has n={n}")
    return vec


def parse_box(text: str) -> tuple[tuple[float, float], ...]:
    """``lo:hi`` for every coordinate, or ``lo:hi,lo:hi,...`` per coordinate."""
    box = []
    for part in text.split(","):
        try:
            lo, hi = (float(v) for v in part.split(":"))
        except ValueError:
            raise UsageError(f"cannot parse box interval {part!r}; expected lo:hi") from None
        if not lo < hi:
            raise UsageError(f"box interval {part!r} is empty")
        box.append((lo, hi))
    return tuple(box)


def _join_negative_values(argv: list[str]) -> list[str]:
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _VALUE_OPTIONS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadioc",
        description="Inverse optimal control for control-affine systems with quadratic value functions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def with_system(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--system", help="built-in system name (see list-systems)")
        src.add_argument("--config", type=Path, help="path to a system config JSON file")
        return p

    def with_sampling(p, samples):
        p.add_argument("--samples", type=int, default=samples, help=f"sample count (default {samples})")
        p.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
        p.add_argument("--box", help="sampling box lo:hi or lo:hi,lo:hi,... (default -10:10)")
        return p

    sub.add_parser("list-systems", help="list built-in systems")

    p = with_system(sub.add_parser("control", help="print the optimal control u(x)"))
    p.add_argument("--x", required=True, help="state, comma-separated")

    p = with_system(sub.add_parser("q", help="print the synthesized state weight Q(x)"))
    p.add_argument("--x", required=True, help="state, comma-separated")

    p = with_system(sub.add_parser("simulate", help="simulate the optimal closed loop"))
    p.add_argument("--x0", required=True, help="initial state, comma-separated")
    p.add_argument("--steps", type=int, required=True, help="number of steps")
    p.add_argument("--dt", type=float, help="integration step (continuous systems, required)")
    p.add_argument("--out", type=Path, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = with_sampling(with_system(sub.add_parser("verify", help="run every sampled check")), 1000)
    p.add_argument("--steps", type=int, help="rollout horizon in steps (default 200 discrete, T/dt continuous)")
    p.add_argument("--dt", type=float, default=1e-3, help="rollout integration step (default 1e-3)")
    p.add_argument("--out", type=Path, help="write the JSON report here (default stdout)")
    p.add_argument("--format", choices=("json",), default="json")

    p = with_sampling(
        with_system(sub.add_parser("gamma-bound", help="estimate L and the admissible discount")), 100_000
    )
    return parser


def _load(args):
    if args.system is not None:
        return builtin_system(args.system)
    return load_system_file(args.config)


def _spec(args) -> SamplingSpec:
    box = parse_box(args.box) if args.box else (DEFAULT_BOX,)
    try:
        return SamplingSpec(box, args.samples, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_list_systems(args, out) -> int:
    for name, cfg in BUILTIN_CONFIGS.items():
        print(f"{name:24s} {cfg['regime']:10s} n={cfg['n']} m={cfg['m']} gamma={cfg['gamma']}", file=out)
    return EXIT_OK


def cmd_control(args, out) -> int:
    sys = _load(args)
    x = parse_vector(args.x, sys.n)
    if sys.regime == DISCRETE:
        u = disc.optimal_control_discrete(sys, x)
    else:
        u = cont.optimal_control_continuous(sys, x)
    print("u = " + ", ".join(_fmt(v) for v in np.atleast_1d(u)), file=out)
    return EXIT_OK


def cmd_q(args, out) -> int:
    sys = _load(args)
    x = parse_vector(args.x, sys.n)
    if sys.regime == DISCRETE:
        q = disc.synthesize_q_discrete(sys, x)
    else:
        q = cont.synthesize_q_continuous(sys, x)
    print(f"Q = {_fmt(q)}", file=out)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    sys = _load(args)
    x0 = parse_vector(args.x0, sys.n, "initial state")
    if args.steps < 0:
        raise UsageError("--steps must be non-negative")
    if sys.regime == DISCRETE:
        traj = disc.simulate_discrete(sys, x0, args.steps)
    else:
        if args.dt is None:
            raise UsageError("continuous systems need an explicit --dt")
        if not args.dt > 0:
            raise UsageError("--dt must be positive")
        traj = cont.integrate_closed_loop(sys, x0, args.dt, args.steps)
    _write_trajectory(traj, args.format, args.out, out)
    return EXIT_OK


def _write_trajectory(traj: Trajectory, fmt: str, path, out) -> None:
    text = traj.to_csv() if fmt == "csv" else traj.to_json() + "\n"
    if path is None:
        out.write(text)
    else:
        Path(path).write_text(text)


def cmd_verify(args, out) -> int:
    sys = _load(args)
    spec = _spec(args)
    if args.steps is not None and args.steps < 1:
        raise UsageError("--steps must be positive")
    if not args.dt > 0:
        raise UsageError("--dt must be positive")
    if sys.regime == DISCRETE:
        horizon = args.steps
    else:
        horizon = None if args.steps is None else args.steps * args.dt
    reports = run_suite(sys, spec, horizon=horizon, dt_step=args.dt)
    ok = not any(r.failed for r in reports)
    document = {
        "system": sys.name,
        "samples": spec.count,
        "seed": spec.seed,
        "box": [list(b) for b in spec.box],
        "pass": ok,
        "checks": [r.to_dict() for r in reports],
    }
    text = json.dumps(document, indent=2) + "\n"
    if args.out is None:
        out.write(text)
        log = _sys.stderr
    else:
        Path(args.out).write_text(text)
        log = out
    for r in reports:
        print(r.summary(), file=log)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_gamma_bound(args, out) -> int:
    sys = _load(args)
    L = estimate_lipschitz(sys, _spec(args))
    print(f"L_hat = {_fmt(L.L_hat)} (sampled lower bound, {L.samples} samples)", file=out)
    if sys.regime == DISCRETE:
        print(f"gamma <= {_fmt(disc.max_discount_discrete(L))}", file=out)
    else:
        print(f"gamma >= {_fmt(cont.min_discount_continuous(L))}", file=out)
    return EXIT_OK


COMMANDS = {
    "list-systems": cmd_list_systems,
    "control": cmd_control,
    "q": cmd_q,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "gamma-bound": cmd_gamma_bound,
}


def main(argv=None, out=None) -> int:
    out = _sys.stdout if out is None else out
    argv = list(_sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, ConfigError, UnknownSystemError) as exc:
        print(f"quadioc: error: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except (ModelAssumptionError, DomainError, DivergenceError) as exc:
        print(f"quadioc: model assumption violated: {exc}", file=_sys.stderr)
        return EXIT_MODEL
    except QuadIOCError as exc:
        print(f"quadioc: error: {exc}", file=_sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    _sys.exit(main())
