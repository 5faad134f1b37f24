"""Command-line front end.

Subcommands: outage, derivatives, check, sweep, plot.  Every numeric
result is written as CSV in one fixed schema (see ``results.COLUMNS``).
Exit codes: 0 success, 2 usage error, 3 numerical failure, 130 interrupt.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import plotting, timo
from ._accel import BACKENDS
from .core import ChannelSpec, PowerSplit
from .mcsim import DEFAULT_MC_SAMPLES, RandomStream, mc_outage_direct, mc_outage_timo_reduced
from .mimo_general import SpecialQ, mc_outage_special_q, theorem2_check
from .results import RowWriter, make_row, read_rows_path
from .specfun import ConvergenceError, QuadratureSpec
from .sweep import SweepGrid, SweepRecord, label_regions, parse_range, run_sweep

EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_INTERRUPT = 130
SEED_ENV = "OUTAGE_LAB_SEED"
METHOD_NAMES = {
    "quadrature": "quadrature",
    "mc-direct": "mc_direct",
    "mc-reduced": "mc_reduced",
    "mc-special-q": "mc_special_q",
}


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--tol", type=float, help="relative quadrature tolerance (absolute is tol/100; default 1e-8)")
    p.add_argument("--seed", type=int, help=f"random seed (default ${SEED_ENV} or 0)")
    p.add_argument("--jobs", type=int, help="worker processes for sweeps (default 1)")
    p.add_argument("--config", help="JSON file of flag values; flags on the command line win")
    p.add_argument("--backend", choices=BACKENDS, help="kernel backend (default $OUTAGE_LAB_BACKEND or numba)")
    p.add_argument("--bits", action="store_true", default=None, help="read R in bits instead of nats")
    return p


def _channel_flags(p: argparse.ArgumentParser, t: bool = False) -> None:
    if t:
        p.add_argument("--t", type=int, help="transmit antennas (default 2)")
    p.add_argument("--r", type=int, help="receive antennas")
    p.add_argument("--R", type=float, help="target rate (nats unless --bits)")
    p.add_argument("--P", type=float, help="total transmit power")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="outage-lab", description="Outage probability toolkit for MIMO Rayleigh channels.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("outage", parents=[common], help="evaluate one outage probability")
    _channel_flags(p, t=True)
    p.add_argument("--q1", type=float, help="power on antenna 1 when t=2 (q2 = P - q1)")
    p.add_argument("--q", help="comma-separated power vector for any t")
    p.add_argument("--method", choices=list(METHOD_NAMES), help="default quadrature")
    p.add_argument("--n", type=int, help=f"Monte Carlo draws (default {DEFAULT_MC_SAMPLES})")
    p.add_argument("--no-header", action="store_true", default=None)

    p = sub.add_parser("derivatives", parents=[common], help="first and second derivatives along q1 + q2 = P")
    _channel_flags(p)
    p.add_argument("--q1", type=float, help="evaluation point (default: q1 = 0 and q1 = P/2)")
    p.add_argument("--no-fd", action="store_true", default=None, help="skip finite-difference cross-checks")

    p = sub.add_parser("check", parents=[common], help="derivative test (1) or paired Monte Carlo test (2)")
    p.add_argument("--theorem", type=int, choices=(1, 2))
    _channel_flags(p, t=True)
    p.add_argument("--tau", type=float, help="sign tolerance for theorem 1 (default 1e-6)")
    p.add_argument("--k", type=int, help="active antennas for theorem 2")
    p.add_argument("--eps", type=float, help="power moved for theorem 2 (default 0.025 P/k)")
    p.add_argument("--n", type=int, help=f"Monte Carlo draws for theorem 2 (default {DEFAULT_MC_SAMPLES})")

    p = sub.add_parser("sweep", parents=[common], help="grid sweep over (R, P)")
    p.add_argument("--r", type=int, help="receive antennas")
    p.add_argument("--R-range", dest="R_range", help="start:stop:step as multiples of r")
    p.add_argument("--P-range", dest="P_range", help="start:stop:step as multiples of r")
    p.add_argument("--q-step", dest="q_step", type=float, help="q1 grid step as a fraction of P (default 0.025)")
    p.add_argument("--out", help="output CSV path")

    p = sub.add_parser("plot", parents=[common], help="write an SVG figure")
    p.add_argument("--kind", choices=("curve", "map"))
    p.add_argument("--in", dest="input", help="input CSV (curve mode may use --r/--R/--P instead)")
    p.add_argument("--out", help="output SVG path")
    _channel_flags(p)
    p.add_argument("--points", type=int, help="curve points over q1 in [0, P] (default 41)")
    p.add_argument("--mc-points", dest="mc_points", type=int, help="Monte Carlo points on the curve (default 11)")
    p.add_argument("--n", type=int, help="draws per Monte Carlo point (default 0 = none)")
    parser.subcommand_parsers = dict(sub.choices)
    return parser


# ---------------------------------------------------------------------------
# argument plumbing


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object of flag values")
    return {k.lstrip("-").replace("-", "_"): v for k, v in cfg.items()}


def _merge_config(args: argparse.Namespace, sub: argparse.ArgumentParser) -> argparse.Namespace:
    """Fill flags left unset on the command line from the JSON config."""
    if not args.config:
        return args
    cfg = _load_config(args.config)
    actions = {a.dest: a for a in sub._actions}
    for key, value in cfg.items():
        if key in ("help", "config") or key not in actions:
            raise UsageError(f"config key {key!r} is not a flag of '{args.command}'")
        if getattr(args, key) is not None:
            continue
        action = actions[key]
        if value is not None and action.type is not None:
            try:
                value = action.type(value)
            except (TypeError, ValueError):
                raise UsageError(f"config key {key!r}: bad value {value!r}") from None
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config key {key!r} must be one of {list(action.choices)}")
        setattr(args, key, value)
    return args


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"missing required flag(s): {flags}")


def _seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}") from None


def _quad(args) -> QuadratureSpec:
    if args.tol is None:
        return QuadratureSpec()
    if not args.tol > 0:
        raise UsageError("--tol must be positive")
    return QuadratureSpec(abs_tol=args.tol * 1e-2, rel_tol=args.tol)


def _rate(args, R: float) -> float:
    return R * math.log(2.0) if args.bits else R


def _spec(args, t: int = 2) -> ChannelSpec:
    _need(args, "r", "R", "P")
    return ChannelSpec(t, args.r, _rate(args, args.R), args.P)


def _stdout_writer(header: bool = True) -> RowWriter:
    return RowWriter(sys.stdout, header)


# ---------------------------------------------------------------------------
# subcommands


def _power_vector(args, spec: ChannelSpec) -> np.ndarray:
    if args.q is not None:
        try:
            q = np.array([float(x) for x in str(args.q).split(",")])
        except ValueError:
            raise UsageError(f"--q must be comma-separated numbers, got {args.q!r}") from None
        if q.size != spec.t:
            raise UsageError(f"--q has {q.size} entries but t={spec.t}")
        return q
    if args.q1 is None:
        raise UsageError("give --q1 (t=2) or --q")
    if spec.t != 2:
        raise UsageError("--q1 needs t=2; use --q for other t")
    return np.array([args.q1, spec.power_P - args.q1])


def _special_q(q: np.ndarray, spec: ChannelSpec) -> SpecialQ:
    nz = np.flatnonzero(q > 0)
    k = nz.size
    if k < 2 or not np.array_equal(nz, np.arange(k)):
        raise UsageError("mc-special-q needs the nonzero powers first, at least two of them")
    q0 = float(q[0]) if k > 2 else 0.0
    if k > 2 and np.any(q[: k - 2] != q0):
        raise UsageError("mc-special-q allows only the last two nonzero powers to differ from the rest")
    return SpecialQ(q0, float(q[k - 2]), float(q[k - 1]), k, spec.t)


def cmd_outage(args) -> int:
    spec = _spec(args, args.t or 2)
    method = args.method or "quadrature"
    q = _power_vector(args, spec)
    if abs(q.sum() - spec.power_P) > 1e-12:
        raise UsageError(f"powers sum to {q.sum()!r}, expected P={spec.power_P!r}")
    seed = _seed(args)
    n = args.n or DEFAULT_MC_SAMPLES
    stream = RandomStream(seed, 0)
    if method in ("quadrature", "mc-reduced") and spec.t != 2:
        raise UsageError(f"{method} needs t=2")
    if method == "quadrature":
        est = timo.outage_timo(PowerSplit(q[0], q[1]), spec, _quad(args), backend=args.backend)
        seed = None
    elif method == "mc-reduced":
        est = mc_outage_timo_reduced(PowerSplit(q[0], q[1]), spec, n, stream, backend=args.backend)
    elif method == "mc-direct":
        est = mc_outage_direct(q, spec, n, stream, backend=args.backend)
    else:
        est = mc_outage_special_q(_special_q(q, spec), spec, n, stream, backend=args.backend)
    if est.n_errors:
        print(f"warning: {est.n_errors} draws failed to factorize and were excluded", file=sys.stderr)
    row = make_row(
        method=est.method, t=spec.t, r=spec.r, R=spec.rate_R, P=spec.power_P,
        q1=float(q[0]), q2=float(q[1]) if q.size > 1 else None,
        value=est.p_hat, uncertainty=est.stderr, n_samples=est.n_samples, seed=seed,
    )
    _stdout_writer(not args.no_header).write(row)
    return 0


def _deriv_row(spec, name, q1, value, uncertainty=None):
    return make_row(method=name, t=2, r=spec.r, R=spec.rate_R, P=spec.power_P,
                    q1=q1, q2=spec.power_P - q1, value=value, uncertainty=uncertainty)


def cmd_derivatives(args) -> int:
    spec = _spec(args)
    quad = _quad(args)
    P = spec.power_P
    out = _stdout_writer()
    points = [(args.q1, "")] if args.q1 is not None else [(0.0, "_at_zero"), (P / 2, "_at_half")]
    for q1, suffix in points:
        if not 0 <= q1 <= P:
            raise UsageError(f"--q1 must lie in [0, P], got {q1}")
        d1 = timo.total_first_derivative(q1, spec, quad, backend=args.backend)
        d2 = timo.total_second_derivative(q1, spec, quad, backend=args.backend)
        out.write(_deriv_row(spec, "d1" + suffix, q1, d1))
        out.write(_deriv_row(spec, "d2" + suffix, q1, d2))
        if not args.no_fd:
            f1, f2 = timo.fd_total_derivatives(q1, spec, backend=args.backend)
            out.write(_deriv_row(spec, "d1" + suffix + "_fd", q1, f1, abs(f1 - d1)))
            out.write(_deriv_row(spec, "d2" + suffix + "_fd", q1, f2, abs(f2 - d2)))
    return 0


def _check1(args) -> int:
    spec = _spec(args)
    tau = timo.DEFAULT_TAU if args.tau is None else args.tau
    if not tau > 0:
        raise UsageError("--tau must be positive")
    v = timo.theorem1_check(spec, _quad(args), tau=tau, backend=args.backend)
    print(f"# verdict: {v.verdict} (counterexample_found={str(v.counterexample_found).lower()}, tau={tau!r})")
    for key, val in v.values.items():
        print(f"# {key} = {val!r}")
    for note in v.notes:
        print(f"# {note}")
    out = _stdout_writer()
    base = dict(t=2, r=spec.r, R=spec.rate_R, P=spec.power_P)
    for key, val in v.values.items():
        out.write(make_row(method=f"theorem1.{key}", value=val, uncertainty=tau, **base))
    out.write(make_row(method="theorem1", verdict=v.verdict, **base))
    return 0


def _check2(args) -> int:
    t = args.t or 2
    spec = _spec(args, t)
    _need(args, "k")
    seed = _seed(args)
    n = args.n or DEFAULT_MC_SAMPLES
    v = theorem2_check(args.k, spec, args.eps, n, RandomStream(seed, 0), backend=args.backend)
    print(f"# pattern k={v.k} of t={v.t}: {v.verdict} (eps={v.eps!r}, n={v.n}, z={v.meta['z']})")
    if v.delta_prime is not None:
        print(f"# idle-slot transfer: delta = {v.delta_prime!r} +/- {v.stderr_prime!r}")
    else:
        print("# idle-slot transfer: not applicable (k = t)")
    if v.delta_double is not None:
        print(f"# active-slot transfer: delta = {v.delta_double!r} +/- {v.stderr_double!r}")
        if v.second_order is not None:
            print(f"# second-order coefficient delta/eps^2 = {v.second_order!r}; "
                  f"significantly positive: {str(v.second_order_positive).lower()}, "
                  f"significantly negative: {str(v.second_order_negative).lower()}")
    else:
        print("# active-slot transfer: not applicable (k = 1)")
    out = _stdout_writer()
    base = dict(t=t, r=spec.r, R=spec.rate_R, P=spec.power_P, n_samples=v.n, seed=seed)
    tag = f"theorem2[k={v.k}]"
    if v.delta_prime is not None:
        out.write(make_row(method=f"{tag}.delta_prime", value=v.delta_prime, uncertainty=v.stderr_prime, **base))
    if v.delta_double is not None:
        out.write(make_row(method=f"{tag}.delta_double", value=v.delta_double, uncertainty=v.stderr_double, **base))
        if v.second_order is not None:
            out.write(make_row(method=f"{tag}.second_order", value=v.second_order,
                               uncertainty=v.stderr_double / v.eps**2, **base))
    out.write(make_row(method=tag, verdict=v.verdict, value=v.eps, **base))
    return 0


def cmd_check(args) -> int:
    _need(args, "theorem")
    return _check1(args) if args.theorem == 1 else _check2(args)


def cmd_sweep(args) -> int:
    _need(args, "r", "R_range", "P_range", "out")
    try:
        R_range = parse_range(args.R_range)
        P_range = parse_range(args.P_range)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.bits:
        R_range = tuple(x * math.log(2.0) for x in R_range)
    grid = SweepGrid(args.r, R_range, P_range, args.q_step or 0.025)
    jobs = args.jobs or 1
    if jobs < 1:
        raise UsageError("--jobs must be at least 1")
    seed = _seed(args)
    records = []
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = RowWriter(fh)

        def emit(rec):
            records.append(rec)
            writer.write(rec.to_row())

        try:
            run_sweep(grid, _quad(args), jobs=jobs, seed=seed, backend=args.backend, on_record=emit)
        except KeyboardInterrupt:
            fh.flush()
            print(f"interrupted: {len(records)} of {len(grid.cells())} cells written to {args.out}", file=sys.stderr)
            return EXIT_INTERRUPT
    counts = {}
    for rec in records:
        counts[rec.verdict] = counts.get(rec.verdict, 0) + 1
    regions = label_regions(records)[0]
    summary = ", ".join(f"{k}={counts[k]}" for k in sorted(counts))
    print(f"{len(records)} cells: {summary}; counterexample regions: {regions}", file=sys.stderr)
    return 0


def _curve_from_rows(rows):
    quad = sorted((r["q1"], r["value"]) for r in rows if r["method"] == "quadrature" and r["q1"] is not None)
    mc = sorted((r["q1"], r["value"], r["uncertainty"] or 0.0)
                for r in rows if r["method"].startswith("mc_") and r["q1"] is not None)
    if len(quad) < 2:
        raise UsageError("curve CSV needs at least two quadrature rows")
    q, f = zip(*quad)
    return list(q), list(f), mc


def _curve_direct(args):
    spec = _spec(args)
    quad = _quad(args)
    points = args.points or 41
    if points < 2:
        raise UsageError("--points must be at least 2")
    P = spec.power_P
    q = [P * i / (points - 1) for i in range(points)]
    f = [timo.outage_value(x, spec, quad, backend=args.backend) for x in q]
    mc = []
    n = args.n or 0
    if n > 0:
        m = args.mc_points or 11
        seed = _seed(args)
        for i in range(m):
            x = P * i / (m - 1) if m > 1 else 0.0
            est = mc_outage_timo_reduced(PowerSplit.on_line(x, P), spec, n, RandomStream(seed, i), backend=args.backend)
            mc.append((x, est.p_hat, est.stderr))
    return q, f, mc


def cmd_plot(args) -> int:
    _need(args, "kind", "out")
    if args.kind == "map":
        _need(args, "input")
        rows = read_rows_path(args.input)
        records = [SweepRecord.from_row(r) for r in rows if r["verdict"] is not None]
        svg = plotting.render_map(records)
    elif args.input is not None:
        q, f, mc = _curve_from_rows(read_rows_path(args.input))
        svg = plotting.render_curve(q, f, mc)
    else:
        q, f, mc = _curve_direct(args)
        svg = plotting.render_curve(q, f, mc)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return 0


COMMANDS = {
    "outage": cmd_outage,
    "derivatives": cmd_derivatives,
    "check": cmd_check,
    "sweep": cmd_sweep,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args, parser.subcommand_parsers[args.command])
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, ArithmeticError) as exc:
        print(f"{parser.prog} {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
