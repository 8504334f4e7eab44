"""Command-line front end: densities, simulations, tangent studies, jump
statistics and transform-identity verification, emitted as CSV/JSON.

Exit codes: 0 success, 1 usage or validation error, 2 failed verification
verdict (so CI can gate on `qtangent verify` and `qtangent tangent`).
Identical argv and seed produce byte-identical output files; floats are
printed with shortest round-trip representation.
"""

import argparse
import json
import os
import re
import sys

import numpy as np

from . import __version__, freeprob, simulate as sim, tangent as tg
from .errors import QTangentError
from .kernels import (
    biane_half_pdf,
    biane_shifted_pdf,
    cauchy_marginal,
    cauchy_transition_pdf,
    half_stable_marginal,
    qbm_transition_pdf,
    qnormal_pdf,
    qou_transition_pdf,
)
from .qspecial import QParams
from .sampling import SeedSpec
from .verify import kernels_verification_report, tangent_verification_report

__all__ = ["main", "parse_and_dispatch"]


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the contract here is 1
    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        # accept grid/ladder values like -2:2:401 as option arguments
        self._negative_number_matcher = re.compile(r"^-\d")

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _fmt(x):
    return repr(float(x))


def _parse_grid(spec):
    try:
        lo, hi, count = spec.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError as exc:
        raise _UsageError(f"grid must be lo:hi:count, got {spec!r}") from exc
    if count < 2 or not hi > lo:
        raise _UsageError(f"grid needs lo < hi and count >= 2, got {spec!r}")
    return np.linspace(lo, hi, count)


def _parse_ladder(spec):
    try:
        vals = tuple(float(tok) for tok in spec.split(","))
    except ValueError as exc:
        raise _UsageError(f"ladder must be comma-separated floats, got {spec!r}") from exc
    if len(vals) < 2 or any(b >= a for a, b in zip(vals, vals[1:])):
        raise _UsageError("ladder must be strictly decreasing")
    return vals


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv(rows, header):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _envelope(command, result):
    return json.dumps(
        {"tool": "qtangent", "version": __version__, "command": command, "result": result},
        indent=2,
    ) + "\n"


def _build_parser():
    parser = _Parser(prog="qtangent", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qtangent {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    d = subs.add_parser("density", help="tabulate a marginal or transition density")
    d.add_argument("--process", required=True,
                   choices=["qnormal", "qou", "qbm", "cauchy", "biane_half",
                            "biane_shifted", "half_stable", "cauchy_marginal"])
    d.add_argument("--q", type=float, help="deformation parameter in (-1, 1)")
    d.add_argument("--grid", required=True, help="evaluation grid lo:hi:count")
    d.add_argument("--t", type=float, help="marginal time (half_stable, cauchy_marginal)")
    d.add_argument("--delta", type=float, help="time lag (qou)")
    d.add_argument("--x", type=float, help="conditioning state (qou)")
    d.add_argument("--t1", type=float, help="start time (two-time kernels)")
    d.add_argument("--t2", type=float, help="end time (two-time kernels)")
    d.add_argument("--y1", type=float, help="start state (two-time kernels)")
    d.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    d.add_argument("--format", choices=["csv", "json"], default="csv")

    s = subs.add_parser("simulate", help="sample trajectories by exact transition sampling")
    s.add_argument("--process", required=True, choices=["qou", "qbm"])
    s.add_argument("--q", type=float, required=True)
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--t1", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--paths", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--init", default=None,
                   help="stationary | origin | fixed:X (defaults: qou stationary, qbm origin)")
    s.add_argument("--threads", type=int, default=os.cpu_count())
    s.add_argument("--output-dir", default=".", help="directory for path_###.csv files")

    t = subs.add_parser("tangent", help="convergence study of a tangent-process limit")
    t.add_argument("--case", required=True,
                   choices=["qou_interior", "qou_boundary", "qbm_interior", "qbm_boundary"])
    t.add_argument("--q", type=float, required=True)
    t.add_argument("--x", type=float, help="interior location")
    t.add_argument("--s", type=float, help="base time (qbm cases)")
    t.add_argument("--ladder", default="0.2,0.1,0.05,0.02,0.01",
                   help="decreasing eps values, comma separated")
    t.add_argument("--horizon", type=float, default=None,
                   help="window pair-time t2 (default: calibrated per case)")
    t.add_argument("--resolution", type=int, default=2001)
    t.add_argument("--threshold", type=float, default=0.02)
    t.add_argument("--slack", type=float, default=0.10)
    t.add_argument("--coverage", type=float, default=0.99)
    t.add_argument("--wrong-scale", type=float, default=None,
                   help="override the limit scale (negative control)")
    t.add_argument("--output", "-o", default=None)

    j = subs.add_parser("jumps", help="large-jump statistics against the closed-form bound")
    j.add_argument("--q", type=float, required=True)
    j.add_argument("--S", type=float, default=0.0)
    j.add_argument("--T", type=float, required=True)
    j.add_argument("--a", type=float, required=True, help="jump size threshold")
    j.add_argument("--paths", type=int, default=500)
    j.add_argument("--steps", type=int, default=500)
    j.add_argument("--seed", type=int, default=0)
    j.add_argument("--threads", type=int, default=os.cpu_count())
    j.add_argument("--output", "-o", default=None)

    b = subs.add_parser("biane", help="Biane transition transform against the closed kernel")
    b.add_argument("--s", type=float, required=True)
    b.add_argument("--t", type=float, required=True)
    b.add_argument("--x", type=float, required=True)
    b.add_argument("--grid", required=True, help="state grid lo:hi:count (y > 0)")
    b.add_argument("--output", "-o", default=None)
    b.add_argument("--format", choices=["csv", "json"], default="csv")

    v = subs.add_parser("verify", help="run a verification suite; exit 2 on failure")
    v.add_argument("--suite", choices=["freeprob", "kernels", "tangent", "all"],
                   default="all")
    v.add_argument("--samples", type=int, default=200)
    v.add_argument("--seed", type=int, default=20260808)
    v.add_argument("--output", "-o", default=None)
    return parser


def _cmd_density(args):
    grid = _parse_grid(args.grid)
    proc = args.process
    if proc in ("qnormal", "qou", "qbm") and args.q is None:
        raise _UsageError(f"--q is required for {proc}")
    if proc == "qnormal":
        pdf = qnormal_pdf(QParams(args.q), grid)
    elif proc == "qou":
        if args.delta is None or args.x is None:
            raise _UsageError("qou needs --delta and --x")
        pdf = qou_transition_pdf(QParams(args.q), args.delta, args.x, grid)
    elif proc == "qbm":
        if args.t1 is None or args.t2 is None or args.y1 is None:
            raise _UsageError("qbm needs --t1, --t2 and --y1")
        pdf = qbm_transition_pdf(QParams(args.q), args.t1, args.t2, args.y1, grid)
    elif proc in ("cauchy", "biane_half", "biane_shifted"):
        if args.t1 is None or args.t2 is None or args.y1 is None:
            raise _UsageError(f"{proc} needs --t1, --t2 and --y1")
        fn = {"cauchy": cauchy_transition_pdf, "biane_half": biane_half_pdf,
              "biane_shifted": biane_shifted_pdf}[proc]
        pdf = fn(args.t1, args.t2, args.y1, grid)
    else:
        if args.t is None:
            raise _UsageError(f"{proc} needs --t")
        fn = half_stable_marginal if proc == "half_stable" else cauchy_marginal
        pdf = fn(args.t, grid)
    if args.format == "csv":
        _write_text(args.output, _csv(zip(grid, pdf), ["x", "pdf"]))
    else:
        result = {"process": proc, "x": [float(v) for v in grid], "pdf": [float(v) for v in pdf]}
        _write_text(args.output, _envelope("density", result))
    return 0


def _parse_init(spec, process):
    if spec is None:
        return sim.Stationary() if process == "qou" else sim.Origin()
    if spec == "stationary":
        return sim.Stationary()
    if spec == "origin":
        return sim.Origin()
    if spec.startswith("fixed:"):
        return sim.Fixed(float(spec.split(":", 1)[1]))
    raise _UsageError(f"unknown init {spec!r}; use stationary | origin | fixed:X")


def _cmd_simulate(args):
    p = QParams(args.q)
    grid = sim.TimeGrid(args.t0, args.t1, args.steps)
    init = _parse_init(args.init, args.process)
    paths = sim.simulate_ensemble(args.process, p, grid, init, args.seed, args.paths,
                                  threads=max(1, args.threads))
    os.makedirs(args.output_dir, exist_ok=True)
    names = []
    for i, path in enumerate(paths):
        name = os.path.join(args.output_dir, f"path_{i:03d}.csv")
        _write_text(name, _csv(zip(path.times, path.values), ["t", "value"]))
        names.append(name)
    sys.stderr.write(f"wrote {len(names)} path files to {args.output_dir}\n")
    return 0


def _cmd_tangent(args):
    case = tg.TangentCase(args.case, args.q, x=args.x, s=args.s)
    window = tg.default_window(case, coverage=args.coverage, horizon=args.horizon)
    report = tg.convergence_study(
        case, _parse_ladder(args.ladder), window=window, resolution=args.resolution,
        threshold=args.threshold, slack=args.slack, scale_override=args.wrong_scale,
    )
    _write_text(args.output, _envelope("tangent", report.to_dict()))
    return 0 if report.verdict else 2


def _cmd_jumps(args):
    seed = SeedSpec(args.seed)
    stats = sim.sup_jump_estimate(args.q, args.S, args.T, args.a, args.paths,
                                  args.steps, seed, threads=max(1, args.threads))
    bound = sim.jump_bound(args.q, args.S, args.T, args.a)
    result = {
        "q": args.q, "S": args.S, "T": args.T, "a": args.a,
        "paths": args.paths, "steps": args.steps,
        "exceed_fraction": stats.exceed_fraction,
        "exceed_count": stats.exceed_count,
        "max_abs_increment": stats.max_abs_increment,
        "binomial_std_error": stats.binomial_std_error,
        "bound": bound,
        "within_bound": bool(stats.exceed_fraction <= bound + 3.0 * stats.binomial_std_error),
    }
    _write_text(args.output, _envelope("jumps", result))
    return 0


def _cmd_biane(args):
    grid = _parse_grid(args.grid)
    if grid[0] <= 0.0:
        raise _UsageError("biane grid must have lo > 0")
    closed = biane_shifted_pdf(args.s, args.t, args.x, grid)
    inverted = np.array([
        freeprob.stieltjes_invert(lambda z: freeprob.biane_H(args.s, args.t, args.x, z), y)
        for y in grid
    ])
    if args.format == "csv":
        _write_text(args.output,
                    _csv(zip(grid, closed, inverted), ["y", "kernel", "inverted_transform"]))
    else:
        result = {"s": args.s, "t": args.t, "x": args.x,
                  "y": [float(v) for v in grid],
                  "kernel": [float(v) for v in closed],
                  "inverted_transform": [float(v) for v in inverted]}
        _write_text(args.output, _envelope("biane", result))
    return 0


def _cmd_verify(args):
    seed = SeedSpec(args.seed)
    report = []
    if args.suite in ("freeprob", "all"):
        report += freeprob.verification_report(sample_points=args.samples, seed=seed)
    if args.suite in ("kernels", "all"):
        report += kernels_verification_report(
            n_sets=min(args.samples, 50), n_points=min(2 * args.samples, 100), seed=seed)
    if args.suite in ("tangent", "all"):
        report += tangent_verification_report()
    ok = all(row["pass"] for row in report)
    _write_text(args.output, _envelope("verify", report))
    return 0 if ok else 2


_DISPATCH = {
    "density": _cmd_density,
    "simulate": _cmd_simulate,
    "tangent": _cmd_tangent,
    "jumps": _cmd_jumps,
    "biane": _cmd_biane,
    "verify": _cmd_verify,
}


def parse_and_dispatch(argv):
    """Parse argv (without the program name) and run; returns the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _DISPATCH[args.command](args)
    except _UsageError as exc:
        sys.stderr.write(f"qtangent: error: {exc}\n")
        return 1
    except QTangentError as exc:
        sys.stderr.write(f"qtangent: error: {exc}\n")
        return 1


def main():
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
