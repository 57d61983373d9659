"""Command-line entry point: ``netclass <subcommand> [flags]``.

Tabular subcommands write CSV (``#``-prefixed header lines carry the run
parameters) or JSON; ``approx``, ``oneway`` and ``bounds`` always write JSON.
Exit codes: 0 success, 1 numerical-invariant violation, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

from . import __version__
from .approx import approx_from_gamma, approx_mean_stop
from .bounds import max_rectangle_prob, minimize_entropy_ratio, sum_rate_lower_bound_n2
from .exact import NumericalError, solve_mean_stop
from .interactive import (
    TRACE_CSV_HEADER,
    ProtocolInvariantError,
    run_session,
    sum_rate_per_round,
)
from .model import ConfigError, DyadicRational, InputVector, ProblemConfig
from .montecarlo import estimate_mean_stop, sample_input
from .oneway import evaluate, plan_rate, rate_floor

log = logging.getLogger("netclass")

DEFAULT_SEED = 20180101
DEFAULT_REPS = 20_000

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


@dataclass
class ExperimentGrid:
    """A sweep over node counts with ``m`` and ``a`` set by ratio rules."""

    n_list: list[int]
    beta: Fraction = Fraction(1, 2)
    alpha: Fraction = Fraction(0)
    pe_targets: list[float] = field(default_factory=list)
    reps: int = DEFAULT_REPS
    seed: int = DEFAULT_SEED
    output_format: str = "csv"

    def configs(self) -> list[ProblemConfig]:
        """Expanded configs; infeasible ``(n, beta, alpha)`` points are skipped with a warning."""
        out = []
        for n in self.n_list:
            m = self.beta * n
            a = self.alpha * n
            try:
                if m.denominator != 1:
                    raise ConfigError(f"beta*n = {m} is not an integer")
                out.append(ProblemConfig(n, int(m), DyadicRational.of(a)))
            except (ConfigError, ValueError) as exc:
                log.warning("skipping n=%d: %s", n, exc)
        return out


# --- argument helpers --------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None


def _dyadic(text: str) -> DyadicRational:
    try:
        return DyadicRational.parse(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


GLOBAL_DEFAULTS = {
    "seed": DEFAULT_SEED,
    "reps": DEFAULT_REPS,
    "fmt": "csv",
    "downlink": "log3",
    "n2_shared_leader": False,
    "workers": None,
    "output": None,
}


def _global_flags() -> argparse.ArgumentParser:
    # defaults are suppressed so flags may sit before or after the subcommand
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=_u64, help=f"master seed (default {DEFAULT_SEED})")
    g.add_argument("--reps", type=int, help=f"Monte Carlo repetitions (default {DEFAULT_REPS})")
    g.add_argument("--format", choices=("csv", "json"), dest="fmt")
    g.add_argument("--downlink", choices=("log3", "two-bit"), help="feedback bit accounting (default log3)")
    g.add_argument(
        "--n2-shared-leader",
        action="store_true",
        help="n=2 only: one sensor is the leader, 1 bit up and 1 bit back per round",
    )
    g.add_argument("--workers", type=int, help="worker threads (default $NETCLASS_THREADS or 1)")
    g.add_argument("--output", "-o", help="write to this file instead of stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    # each parser gets its own copy of the global flags: parents share action
    # objects, so the defaults set here would otherwise leak into subcommands
    parser = argparse.ArgumentParser(
        prog="netclass", description=__doc__.splitlines()[0], parents=[_global_flags()]
    )
    parser.set_defaults(**GLOBAL_DEFAULTS)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", parents=[_global_flags()], help="exact mean stopping times vs simulation")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--a", type=_dyadic, default=None, help="report a single integer threshold")

    p = sub.add_parser("growth", parents=[_global_flags()], help="stopping time as a function of n")
    p.add_argument("--n-list", type=_int_list, required=True)
    p.add_argument("--beta", type=_fraction, default=Fraction(1, 2), help="m/n (default 1/2)")
    p.add_argument("--alpha", type=_fraction, default=Fraction(0), help="a/n (default 0)")

    p = sub.add_parser("approx", parents=[_global_flags()], help="Gaussian approximation report (JSON)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--a", type=_dyadic)
    p.add_argument("--gamma", type=float)
    p.add_argument("--k-max", type=int, default=64)

    p = sub.add_parser("oneway", parents=[_global_flags()], help="one-way quantized protocol (JSON)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--a", type=_dyadic, required=True)
    res = p.add_mutually_exclusive_group(required=True)
    res.add_argument("--pe-target", type=float)
    res.add_argument("--M", type=int)
    p.add_argument("--variant", choices=("oneway", "oneway-plus"), default="oneway-plus")

    p = sub.add_parser("bounds", parents=[_global_flags()], help="entropy lower bounds (JSON)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--a", type=_dyadic, required=True)

    p = sub.add_parser("compare", parents=[_global_flags()], help="interactive vs one-way sum rates")
    p.add_argument("--n-list", type=_int_list, required=True)
    p.add_argument("--pe-target", type=float, required=True)
    p.add_argument("--integer-bits", action="store_true", help="charge ceil(log2 M) bits per node")

    p = sub.add_parser("session", parents=[_global_flags()], help="dump one protocol trace")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--a", type=_dyadic, required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--x", help="comma-separated inputs in [0, 1)")
    src.add_argument("--trial", type=int, help="draw the input of this trial index from --seed")
    return parser


# --- output helpers ----------------------------------------------------------


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def _write_table(
    out: io.TextIOBase, fmt: str, meta: dict[str, Any], header: Sequence[str], rows: list[Sequence[Any]]
) -> None:
    if fmt == "json":
        json.dump({"meta": meta, "rows": [dict(zip(header, r)) for r in rows]}, out, indent=2)
        out.write("\n")
        return
    for key, value in meta.items():
        out.write(f"# {key}={_fmt(value)}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([_fmt(v) for v in r])


def _write_json(out: io.TextIOBase, payload: dict[str, Any]) -> None:
    json.dump(payload, out, indent=2)
    out.write("\n")


def _downlink(args: argparse.Namespace, n: int) -> str:
    if args.n2_shared_leader:
        if n != 2:
            raise UsageError("--n2-shared-leader applies to n=2 only")
        return "n2-shared-leader"
    return args.downlink


def _config(n: int, m: int, a: DyadicRational) -> ProblemConfig:
    try:
        return ProblemConfig(n, m, a)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


# --- subcommands -------------------------------------------------------------


def cmd_exact(args: argparse.Namespace, out: io.TextIOBase) -> None:
    n, m = args.n, args.m
    if n < 2 or not 0 <= m <= n:
        raise UsageError(f"need n >= 2 and 0 <= m <= n, got n={n}, m={m}")
    if args.a is not None and not args.a.is_integer():
        raise UsageError(f"exact analysis needs an integer threshold, got a={args.a}")
    mode = _downlink(args, n)
    table = solve_mean_stop(n, m)
    states = table.states if args.a is None else (args.a.numerator,)
    if args.a is not None and args.a.numerator not in table.tbar:
        raise UsageError(f"a={args.a} is not an interior threshold for n={n}, m={m}")
    per_round = sum_rate_per_round(n, mode)
    rows = []
    for a in states:
        mc_mean = ci = None
        if args.reps > 0:
            stats = estimate_mean_stop(ProblemConfig(n, m, a), args.reps, args.seed, workers=args.workers)
            mc_mean, ci = stats.mean, stats.ci95_halfwidth
        rows.append((a, table[a], mc_mean, ci, per_round * table[a]))
    meta = {"command": "exact", "n": n, "m": m, "seed": args.seed, "reps": args.reps, "downlink": mode, "residual": table.residual}
    _write_table(out, args.fmt, meta, ("a", "Tbar_exact", "Tbar_mc", "ci", "sum_rate_bits"), rows)


def cmd_growth(args: argparse.Namespace, out: io.TextIOBase) -> None:
    grid = ExperimentGrid(args.n_list, args.beta, args.alpha, reps=args.reps, seed=args.seed)
    rows = []
    for config in grid.configs():
        stats = estimate_mean_stop(config, args.reps, args.seed, workers=args.workers)
        report = approx_mean_stop(config.n, config.m, config.a)
        rows.append((config.n, stats.mean, stats.ci95_halfwidth, report.approx_Tbar, report.bound))
    meta = {"command": "growth", "beta": str(args.beta), "alpha": str(args.alpha), "seed": args.seed, "reps": args.reps}
    _write_table(out, args.fmt, meta, ("n", "Tbar_mc", "ci", "Tbar_approx", "bound_A"), rows)


def cmd_approx(args: argparse.Namespace, out: io.TextIOBase) -> None:
    if args.gamma is not None:
        if args.m is not None or args.a is not None:
            raise UsageError("give either --gamma or both --m and --a")
        if not -0.5 <= args.gamma <= 0.5:
            raise UsageError("gamma must lie in [-1/2, 1/2]")
        if args.n < 2:
            raise UsageError("n must be >= 2")
        report = approx_from_gamma(args.n, args.gamma, args.k_max)
    else:
        if args.m is None or args.a is None:
            raise UsageError("give either --gamma or both --m and --a")
        _config(args.n, args.m, args.a)
        report = approx_mean_stop(args.n, args.m, args.a, args.k_max)
    _write_json(out, report.to_dict())


def cmd_oneway(args: argparse.Namespace, out: io.TextIOBase) -> None:
    config = _config(args.n, args.m, args.a)
    variant = "one_way_plus" if args.variant == "oneway-plus" else "one_way"
    if args.M is not None:
        if args.M < 1:
            raise UsageError("M must be >= 1")
        result = evaluate(config, args.M, variant, args.reps, args.seed, args.workers)
    else:
        if not 0 < args.pe_target < 1:
            raise UsageError("pe target must lie in (0, 1)")
        _, result = plan_rate(config.n, config.m, config.a, args.pe_target, variant, args.reps, args.seed, args.workers)
    _write_json(out, result.to_dict())


def cmd_bounds(args: argparse.Namespace, out: io.TextIOBase) -> None:
    config = _config(args.n, args.m, args.a)
    rect = max_rectangle_prob(config)
    v_star, ratio_min = minimize_entropy_ratio()
    payload: dict[str, Any] = {
        "config": str(config),
        "p1": rect.p1,
        "entropy_floor_bits": rect.entropy_floor_bits,
        "maximizer": list(rect.maximizer),
        "n2_bound_bits": None,
        "v_star": v_star,
        "ratio_min_bits": ratio_min,
    }
    if (config.n, config.m) == (2, 1) and config.a == 0:
        payload["n2_bound_bits"] = sum_rate_lower_bound_n2()
    _write_json(out, payload)


def cmd_compare(args: argparse.Namespace, out: io.TextIOBase) -> None:
    if not 0 < args.pe_target < 1:
        raise UsageError("pe target must lie in (0, 1)")
    odd = [n for n in args.n_list if n % 2]
    if odd:
        raise UsageError(f"compare needs even n (m = n/2), got {odd}")
    rows = []
    for n in args.n_list:
        config = _config(n, n // 2, DyadicRational(0))
        mode = _downlink(args, n)
        stats = estimate_mean_stop(config, args.reps, args.seed, workers=args.workers)
        M, plus = plan_rate(n, n // 2, 0, args.pe_target, "one_way_plus")
        bits = plus.quantizer.per_node_bits_ceil if args.integer_bits else plus.quantizer.per_node_bits
        rows.append((n, sum_rate_per_round(n, mode) * stats.mean, n * bits, n * (bits + 1), rate_floor(n, args.pe_target)))
    meta = {
        "command": "compare",
        "pe_target": args.pe_target,
        "seed": args.seed,
        "reps": args.reps,
        "downlink": args.downlink if not args.n2_shared_leader else "n2-shared-leader",
        "integer_bits": args.integer_bits,
    }
    _write_table(out, args.fmt, meta, ("n", "rate_interactive", "rate_oneway", "rate_oneway_plus", "rate_floor"), rows)


def cmd_session(args: argparse.Namespace, out: io.TextIOBase) -> None:
    config = _config(args.n, args.m, args.a)
    if args.x is not None:
        try:
            x = InputVector.from_reals(t.strip() for t in args.x.split(","))
        except ConfigError as exc:
            raise UsageError(str(exc)) from None
        if len(x) != config.n:
            raise UsageError(f"--x has {len(x)} values, expected n={config.n}")
    else:
        x = sample_input(config, args.seed, args.trial or 0)
    trace = run_session(config, x)
    mode = _downlink(args, config.n)
    summary = trace.summary()
    if trace.decided:
        summary["sum_rate_bits"] = sum_rate_per_round(config.n, mode) * trace.stop_time
    if args.fmt == "json":
        payload = {
            "config": str(config),
            "input": [str(v) for v in x.values],
            "summary": summary,
            "rounds": [
                {
                    "j": r.j,
                    "bits": list(r.bits),
                    "B": r.B,
                    "Z": str(r.Z),
                    "L": str(r.L),
                    "U": str(r.U),
                    "a_rec": str(r.a_rec),
                    "signal": r.signal.value,
                }
                for r in trace.rounds
            ],
        }
        _write_json(out, payload)
        return
    meta = {"command": "session", "config": str(config), "seed": args.seed}
    meta.update({k: v for k, v in summary.items()})
    _write_table(out, "csv", meta, TRACE_CSV_HEADER, list(trace.csv_rows(0)))


COMMANDS = {
    "exact": cmd_exact,
    "growth": cmd_growth,
    "approx": cmd_approx,
    "oneway": cmd_oneway,
    "bounds": cmd_bounds,
    "compare": cmd_compare,
    "session": cmd_session,
}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.reps < 0:
        parser.error("--reps must be non-negative")
    buffer = io.StringIO()
    try:
        COMMANDS[args.command](args, buffer)
    except (UsageError, ConfigError) as exc:
        print(f"netclass {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ProtocolInvariantError) as exc:
        print(f"netclass {args.command}: numerical invariant violated: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(buffer.getvalue())
    else:
        sys.stdout.write(buffer.getvalue())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
