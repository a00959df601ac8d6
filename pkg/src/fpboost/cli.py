"""Command-line front end.

Every subcommand writes one CSV trace (two for ``shapley-experiment``) and
a ``<trace>.manifest.txt`` next to it listing every input needed to
reproduce the run. Payoff arguments accept a file path or one of the
built-in game names ``rps``, ``shapley3``, ``shapley6``, ``pennies``.

Exit codes: 0 success, 2 usage, 3 unreadable or malformed input,
4 numerical failure, 5 solver stall.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .clairvoyant import run_clairvoyant
from .eignash import eignash_iterate
from .errors import InfiniteDivergenceError, NumericalRangeError, StagnationError, StallError
from .games import BUILTIN_GAMES, LOG_DOMAIN, NAIVE, builtin_matrix, normalize_payoffs, uniform
from .linops import as_dense, google_matrix, read_edge_list, read_matrix, sniff_format
from .power import PowerConfig, exp_power_iterate, fit_geometric_rate
from .replicator import integrate_orbit
from .zerosum import compare_hedge_modes, solve_hedge_average, solve_stable_average

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_NUMERICAL = 4
EXIT_STALL = 5

SHAPLEY_X0 = "0.1,0.2,0.3,0.2,0.1,0.1"
ANTISYMMETRY_TOL = 1e-9


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


# -- reproducible randomness -------------------------------------------------

MASK64 = (1 << 64) - 1


def splitmix64(seed: int):
    """Yield the splitmix64 sequence for ``seed``.

    state += 0x9E3779B97F4A7C15; z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
    output z ^ (z >> 31), all modulo 2**64.
    """
    state = seed & MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        yield z ^ (z >> 31)


def random_vector(n: int, seed: int) -> np.ndarray:
    """``n`` doubles in (0, 1]: ``((z >> 11) + 1) / 2**53`` for successive outputs ``z``."""
    gen = splitmix64(seed)
    return np.array([((next(gen) >> 11) + 1) * 2.0**-53 for _ in range(n)])


# -- manifest ----------------------------------------------------------------


@dataclass
class RunManifest:
    """Everything needed to rerun a command, as ``key=value`` lines."""

    subcommand: str
    inputs: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None
    output: str = ""
    version: str = __version__

    def to_text(self) -> str:
        lines = [f"subcommand={self.subcommand}", f"version={self.version}", f"output={self.output}"]
        lines.append(f"seed={'' if self.seed is None else self.seed}")
        for i, path in enumerate(self.inputs):
            lines.append(f"input.{i}={path}")
        for key in sorted(self.params):
            lines.append(f"param.{key}={self.params[key]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunManifest":
        m = cls("")
        inputs = {}
        for line in text.splitlines():
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed manifest line {line!r}")
            if key == "subcommand":
                m.subcommand = value
            elif key == "version":
                m.version = value
            elif key == "output":
                m.output = value
            elif key == "seed":
                m.seed = int(value) if value else None
            elif key.startswith("input."):
                inputs[int(key[6:])] = value
            elif key.startswith("param."):
                m.params[key[6:]] = value
            else:
                raise ValueError(f"unknown manifest key {key!r}")
        m.inputs = [inputs[i] for i in sorted(inputs)]
        return m

    def write(self, trace_path: str) -> str:
        path = manifest_path(trace_path)
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_text())
        return path


def manifest_path(trace_path: str) -> str:
    return os.path.splitext(trace_path)[0] + ".manifest.txt"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def _write_csv(path: str, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])


def _params(args, names) -> dict:
    return {name: _fmt(getattr(args, name)) if not isinstance(getattr(args, name), str) else getattr(args, name) for name in names}


# -- inputs ------------------------------------------------------------------


def load_payoffs(spec: str) -> np.ndarray:
    if spec in BUILTIN_GAMES:
        return builtin_matrix(spec)
    try:
        return np.array(as_dense(read_matrix(spec)), dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def parse_vector(spec: str, n: int, seed: Optional[int] = None, strategy: bool = True) -> np.ndarray:
    """``uniform``, ``random`` (with ``seed``), a comma list, or a file holding one."""
    if spec == "uniform":
        v = uniform(n) if strategy else np.ones(n)
    elif spec == "random":
        v = random_vector(n, 0 if seed is None else seed)
    else:
        text = spec
        if "," not in spec and os.path.exists(spec):
            try:
                with open(spec) as fh:
                    text = fh.read()
            except OSError as exc:
                raise InputError(str(exc)) from exc
        try:
            v = np.array([float(t) for t in text.replace("\n", ",").split(",") if t.strip()])
        except ValueError as exc:
            raise InputError(f"cannot parse vector {spec!r}: {exc}") from exc
    if v.shape != (n,):
        raise UsageError(f"vector has {v.size} entries, expected {n}")
    if strategy:
        if np.any(v < 0) or not np.all(np.isfinite(v)) or v.sum() <= 0:
            raise UsageError("a strategy needs finite nonnegative entries")
        if spec != "random" and abs(v.sum() - 1.0) > 1e-9:
            raise UsageError(f"strategy entries sum to {v.sum()!r}, not 1")
        v = v / v.sum()
    return v


def default_start(n: int) -> str:
    """Half the mass on the first strategy, the rest spread evenly."""
    if n == 1:
        return "1"
    rest = 0.5 / (n - 1)
    return ",".join(_fmt(x) for x in [0.5] + [rest] * (n - 1))


# -- subcommands -------------------------------------------------------------


def cmd_eig(args) -> int:
    if args.google:
        try:
            if sniff_format(args.matrix) == "edges":
                edges, n = read_edge_list(args.matrix)
            else:
                M = as_dense(read_matrix(args.matrix))
                n = M.shape[0]
                edges = [(int(j), int(i)) for i, j in zip(*np.nonzero(M))]
        except (OSError, ValueError) as exc:
            raise InputError(str(exc)) from exc
        A = google_matrix(edges, n, args.damping)
    else:
        if args.matrix in BUILTIN_GAMES:
            A = builtin_matrix(args.matrix)
        else:
            try:
                A = read_matrix(args.matrix)
            except (OSError, ValueError) as exc:
                raise InputError(str(exc)) from exc
    n = as_dense(A).shape[0] if isinstance(A, np.ndarray) else A.n
    x0 = parse_vector(args.x0, n, args.seed, strategy=False)
    m = "exact" if args.exact else args.m
    cfg = PowerConfig(alpha=args.alpha, m=m, max_iters=args.max_iters, tol=args.tol)
    if args.ref_eigvec:
        ref = parse_vector(args.ref_eigvec, n, strategy=False)
        floor = 1e-13
    else:
        # a-posteriori reference: the converged iterate of an identical first pass;
        # angles near the stopping tolerance measure that iterate's own error
        ref, _, _ = exp_power_iterate(A, x0, cfg)
        floor = max(1e-13, 1e4 * args.tol)
    x, est, trace = exp_power_iterate(A, x0, cfg, ref=ref)
    try:
        rate, _ = fit_geometric_rate(trace.sin_angle, floor=floor)
    except ValueError:
        rate = math.nan
    if args.google:
        x = x / x.sum()
    _write_csv(
        args.out,
        ["iter", "rayleigh", "step_change", "sin_angle"],
        ((k + 1, trace.rayleigh[k], trace.step_change[k], trace.sin_angle[k]) for k in range(trace.iterations)),
    )
    RunManifest(
        "eig",
        [args.matrix] + ([args.ref_eigvec] if args.ref_eigvec else []),
        _params(args, ["alpha", "m", "exact", "x0", "tol", "max_iters", "google", "damping"]),
        args.seed,
        args.out,
    ).write(args.out)
    print(
        f"lambda={_fmt(est.lambda1)} iterations={trace.iterations} converged={trace.converged} "
        f"rate={_fmt(rate)}"
    )
    print("eigvec=" + ",".join(_fmt(v) for v in x))
    return EXIT_OK


def _antisymmetric(raw) -> bool:
    return bool(np.max(np.abs(raw + raw.T)) < ANTISYMMETRY_TOL)


def cmd_zerosum(args) -> int:
    if not (0 < args.epsilon <= 1):
        raise UsageError("epsilon must lie in (0, 1]")
    raw = load_payoffs(args.payoff)
    if not args.force and not _antisymmetric(raw):
        raise UsageError("payoff matrix is not antisymmetric; pass --force to run anyway")
    game = normalize_payoffs(raw)
    target = parse_vector(args.target, game.n) if args.target else None
    if args.mode == "pure-multiplier":
        run = solve_stable_average(game, args.epsilon, target=target, force=True)
    else:
        mode = NAIVE if args.mode == "naive" else LOG_DOMAIN
        run = solve_hedge_average(game, args.epsilon, mode=mode, target=target, force=True)
    header = ["iter", "approx_error_normalized", "approx_error_raw", "re_to_target"]
    rows = list(run.trace_rows())
    if run.multipliers:
        header.append("multiplier")
        rows = [row + (j,) for row, j in zip(rows, run.multipliers)]
    _write_csv(args.out, header, rows)
    RunManifest("zerosum", [args.payoff] + ([args.target] if args.target else []),
                _params(args, ["epsilon", "mode", "force"]), None, args.out).write(args.out)
    ok = run.final_error <= args.epsilon
    print(
        f"error={_fmt(run.final_error)} {'<=' if ok else '>'} {_fmt(args.epsilon)} after {run.iterations} iterations "
        f"(alpha={_fmt(run.alpha)}, raw error={_fmt(game.raw_error(run.final_error))})"
    )
    print("strategy=" + ",".join(_fmt(v) for v in run.output))
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_replicator(args) -> int:
    if not args.dt > 0:
        raise UsageError("dt must be positive")
    if args.t_end < 0:
        raise UsageError("t-end must be nonnegative")
    C = load_payoffs(args.payoff)
    n = C.shape[0]
    x0 = parse_vector(args.x0 or default_start(n), n, args.seed)
    target = parse_vector(args.target, n) if args.target else None
    try:
        orbit = integrate_orbit(C, x0, args.t_end, args.dt, target=target, record_every=args.record_every)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    header = ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"avg_{i + 1}" for i in range(n)] + ["re_to_target"]
    _write_csv(args.out, header, ((t, *x, *a, re) for t, x, a, re in orbit.trace_rows()))
    RunManifest("replicator", [args.payoff] + ([args.target] if args.target else []),
                _params(args, ["x0", "t_end", "dt", "record_every"]), args.seed, args.out).write(args.out)
    s = orbit.summary
    print(
        f"t={_fmt(s.t_end)} clamps={s.clamps} drift={_fmt(s.conserved_re_drift)} "
        f"average={','.join(_fmt(v) for v in s.average)}"
    )
    if not orbit.complete:
        print(f"aborted at t={_fmt(orbit.aborted_at)}: non-finite step", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_clairvoyant(args) -> int:
    if not args.alpha_bar > 0:
        raise UsageError("alpha-bar must be positive")
    if args.iters < 0:
        raise UsageError("iters must be nonnegative")
    raw = load_payoffs(args.payoff)
    n = raw.shape[0]
    x0 = parse_vector(args.x0, n, args.seed)
    if np.any(x0 <= 0):
        raise UsageError("x0 must be interior")
    header = ["K", "alpha_K", "A_K", "halvings", "approx_error", "bound"]
    manifest = RunManifest("clairvoyant", [args.payoff], _params(args, ["alpha_bar", "iters", "x0", "strict_lower"]),
                           args.seed, args.out)
    try:
        run = run_clairvoyant(raw, x0, args.alpha_bar, args.iters, strict_lower=args.strict_lower)
    except StallError as exc:
        _write_csv(args.out, header, exc.rows)
        manifest.write(args.out)
        raise
    _write_csv(args.out, header, run.rows)
    manifest.write(args.out)
    if run.rows:
        K, alpha, A, _, err, bound = run.rows[-1]
        print(f"K={K + 1} A={_fmt(A)} error={_fmt(err)} bound={_fmt(bound)} "
              f"halvings={sum(run.state.halvings)}")
    print("strategy=" + ",".join(_fmt(v) for v in run.state.X))
    return EXIT_OK


def cmd_shapley_experiment(args) -> int:
    if args.iters < 0:
        raise UsageError("iters must be nonnegative")
    if not args.alpha > 0:
        raise UsageError("alpha must be positive")
    C = builtin_matrix("shapley6")
    x0 = parse_vector(args.x0, 6)
    cmp = compare_hedge_modes(C, x0, args.alpha, args.iters)
    header = ["iter", "re_uniform_to_average", "gap", "underflow", "overflow"]
    paths = []
    for mode, series in (("naive", cmp.naive_re), ("stable", cmp.stable_re)):
        path = f"{args.out}_{mode}.csv"
        rows = []
        for k, re in enumerate(series):
            under = int(mode == "naive" and cmp.naive_underflow_at is not None and k >= cmp.naive_underflow_at)
            over = int(mode == "naive" and cmp.naive_overflow_at is not None and k >= cmp.naive_overflow_at)
            rows.append((k, re, cmp.gap[k], under, over))
        _write_csv(path, header, rows)
        RunManifest("shapley-experiment", ["shapley6"], _params(args, ["alpha", "iters", "x0"]) | {"mode": mode},
                    None, path).write(path)
        paths.append(path)
    first = cmp.first_gap_above(0.1)
    print(
        f"max_gap={_fmt(cmp.max_gap)} first_gap_above_0.1={'' if first is None else first} "
        f"max_re_separation={_fmt(cmp.max_re_separation)} "
        f"naive_underflow_at={'' if cmp.naive_underflow_at is None else cmp.naive_underflow_at}"
    )
    print(f"final_re naive={_fmt(cmp.naive_re[-1])} stable={_fmt(cmp.stable_re[-1])}")
    return EXIT_OK


def cmd_eignash(args) -> int:
    if args.iters < 0:
        raise UsageError("iters must be nonnegative")
    C = load_payoffs(args.payoff)
    if args.normalize:
        C = normalize_payoffs(C).normalized
    if np.any(C < 0):
        raise UsageError("eignash needs a nonnegative payoff matrix; pass --normalize to rescale it")
    n = C.shape[0]
    x0 = parse_vector(args.x0 or default_start(n), n, args.seed)
    trace = eignash_iterate(C, x0, args.iters)
    _write_csv(args.out, ["k", "lambda", "residual", "approx_error"],
               ((r.k, r.lam, r.residual, r.approx_error) for r in trace))
    RunManifest("eignash", [args.payoff], _params(args, ["x0", "iters", "normalize"]), args.seed, args.out).write(args.out)
    if trace:
        last = trace[-1]
        flagged = sum(not r.inner_converged for r in trace)
        print(f"k={last.k} lambda={_fmt(last.lam)} residual={_fmt(last.residual)} "
              f"error={_fmt(last.approx_error)} inner_unconverged={flagged}")
        print("strategy=" + ",".join(_fmt(v) for v in last.X))
    return EXIT_OK


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fpboost", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eig", help="dominant eigenvector by (exponentiated) power iteration")
    p.add_argument("matrix", help="dense CSV, Matrix Market, or edge-list file")
    p.add_argument("--alpha", type=float, default=1.0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--m", type=int, default=0, help="truncation order; 0 is plain power iteration")
    g.add_argument("--exact", action="store_true", help="sum the exponential series to convergence")
    p.add_argument("--x0", default="uniform", help="uniform, random, a comma list, or a file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--ref-eigvec", default=None, help="reference eigenvector for the sin-angle column")
    p.add_argument("--google", action="store_true", help="treat the input as a link graph and build its Google matrix")
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--out", default="eig_trace.csv")
    p.set_defaults(func=cmd_eig)

    p = sub.add_parser("zerosum", help="averaged Hedge on a symmetric zero-sum game")
    p.add_argument("payoff")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--mode", choices=["naive", "stable-log", "pure-multiplier"], default="stable-log")
    p.add_argument("--force", action="store_true", help="skip the antisymmetry check")
    p.add_argument("--target", default=None, help="strategy for the re_to_target column")
    p.add_argument("--out", default="zerosum_trace.csv")
    p.set_defaults(func=cmd_zerosum)

    p = sub.add_parser("replicator", help="integrate the replicator dynamic and its time average")
    p.add_argument("payoff")
    p.add_argument("--x0", default=None, help="default: half the mass on strategy 1, the rest uniform")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--t-end", type=float, default=100.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--target", default=None)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--out", default="replicator_trace.csv")
    p.set_defaults(func=cmd_replicator)

    p = sub.add_parser("clairvoyant", help="clairvoyant averaging toward a symmetric equilibrium")
    p.add_argument("payoff")
    p.add_argument("--alpha-bar", type=float, default=0.01)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--x0", default="uniform")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--strict-lower", action="store_true", help="also enforce the vertex lower constraints")
    p.add_argument("--out", default="clairvoyant_trace.csv")
    p.set_defaults(func=cmd_clairvoyant)

    p = sub.add_parser("shapley-experiment", help="naive versus log-domain Hedge on the 6x6 Shapley game")
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--iters", type=int, default=10_000)
    p.add_argument("--x0", default=SHAPLEY_X0)
    p.add_argument("--out", default="shapley", help="prefix for <prefix>_naive.csv and <prefix>_stable.csv")
    p.set_defaults(func=cmd_shapley_experiment)

    p = sub.add_parser("eignash", help="dominant-eigenvector iteration toward an equilibrium")
    p.add_argument("payoff")
    p.add_argument("--x0", default=None, help="default: half the mass on strategy 1, the rest uniform")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--normalize", action="store_true", help="rescale payoffs into [0, 1] first")
    p.add_argument("--out", default="eignash_trace.csv")
    p.set_defaults(func=cmd_eignash)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fpboost {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"fpboost {args.command}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (StallError, StagnationError) as exc:
        print(f"fpboost {args.command}: stalled: {exc}", file=sys.stderr)
        return EXIT_STALL
    except (NumericalRangeError, InfiniteDivergenceError, np.linalg.LinAlgError) as exc:
        print(f"fpboost {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"fpboost {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
