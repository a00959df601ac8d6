"""Averaged Hedge for symmetric zero-sum games.

Both solvers start at the uniform strategy and run a fixed number of steps
chosen from the target accuracy. :func:`solve_hedge_average` averages the
Hedge iterates themselves. :func:`solve_stable_average` steers Hedge with
pure best-response multipliers and averages those multipliers, so every
exponential it needs is one column of a table computed up front.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InfiniteDivergenceError, NumericalRangeError
from .games import (
    LOG_DOMAIN,
    NAIVE,
    HedgeIterator,
    SymmetricGame,
    approx_error,
    as_game,
    as_strategy,
    column_exp_table,
    hedge_step_pure,
    is_interior,
    relative_entropy,
    relative_entropy_log,
    uniform,
)


def iteration_bound(n: int, epsilon: float) -> int:
    """Number of averaged Hedge steps that certify error ``epsilon``.

    ``floor(ln n / ((eps/2) ln(1 + eps/2)))``; the matching learning rate
    is ``ln(1 + eps/2)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return int(math.floor(math.log(n) / ((epsilon / 2) * math.log1p(epsilon / 2))))


def learning_rate(epsilon: float) -> float:
    return math.log1p(epsilon / 2)


@dataclass
class AveragedRun:
    """Result of an averaged solver.

    ``errors[k]`` is the normalized approximation error of the relevant
    average through index ``k``, so the trace has ``iterations + 1`` rows
    with row 0 describing the starting point.
    """

    iterate_avg: np.ndarray
    multiplier_avg: Optional[np.ndarray]
    errors: list
    alpha: float
    epsilon: float
    theta: float
    K_target: int
    scale: float = 1.0
    re_to_target: list = field(default_factory=list)
    multipliers: list = field(default_factory=list)
    table_builds: int = 0

    @property
    def iterations(self) -> int:
        return len(self.errors) - 1

    @property
    def final_error(self) -> float:
        return self.errors[-1]

    @property
    def output(self) -> np.ndarray:
        return self.iterate_avg if self.multiplier_avg is None else self.multiplier_avg

    def trace_rows(self):
        for k, e in enumerate(self.errors):
            re = self.re_to_target[k] if self.re_to_target else None
            yield k, e, e * self.scale, re


def _check_inputs(game: SymmetricGame, epsilon: float, force: bool):
    if not (0 < epsilon <= 1):
        raise ValueError("epsilon must lie in (0, 1]")
    if not (force or game.is_antisymmetric):
        raise ValueError("payoff matrix is not antisymmetric")


def _re_or_inf(target, X):
    try:
        return relative_entropy(target, X)
    except InfiniteDivergenceError:
        return math.inf


def solve_hedge_average(game, epsilon: float, mode: str = LOG_DOMAIN, target=None, force: bool = False) -> AveragedRun:
    """Average of iterated Hedge on the normalized payoffs.

    Runs exactly ``iteration_bound(n, epsilon)`` steps with learning rate
    ``ln(1 + epsilon/2)``. The average is an ``epsilon``-approximate
    symmetric equilibrium of the normalized game.
    """
    game = as_game(game)
    _check_inputs(game, epsilon, force)
    n = game.n
    K = iteration_bound(n, epsilon)
    alpha = learning_rate(epsilon)
    C = game.normalized
    it = HedgeIterator(C, uniform(n), alpha, mode)
    avg = it.x.copy()
    run = AveragedRun(avg, None, [approx_error(C, avg)], alpha, epsilon, epsilon / 2, K, game.scale)
    if target is not None:
        target = as_strategy(target)
        run.re_to_target.append(_re_or_inf(target, avg))
    for k in range(1, K + 1):
        try:
            X = it.step()
        except NumericalRangeError as exc:
            raise NumericalRangeError(f"step {k}: {exc}") from exc
        avg += (X - avg) / (k + 1)
        run.errors.append(approx_error(C, avg))
        if target is not None:
            run.re_to_target.append(_re_or_inf(target, avg))
    run.iterate_avg = avg
    return run


def best_response_multiplier(game, X) -> int:
    """Smallest index maximizing ``(C X)_j`` on the raw payoffs."""
    game = as_game(game)
    return int(np.argmax(game.raw @ np.asarray(X, dtype=np.float64)))


def solve_stable_average(game, epsilon: float, target=None, force: bool = False) -> AveragedRun:
    """Average of pure best-response multipliers steering Hedge.

    Step ``k`` picks ``j = best_response_multiplier(X^k)`` and moves
    ``X^{k+1} = T(X^k | E_j)``. The output is the average of the
    multipliers ``E_j``, which needs no exponentials beyond one table.
    """
    game = as_game(game)
    _check_inputs(game, epsilon, force)
    n = game.n
    K = iteration_bound(n, epsilon)
    alpha = learning_rate(epsilon)
    C = game.normalized
    table = column_exp_table(C, alpha)
    X = uniform(n)
    iterate_avg = X.copy()
    counts = np.zeros(n)
    run = AveragedRun(iterate_avg, None, [], alpha, epsilon, epsilon / 2, K, game.scale, table_builds=1)
    if target is not None:
        target = as_strategy(target)
    for k in range(K + 1):
        j = best_response_multiplier(game, X)
        run.multipliers.append(j)
        counts[j] += 1
        Zbar = counts / (k + 1)
        run.errors.append(approx_error(C, Zbar))
        if target is not None:
            run.re_to_target.append(_re_or_inf(target, Zbar))
        if k < K:
            X = hedge_step_pure(X, j, table)
            iterate_avg += (X - iterate_avg) / (k + 2)
    run.iterate_avg = iterate_avg
    run.multiplier_avg = counts / (K + 1)
    return run


def average_regret(C, alpha: float, iters: int, Ys, X0=None) -> np.ndarray:
    """Running average regret of Hedge against fixed comparators.

    Row ``K`` holds ``(1/(K+1)) sum_{k<=K} (Y - X^k).C X^k`` for each
    ``Y`` in ``Ys``.
    """
    C = np.asarray(C, dtype=np.float64)
    Ys = np.atleast_2d(np.asarray(Ys, dtype=np.float64))
    it = HedgeIterator(C, uniform(C.shape[0]) if X0 is None else X0, alpha, LOG_DOMAIN)
    out = np.empty((iters + 1, Ys.shape[0]))
    total = np.zeros(Ys.shape[0])
    X = it.x
    for k in range(iters + 1):
        v = C @ X
        total += Ys @ v - X @ v
        out[k] = total / (k + 1)
        if k < iters:
            X = it.step()
    return out


@dataclass
class DivergenceTrace:
    re: list
    overflowed_at: Optional[int] = None

    @property
    def strictly_increasing(self) -> bool:
        return all(b > a for a, b in zip(self.re, self.re[1:]))


def divergence_monitor(game, X0, alpha: float, iters: int, x_star=None, mode: str = LOG_DOMAIN) -> DivergenceTrace:
    """Relative entropy from the equilibrium to each un-averaged Hedge iterate.

    Hedge runs on the raw antisymmetric payoffs. ``x_star`` is the interior
    equilibrium (uniform when omitted). Row 0 is the starting distance. In
    naive mode an overflow or a lost coordinate ends the trace early and is
    flagged in ``overflowed_at``.
    """
    game = as_game(game)
    if not game.is_antisymmetric:
        raise ValueError("payoff matrix is not antisymmetric")
    X0 = as_strategy(X0)
    x_star = uniform(game.n) if x_star is None else as_strategy(x_star)
    if not is_interior(X0) or not is_interior(x_star):
        raise ValueError("X0 and the equilibrium must be interior")
    if np.allclose(X0, x_star, rtol=0, atol=1e-15):
        raise ValueError("X0 coincides with the equilibrium, a fixed point of Hedge")
    it = HedgeIterator(game.raw, X0, alpha, mode)
    trace = DivergenceTrace([relative_entropy(x_star, X0)])
    for k in range(1, iters + 1):
        try:
            it.step()
        except NumericalRangeError:
            trace.overflowed_at = k
            break
        if mode == NAIVE and it.underflowed is not None:
            trace.overflowed_at = k
            break
        trace.re.append(relative_entropy_log(x_star, it.log_x))
    return trace


@dataclass
class ModeComparison:
    """Naive and log-domain Hedge run side by side from the same start.

    ``naive_re[k]`` and ``stable_re[k]`` are the relative entropies from
    the uniform strategy to each mode's running average of iterates
    ``0..k``; ``gap[k]`` is the sup-norm distance between the two iterates.
    """

    naive_re: list
    stable_re: list
    gap: list
    naive_underflow_at: Optional[int] = None
    naive_overflow_at: Optional[int] = None

    @property
    def max_gap(self) -> float:
        return max(self.gap)

    def first_gap_above(self, threshold: float) -> Optional[int]:
        for k, g in enumerate(self.gap):
            if g > threshold:
                return k
        return None

    @property
    def max_re_separation(self) -> float:
        return max(abs(a - b) for a, b in zip(self.naive_re, self.stable_re))


def compare_hedge_modes(C, X0, alpha: float, iters: int) -> ModeComparison:
    """Iterate Hedge in both evaluation modes and trace how far they drift apart.

    A naive-mode overflow freezes the naive trajectory at its last finite
    iterate and is flagged; it does not stop the comparison.
    """
    C = np.asarray(C, dtype=np.float64)
    X0 = as_strategy(X0)
    n = X0.size
    target = uniform(n)
    naive = HedgeIterator(C, X0, alpha, NAIVE)
    stable = HedgeIterator(C, X0, alpha, LOG_DOMAIN)
    avg_n = X0.copy()
    avg_s = X0.copy()
    out = ModeComparison([relative_entropy(target, avg_n)], [relative_entropy(target, avg_s)], [0.0])
    for k in range(1, iters + 1):
        if out.naive_overflow_at is None:
            try:
                naive.step()
            except NumericalRangeError:
                out.naive_overflow_at = k
        Xs = stable.step()
        Xn = naive.x
        avg_n += (Xn - avg_n) / (k + 1)
        avg_s += (Xs - avg_s) / (k + 1)
        out.naive_re.append(relative_entropy(target, avg_n))
        out.stable_re.append(relative_entropy(target, avg_s))
        out.gap.append(float(np.max(np.abs(Xn - Xs))))
    out.naive_underflow_at = naive.underflowed
    return out
