"""Strategies, payoff normalization and the Hedge family of maps.

Strategies are plain 1-D float arrays on the probability simplex. Payoff
matrices are dense; games here are small.

Two evaluations of the Hedge map are provided. ``"naive"`` computes
``X * exp(alpha * v)`` and normalizes, exactly as the algebra reads, so it
can underflow and lose support. ``"log-domain"`` subtracts the largest
exponent before exponentiating and normalizes with an exactly rounded
sum; :class:`HedgeIterator` additionally carries log-weights across steps
so that coordinates too small for a float are never lost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InfiniteDivergenceError, NumericalRangeError
from .linops import as_dense

# probabilities below this are treated as outside the carrier
CARRIER_EPS = 1e-300
NAIVE = "naive"
LOG_DOMAIN = "log-domain"
MODES = (NAIVE, LOG_DOMAIN)

ROCK_PAPER_SCISSORS = ((0, -1, 1), (1, 0, -1), (-1, 1, 0))
SHAPLEY3 = ((0, 1, 2), (2, 0, 1), (1, 2, 0))
SHAPLEY6 = (
    (0, 0, 0, 0, 1, 2),
    (0, 0, 0, 2, 0, 1),
    (0, 0, 0, 1, 2, 0),
    (0, 1, 2, 0, 0, 0),
    (2, 0, 1, 0, 0, 0),
    (1, 2, 0, 0, 0, 0),
)
PENNIES = ((0, 1), (-1, 0))

BUILTIN_GAMES = {
    "rps": ROCK_PAPER_SCISSORS,
    "shapley3": SHAPLEY3,
    "shapley6": SHAPLEY6,
    "pennies": PENNIES,
}


def builtin_matrix(name: str) -> np.ndarray:
    try:
        return np.array(BUILTIN_GAMES[name], dtype=np.float64)
    except KeyError:
        raise KeyError(f"unknown built-in game {name!r}; choose from {sorted(BUILTIN_GAMES)}") from None


# -- strategies --------------------------------------------------------------


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def vertex(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def carrier(p) -> np.ndarray:
    return np.flatnonzero(np.asarray(p) > CARRIER_EPS)


def as_strategy(p, atol: float = 1e-9) -> np.ndarray:
    """Validate a probability vector and renormalize away rounding in its sum."""
    p = np.array(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("a strategy is a nonempty 1-D vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("strategy entries must be finite and nonnegative")
    total = p.sum()
    if abs(total - 1.0) > atol:
        raise ValueError(f"strategy entries must sum to 1, got {total!r}")
    return p / total


def is_interior(p) -> bool:
    return bool(np.all(np.asarray(p) > 0))


def relative_entropy(P, Q) -> float:
    """Kullback-Leibler divergence summed over the carrier of ``P``.

    Raises ``InfiniteDivergenceError`` when ``P`` puts mass where ``Q``
    has none.
    """
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.shape != Q.shape:
        raise ValueError("strategies have different dimensions")
    car = P > CARRIER_EPS
    if np.any(Q[car] <= CARRIER_EPS):
        raise InfiniteDivergenceError("carrier of P is not contained in carrier of Q")
    p = P[car]
    return max(0.0, math.fsum(p * (np.log(p) - np.log(Q[car]))))


def relative_entropy_log(P, log_q) -> float:
    """Relative entropy against a strategy given by its log-probabilities."""
    P = np.asarray(P, dtype=np.float64)
    log_q = np.asarray(log_q, dtype=np.float64)
    car = P > CARRIER_EPS
    if np.any(~np.isfinite(log_q[car])):
        raise InfiniteDivergenceError("carrier of P is not contained in carrier of Q")
    p = P[car]
    return max(0.0, math.fsum(p * (np.log(p) - log_q[car])))


# -- games -------------------------------------------------------------------


@dataclass(frozen=True)
class SymmetricGame:
    """Payoffs of a symmetric bimatrix game and their map into [0, 1].

    ``normalized = (raw - offset) / scale``. Approximation errors measured
    on ``normalized`` convert back to raw units by multiplying by ``scale``.
    """

    raw: np.ndarray
    normalized: np.ndarray
    scale: float
    offset: float
    is_antisymmetric: bool

    @property
    def n(self) -> int:
        return self.raw.shape[0]

    def raw_error(self, normalized_error: float) -> float:
        return normalized_error * self.scale


def normalize_payoffs(raw) -> SymmetricGame:
    raw = np.array(as_dense(raw), dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise ValueError("payoff matrix has NaN or Inf entries")
    lo, hi = float(raw.min()), float(raw.max())
    scale = hi - lo if hi > lo else 1.0
    normalized = (raw - lo) / scale
    antisym = bool(np.max(np.abs(raw + raw.T)) < 1e-12)
    raw.flags.writeable = False
    normalized.flags.writeable = False
    return SymmetricGame(raw, normalized, scale, lo, antisym)


def as_game(obj) -> SymmetricGame:
    if isinstance(obj, SymmetricGame):
        return obj
    if isinstance(obj, str):
        return normalize_payoffs(builtin_matrix(obj))
    return normalize_payoffs(obj)


def approx_error(C, X) -> float:
    """``max_i (CX)_i - X.CX``; zero exactly at symmetric Nash equilibria."""
    C = as_dense(C)
    X = np.asarray(X, dtype=np.float64)
    if C.shape[0] != X.shape[0]:
        raise ValueError("dimension mismatch between payoff matrix and strategy")
    v = C @ X
    return max(0.0, float(v.max() - X @ v))


# -- Hedge -------------------------------------------------------------------


@dataclass(frozen=True)
class HedgeParams:
    alpha: float
    mode: str = LOG_DOMAIN

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("learning rate alpha must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


def _reweight(X, exponent, alpha, mode):
    if mode == NAIVE:
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            w = X * np.exp(alpha * exponent)
            total = w.sum()
        if not (np.all(np.isfinite(w)) and np.isfinite(total)) or total <= 0:
            raise NumericalRangeError(
                "naive exponentiation left the floating-point range; use mode='log-domain'"
            )
        return w / total
    car = X > CARRIER_EPS
    shift = exponent[car].max()
    with np.errstate(under="ignore"):
        w = np.where(car, X * np.exp(alpha * (exponent - shift)), 0.0)
    return w / math.fsum(w)


def hedge_step_multiplier(C, X, Z, params: HedgeParams) -> np.ndarray:
    """Hedge reweighting of ``X`` driven by the payoffs ``CZ``."""
    C = as_dense(C)
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if not (C.shape[0] == X.shape[0] == Z.shape[0]):
        raise ValueError("dimension mismatch between payoff matrix and strategies")
    return _reweight(X, C @ Z, params.alpha, params.mode)


def hedge_step(C, X, params: HedgeParams) -> np.ndarray:
    """One step of the Hedge map ``T_i(X) ~ X(i) exp(alpha (CX)_i)``."""
    return hedge_step_multiplier(C, X, X, params)


def column_exp_table(C, alpha: float) -> np.ndarray:
    """Exponentials of every payoff column, shifted by the column maximum.

    ``table[:, j]`` is ``exp(alpha (C[:, j] - max C[:, j]))``: the weights
    Hedge needs when the multiplier is the pure strategy ``j``.
    """
    C = as_dense(C)
    return np.exp(alpha * (C - C.max(axis=0, keepdims=True)))


def hedge_step_pure(X, j: int, table: np.ndarray) -> np.ndarray:
    """Hedge step against pure multiplier ``j`` using a precomputed table."""
    w = np.asarray(X, dtype=np.float64) * table[:, j]
    return w / math.fsum(w)


def euler_step(C, X, Z, alpha: float) -> np.ndarray:
    """First-order Taylor version of the multiplier Hedge map.

    Components sum to one but may be negative for large ``alpha``; the
    caller decides what to do about that.
    """
    C = as_dense(C)
    X = np.asarray(X, dtype=np.float64)
    v = C @ np.asarray(Z, dtype=np.float64)
    return X * (1.0 + alpha * (v - X @ v))


def logsumexp(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    m = a.max()
    if not np.isfinite(m):
        return float(m)
    return float(m + math.log(math.fsum(np.exp(a - m))))


class HedgeIterator:
    """Iterates the Hedge map from ``X0``.

    In log-domain mode the state is the vector of log-probabilities, so
    coordinates that would underflow as probabilities keep their value.
    In naive mode the state is the probability vector itself and
    coordinates that underflow to zero stay at zero; ``underflowed``
    records when that happened first.
    """

    def __init__(self, C, X0, alpha: float, mode: str = LOG_DOMAIN):
        self.C = as_dense(C)
        self.params = HedgeParams(alpha, mode)
        X0 = as_strategy(X0)
        if X0.shape[0] != self.C.shape[0]:
            raise ValueError("dimension mismatch between payoff matrix and strategy")
        self.k = 0
        self.underflowed: Optional[int] = None
        if mode == LOG_DOMAIN:
            with np.errstate(divide="ignore"):
                self._log = np.log(X0)
            self._x = X0
        else:
            self._x = X0.copy()
        self._support = int(np.count_nonzero(X0 > 0))

    @property
    def x(self) -> np.ndarray:
        return self._x

    @property
    def log_x(self) -> np.ndarray:
        if self.params.mode == LOG_DOMAIN:
            return self._log
        with np.errstate(divide="ignore"):
            return np.log(self._x)

    def payoffs(self) -> np.ndarray:
        return self.C @ self._x

    def step(self) -> np.ndarray:
        v = self.C @ self._x
        if self.params.mode == LOG_DOMAIN:
            log = self._log + self.params.alpha * v
            log = log - logsumexp(log)
            self._log = log
            with np.errstate(under="ignore"):
                x = np.exp(log)
            self._x = x / math.fsum(x)
        else:
            self._x = _reweight(self._x, v, self.params.alpha, NAIVE)
            if self.underflowed is None and np.count_nonzero(self._x > 0) < self._support:
                self.underflowed = self.k + 1
        self.k += 1
        return self._x
