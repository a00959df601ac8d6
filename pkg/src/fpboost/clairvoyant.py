"""Clairvoyant averaging for symmetric bimatrix games.

Each iteration picks a multiplier ``Z`` that already equals the Euler
step of the multiplier Hedge map taken from the current average with the
accumulated rate ``A``:

    Z(i) = X(i) + A X(i) ((CZ)_i - X.CZ)

The constraint is linear in ``Z``, so a nonsingular system has exactly
one solution and no optimizer is needed. The average of the multipliers
weighted by their rates becomes the next ``X``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import StallError
from .games import approx_error, as_game, as_strategy, is_interior

ALPHA_FLOOR = 1e-12
INTERIOR_EPS = 1e-12
MAX_COND = 1e12
# tolerance on the component sum of a solved multiplier
SUM_TOL = 1e-8


def feasibility_solve(C, X, A: float) -> Optional[np.ndarray]:
    """Interior solution of ``Z = X + A Delta(X) (CZ - 1 X.CZ)``, or ``None``.

    Writing ``X.CZ = (C^T X).Z`` gives ``(I - A Delta(X)(C - 1 (C^T X)^T)) Z = X``.
    The solution sums to one whenever the system is nonsingular because every
    column of ``Delta(X)(C - 1 (C^T X)^T)`` sums to zero. ``None`` marks an
    ill-conditioned system, a solution that lost that sum to rounding, or a
    solution with a component at or below ``1e-12``.
    """
    C = np.asarray(C, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] != X.shape[0]:
        raise ValueError("dimension mismatch between payoff matrix and strategy")
    if not A > 0:
        raise ValueError("A must be positive")
    X = X / X.sum()
    B = X[:, None] * (C - (X @ C)[None, :])
    M = np.eye(X.size) - A * B
    if not np.all(np.isfinite(M)) or np.linalg.cond(M) > MAX_COND:
        return None
    Z = np.linalg.solve(M, X)
    s = Z.sum()
    if not np.isfinite(s) or abs(s - 1.0) > SUM_TOL:
        return None
    Z = Z / s
    return Z if Z.min() > INTERIOR_EPS else None


def constraint_residual(C, X, Z, A: float) -> float:
    """Largest violation of the multiplier constraint at ``Z``."""
    C = np.asarray(C, dtype=np.float64)
    v = C @ Z
    return float(np.max(np.abs(Z - X - A * X * (v - X @ v))))


def lower_constraints_hold(C, X, A: float) -> bool:
    """``X(i)(1 + A((CE_j)_i - X.CE_j)) > 0`` for every ``i`` and vertex ``E_j``."""
    C = np.asarray(C, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    factor = 1.0 + A * (C - (X @ C)[None, :])
    return bool(np.all(X[:, None] * factor > 0))


@dataclass
class ClairvoyantState:
    """Running state. ``X`` is the rate-weighted average of all accepted multipliers."""

    X: np.ndarray
    X0: np.ndarray
    alpha_bar: float
    K: int = 0
    A: float = 0.0
    last_alpha: float = 0.0
    last_halvings: int = 0
    halvings: list = field(default_factory=list)
    history: Optional[list] = None

    @classmethod
    def start(cls, X0, alpha_bar: float, keep_history: bool = False) -> "ClairvoyantState":
        X0 = as_strategy(X0)
        if not is_interior(X0):
            raise ValueError("X0 must be interior")
        if not alpha_bar > 0:
            raise ValueError("alpha_bar must be positive")
        return cls(X0.copy(), X0.copy(), float(alpha_bar), history=[] if keep_history else None)

    def dump(self) -> str:
        return (
            f"K={self.K} A={self.A!r} alpha_bar={self.alpha_bar!r} "
            f"last_alpha={self.last_alpha!r} X={np.array2string(self.X, precision=17)}"
        )


def clairvoyant_iterate(C, state: ClairvoyantState, strict_lower: bool = False) -> ClairvoyantState:
    """Advance ``state`` by one accepted multiplier, halving the rate as needed.

    The rate starts at ``alpha_bar`` and halves until the linear system has an
    interior solution. With ``strict_lower`` the candidate average must also
    pass :func:`lower_constraints_hold`. The state is updated in place and
    returned; ``StallError`` carries it when the rate drops below ``1e-12``.
    """
    C = np.asarray(C, dtype=np.float64)
    alpha = state.alpha_bar
    halvings = 0
    while True:
        A_new = state.A + alpha
        Z = feasibility_solve(C, state.X, A_new)
        if Z is not None:
            X_new = (state.A * state.X + alpha * Z) / A_new
            X_new = X_new / X_new.sum()
            if X_new.min() > 0 and (not strict_lower or lower_constraints_hold(C, X_new, A_new)):
                break
        alpha /= 2
        halvings += 1
        if alpha < ALPHA_FLOOR:
            raise StallError(f"learning rate fell below {ALPHA_FLOOR} at K={state.K}: {state.dump()}", state)
    state.X = X_new
    state.A = A_new
    state.last_alpha = alpha
    state.last_halvings = halvings
    state.halvings.append(halvings)
    if state.history is not None:
        state.history.append((alpha, Z))
    state.K += 1
    return state


def error_bound(state: ClairvoyantState, n: Optional[int] = None, c2: float = 2.0) -> float:
    """``alpha_bar + c2 alpha_bar^2 + (ln(max X0 / min X0) + ln n) / A``."""
    if not state.A > 0:
        raise ValueError("the bound needs A > 0")
    n = state.X0.size if n is None else n
    ratio = math.log(state.X0.max() / state.X0.min())
    return state.alpha_bar + c2 * state.alpha_bar**2 + (ratio + math.log(n)) / state.A


@dataclass
class ClairvoyantRun:
    state: ClairvoyantState
    rows: list
    scale: float = 1.0


def run_clairvoyant(game, X0, alpha_bar: float, iters: int, strict_lower: bool = False, keep_history: bool = False) -> ClairvoyantRun:
    """Run ``iters`` iterations on the normalized payoffs of ``game``.

    Rows are ``(K, alpha_K, A_K, halvings, approx_error(X^{K+1}), bound)``.
    A stall propagates as ``StallError``; its ``state`` and ``rows`` hold the
    progress made before it.
    """
    game = as_game(game)
    C = game.normalized
    state = ClairvoyantState.start(X0, alpha_bar, keep_history)
    if state.X.size != game.n:
        raise ValueError("dimension mismatch between payoff matrix and strategy")
    rows = []
    for K in range(iters):
        try:
            clairvoyant_iterate(C, state, strict_lower)
        except StallError as exc:
            exc.rows = rows
            raise
        rows.append((K, state.last_alpha, state.A, state.last_halvings, approx_error(C, state.X), error_bound(state)))
    return ClairvoyantRun(state, rows, game.scale)
