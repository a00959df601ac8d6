"""Nash equilibria as fixed points of ``Delta(X) C X = lambda X``.

Interior symmetric equilibria equalize ``(CX)_i`` over the support, so
``X`` is an eigenvector of ``Delta(X) C`` there. The iteration below
replaces ``X`` by the dominant eigenvector of ``Delta(X) C``, scaled to
sum to one. It is a heuristic; it converges on some games and not others.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import approx_error, as_strategy, is_interior
from .linops import as_dense
from .power import PowerConfig, power_iterate

INNER_TOL = 1e-12
INNER_MAX_ITERS = 10_000


def _check_nonnegative(C) -> np.ndarray:
    C = np.asarray(as_dense(C), dtype=np.float64)
    if np.any(C < 0):
        raise ValueError("payoff matrix must be elementwise nonnegative")
    return C


def eignash_residual(C, X, lam: float) -> float:
    """``||Delta(X) C X - lam X||_inf``."""
    C = _check_nonnegative(C)
    X = np.asarray(X, dtype=np.float64)
    if C.shape[0] != X.shape[0]:
        raise ValueError("dimension mismatch between payoff matrix and strategy")
    return float(np.max(np.abs(X * (C @ X) - lam * X)))


def project_simplex(v) -> np.ndarray:
    """Scale a nonnegative eigenvector to unit sum, fixing its sign first."""
    v = np.asarray(v, dtype=np.float64)
    if v.sum() < 0:
        v = -v
    # rounding can leave tiny negative entries in a Perron vector
    v = np.maximum(v, 0.0)
    return v / v.sum()


@dataclass
class EigNashRecord:
    k: int
    X: np.ndarray
    lam: float
    residual: float
    approx_error: float
    inner_iterations: int
    inner_converged: bool


def eignash_iterate(C, X0, iters: int, inner_tol: float = INNER_TOL, inner_max_iters: int = INNER_MAX_ITERS) -> list:
    """Iterate ``X <- dominant eigenvector of Delta(X) C`` on the simplex.

    Record ``k`` holds ``X^k``, the eigenvalue ``lam`` of ``Delta(X^{k-1}) C``
    that produced it, the residual ``eignash_residual(C, X^k, lam)`` and
    ``approx_error(C, X^k)``. An inner solve that hits its iteration cap is
    flagged and its last iterate is used.
    """
    C = _check_nonnegative(C)
    X = as_strategy(X0)
    if X.size != C.shape[0]:
        raise ValueError("dimension mismatch between payoff matrix and strategy")
    if not is_interior(X):
        raise ValueError("X0 must be interior")
    cfg = PowerConfig(max_iters=inner_max_iters, tol=inner_tol, detect_stagnation=False)
    trace = []
    for k in range(1, iters + 1):
        M = X[:, None] * C
        v, est, ptrace = power_iterate(M, X, cfg)
        X = project_simplex(v)
        lam = est.lambda1
        trace.append(
            EigNashRecord(
                k,
                X,
                lam,
                eignash_residual(C, X, lam),
                approx_error(C, X),
                ptrace.iterations,
                ptrace.converged,
            )
        )
    return trace
