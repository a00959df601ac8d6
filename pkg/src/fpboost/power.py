"""Simple, exponentiated and truncated-exponential power iterations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import NumericalRangeError, StagnationError
from .linops import as_matrix, exp_apply, matvec, truncated_exp_apply

STAGNATION_WINDOW = 50
# sin-angle values below this are rounding noise, not stagnation
STAGNATION_FLOOR = 1e-10


@dataclass(frozen=True)
class PowerConfig:
    """Settings for a power-iteration run.

    ``m`` is the truncation order of the exponential series, or ``"exact"``
    to sum the series until it settles. ``m = 0`` means plain power
    iteration on ``A``; ``alpha`` is then ignored.
    """

    alpha: float = 1.0
    m: Union[int, str] = 0
    max_iters: int = 10_000
    tol: float = 1e-12
    keep_iterates: int = 0
    detect_stagnation: bool = True

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.m != "exact" and (not isinstance(self.m, (int, np.integer)) or self.m < 0):
            raise ValueError("m must be a nonnegative integer or 'exact'")

    @property
    def exact(self) -> bool:
        return self.m == "exact"


@dataclass
class SpectralEstimate:
    lambda1: float
    lambda2_modulus: Optional[float] = None
    rate: Optional[float] = None
    rate_constant_c: Optional[float] = None


@dataclass
class PowerTrace:
    """Per-iteration records. ``iterates`` is thinned by ``keep_iterates``."""

    rayleigh: list = field(default_factory=list)
    sin_angle: list = field(default_factory=list)
    step_change: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.rayleigh)


def sin_angle(x, u) -> float:
    """Sine of the angle between the lines spanned by ``x`` and ``u``."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    x = x / np.linalg.norm(x)
    u = u / np.linalg.norm(u)
    resid = x - (x @ u) * u
    return float(min(1.0, np.linalg.norm(resid)))


def _run(A, operator: Callable, x0, cfg: PowerConfig, ref):
    A = as_matrix(A)
    x = np.array(x0, dtype=np.float64)
    if x.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, x0 has shape {x.shape}")
    norm0 = np.linalg.norm(x)
    if norm0 == 0 or not np.isfinite(norm0):
        raise ValueError("x0 must be a finite nonzero vector")
    x = x / norm0
    if ref is not None:
        ref = np.asarray(ref, dtype=np.float64)
        ref = ref / np.linalg.norm(ref)

    trace = PowerTrace()
    rising = 0
    for k in range(cfg.max_iters):
        y = operator(x)
        if not np.all(np.isfinite(y)):
            raise NumericalRangeError(f"non-finite iterate at step {k + 1}")
        ny = np.linalg.norm(y)
        if ny == 0:
            raise NumericalRangeError(f"iterate mapped into the nullspace at step {k + 1}")
        y = y / ny
        s = 1.0 if y @ x >= 0 else -1.0
        change = float(np.linalg.norm(y - s * x))
        x = y

        trace.rayleigh.append(float(x @ matvec(A, x)))
        trace.step_change.append(change)
        if ref is not None:
            trace.sin_angle.append(sin_angle(x, ref))
        if cfg.keep_iterates and k % cfg.keep_iterates == 0:
            trace.iterates.append(x.copy())

        if change < cfg.tol:
            trace.converged = True
            break

        if not cfg.detect_stagnation:
            continue
        watch = trace.sin_angle if ref is not None else trace.step_change
        if len(watch) >= 2 and watch[-1] >= watch[-2] and watch[-1] > STAGNATION_FLOOR:
            rising += 1
            if rising >= STAGNATION_WINDOW:
                raise StagnationError(
                    f"no progress for {STAGNATION_WINDOW} steps at iteration {k + 1}; "
                    "x0 may be orthogonal to the left dominant eigenvector"
                )
        else:
            rising = 0

    if cfg.keep_iterates and (trace.iterations - 1) % cfg.keep_iterates != 0:
        trace.iterates.append(x.copy())
    est = SpectralEstimate(lambda1=trace.rayleigh[-1])
    return x, est, trace


def power_iterate(A, x0, cfg: Optional[PowerConfig] = None, ref=None):
    """Plain power iteration ``x <- A x / ||A x||``.

    Stops when the sign-aligned step ``||x_{k+1} - s x_k||`` drops below
    ``cfg.tol``. If ``ref`` (a reference eigenvector) is given the trace
    carries the sin-angle series against it.

    Returns ``(x, SpectralEstimate, PowerTrace)``.
    """
    cfg = cfg or PowerConfig()
    A = as_matrix(A)
    return _run(A, lambda v: matvec(A, v), x0, cfg, ref)


def exp_power_iterate(A, x0, cfg: PowerConfig, ref=None):
    """Power iteration on ``exp(alpha A)`` or its order-``m`` truncation.

    The operator is applied through the series recurrence, never formed.
    The geometric rate guarantee needs a real positive dominant eigenvalue;
    that is not checked. ``cfg.m == 0`` falls back to plain power iteration.
    """
    A = as_matrix(A)
    if cfg.exact:
        op = lambda v: exp_apply(A, cfg.alpha, v)[0]
    elif cfg.m == 0:
        return power_iterate(A, x0, cfg, ref)
    else:
        op = lambda v: truncated_exp_apply(A, cfg.alpha, cfg.m, v)
    return _run(A, op, x0, cfg, ref)


def fit_geometric_rate(series, floor: float = 1e-13, min_points: int = 8):
    """Fit ``c * r**k`` to the tail of a decaying series.

    Least squares on ``log(series)`` over the latter half of the leading
    stretch of entries above ``floor``; anything after the first entry at
    or below ``floor`` is rounding noise. A series that reaches exactly
    zero too early to fit converged exactly and gets ``r = 0``.
    Returns ``(r, c)``.
    """
    s = np.asarray(series, dtype=np.float64)
    zeros = np.flatnonzero(s == 0)
    if zeros.size and zeros[0] < min_points:
        return 0.0, float(s[0])
    above = s > floor
    start = int(np.argmax(above)) if above.any() else s.size
    stop = start
    while stop < s.size and above[stop]:
        stop += 1
    idx = np.arange(start, stop)
    if idx.size < min_points:
        raise ValueError(f"need at least {min_points} positive entries to fit a rate, got {idx.size}")
    tail = idx[idx.size // 2:]
    if tail.size < min_points:
        tail = idx[-min_points:]
    slope, intercept = np.polyfit(tail.astype(np.float64), np.log(s[tail]), 1)
    return float(np.exp(slope)), float(np.exp(intercept))
