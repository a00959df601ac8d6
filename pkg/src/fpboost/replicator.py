"""Replicator dynamics: fixed-step integration, time averages, and Hedge as an integrator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .games import (
    LOG_DOMAIN,
    HedgeParams,
    as_strategy,
    euler_step,
    hedge_step,
    is_interior,
    relative_entropy,
)
from .linops import as_dense


def replicator_rhs(C, X) -> np.ndarray:
    """``X(i) ((CX)_i - X.CX)``; a tangent vector to the simplex."""
    C = as_dense(C)
    X = np.asarray(X, dtype=np.float64)
    if C.shape[0] != X.shape[0]:
        raise ValueError("dimension mismatch between payoff matrix and strategy")
    v = C @ X
    return X * (v - X @ v)


def _steps(t_end: float, dt: float) -> int:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a whole number of steps of {dt}")
    return n


@dataclass
class OrbitAverage:
    t_end: float
    dt: float
    average: np.ndarray
    conserved_re_drift: Optional[float] = None
    clamps: int = 0


@dataclass
class Orbit:
    """An integrated orbit. Arrays are thinned by ``record_every``."""

    summary: OrbitAverage
    times: np.ndarray
    points: np.ndarray
    averages: np.ndarray
    re: Optional[np.ndarray] = None
    aborted_at: Optional[float] = None
    steps: int = 0

    @property
    def complete(self) -> bool:
        return self.aborted_at is None

    def trace_rows(self):
        for i, t in enumerate(self.times):
            re = None if self.re is None else float(self.re[i])
            yield float(t), self.points[i], self.averages[i], re


def integrate_orbit(C, X0, t_end: float, dt: float = 0.01, target=None, record_every: int = 1) -> Orbit:
    """Classic RK4 on the replicator field with renormalization after each step.

    Negative components are clamped to zero before renormalizing; each
    clamp is counted because it means ``dt`` is too large. The time average
    ``(1/t) int_0^t X`` uses the trapezoid rule over the steps. When
    ``target`` is given the relative entropy to it is traced and its
    largest excursion from the initial value is reported as the drift.
    A non-finite step stops the run and returns what was integrated so far.
    """
    C = np.array(as_dense(C), dtype=np.float64)
    X = as_strategy(X0)
    if not is_interior(X):
        raise ValueError("X0 must be interior")
    if record_every < 1:
        raise ValueError("record_every must be at least 1")
    steps = _steps(t_end, dt)
    if target is not None:
        target = as_strategy(target)
        re0 = relative_entropy(target, X)

    def f(x):
        v = C @ x
        return x * (v - x @ v)

    rows = steps // record_every + 2
    times = np.empty(rows)
    points = np.empty((rows, X.size))
    avgs = np.empty((rows, X.size))
    res = np.empty(rows) if target is not None else None
    acc = np.zeros_like(X)
    avg = X.copy()
    clamps = 0
    drift = 0.0
    aborted = None

    times[0], points[0], avgs[0] = 0.0, X, avg
    if res is not None:
        res[0] = re0
    r = 1
    h = dt
    k = 0
    for k in range(1, steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = f(X)
            k2 = f(X + 0.5 * h * k1)
            k3 = f(X + 0.5 * h * k2)
            k4 = f(X + h * k3)
            Y = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(Y)):
            aborted = (k - 1) * dt
            k -= 1
            break
        if np.any(Y < 0):
            clamps += 1
            Y = np.maximum(Y, 0.0)
        Y = Y / Y.sum()
        acc += 0.5 * h * (X + Y)
        X = Y
        avg = acc / (k * h)
        if target is not None:
            re = relative_entropy(target, X)
            drift = max(drift, abs(re - re0))
        if k % record_every == 0 or k == steps:
            times[r], points[r], avgs[r] = k * h, X, avg
            if res is not None:
                res[r] = re
            r += 1

    summary = OrbitAverage(k * dt, dt, avg, drift if target is not None else None, clamps)
    return Orbit(summary, times[:r], points[:r], avgs[:r], None if res is None else res[:r], aborted, k)


@dataclass
class IntegratorErrorRow:
    alpha: float
    steps: int
    hedge_error: float
    euler_error: float
    step_gap: float
    euler_left_simplex: Optional[int] = None


@dataclass
class IntegratorTable:
    rows: list = field(default_factory=list)
    ref_dt: float = 0.0

    def ratios(self, attr: str) -> list:
        vals = [getattr(r, attr) for r in self.rows]
        return [a / b if b > 0 else math.inf for a, b in zip(vals, vals[1:])]


def hedge_integrator_error(C, X0, t_end: float, alphas, ref_dt: Optional[float] = None, gap_samples: int = 50) -> IntegratorTable:
    """Compare iterated Hedge and iterated Euler with an RK4 reference orbit.

    For each step ``alpha``, both maps are iterated ``t_end/alpha`` times and
    compared in sup norm with the reference point at ``t_end``. ``step_gap``
    is the largest single-step difference ``|T(X) - euler(X)|`` over points
    sampled from the reference orbit; it is second order in ``alpha``.
    Euler iterates that leave the simplex are flagged with the step index.
    """
    C = np.array(as_dense(C), dtype=np.float64)
    X0 = as_strategy(X0)
    alphas = [float(a) for a in alphas]
    if not alphas or min(alphas) <= 0:
        raise ValueError("alphas must be positive")
    for a in alphas:
        _steps(t_end, a)
    if ref_dt is None:
        ref_dt = min(alphas) / 20
    if ref_dt > min(alphas) / 20 * (1 + 1e-12):
        raise ValueError("reference dt must be at most min(alpha)/20")
    steps = _steps(t_end, ref_dt)
    ref = integrate_orbit(C, X0, t_end, ref_dt, record_every=max(1, steps // gap_samples))
    x_ref = ref.points[-1]
    samples = ref.points

    table = IntegratorTable(ref_dt=ref_dt)
    for a in alphas:
        n = _steps(t_end, a)
        params = HedgeParams(a, LOG_DOMAIN)
        Xh = X0.copy()
        Xe = X0.copy()
        left = None
        for k in range(1, n + 1):
            Xh = hedge_step(C, Xh, params)
            Xe = euler_step(C, Xe, Xe, a)
            if left is None and np.any(Xe < 0):
                left = k
        gap = max(float(np.max(np.abs(hedge_step(C, x, params) - euler_step(C, x, x, a)))) for x in samples)
        table.rows.append(
            IntegratorErrorRow(
                a,
                n,
                float(np.max(np.abs(Xh - x_ref))),
                float(np.max(np.abs(Xe - x_ref))),
                gap,
                left,
            )
        )
    return table
