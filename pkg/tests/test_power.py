import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpboost.errors import NumericalRangeError, StagnationError
from fpboost.linops import google_matrix, truncated_exp_apply
from fpboost.power import (
    PowerConfig,
    exp_power_iterate,
    fit_geometric_rate,
    power_iterate,
    sin_angle,
)

import oracles

DIAG = np.diag([1.0, 0.5])
E1 = np.array([1.0, 0.0])


def spectral_ratio(A, op):
    """|mu_2| / |mu_1| of op applied to the eigenvalues of A, from numpy's eigensolver."""
    lam = np.linalg.eigvals(A).real
    mu = sorted((abs(op(l)) for l in lam), reverse=True)
    return mu[1] / mu[0]


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(alpha=0.0), dict(max_iters=0), dict(tol=0.0), dict(m=-1), dict(m="fast"), dict(m=1.5)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            PowerConfig(**kwargs)

    def test_exact_flag(self):
        assert PowerConfig(m="exact").exact
        assert not PowerConfig(m=3).exact


class TestPowerIterate:
    def test_diagonal(self):
        x, est, trace = power_iterate(np.diag([2.0, 1.0]), [1.0, 1.0])
        assert trace.converged
        assert abs(abs(x[0]) - 1.0) < 1e-12
        assert est.lambda1 == pytest.approx(2.0, abs=1e-12)

    def test_identity_one_step(self):
        x, est, trace = power_iterate(np.eye(3), [3.0, 0.0, 4.0])
        np.testing.assert_allclose(x, [0.6, 0.0, 0.8])
        assert trace.iterations == 1
        assert est.lambda1 == pytest.approx(1.0)

    def test_google_two_cycle(self):
        G = google_matrix([(0, 1), (1, 0)], 2, 0.85)
        x, est, _ = power_iterate(G, [1.0, 0.0], PowerConfig(max_iters=100_000))
        np.testing.assert_allclose(np.abs(x), [2**-0.5, 2**-0.5], atol=1e-10)
        assert est.lambda1 == pytest.approx(1.0, abs=1e-10)

    def test_negative_dominant_eigenvalue_converges(self):
        x, est, trace = power_iterate(np.diag([-2.0, 1.0]), [1.0, 1.0])
        assert trace.converged
        assert est.lambda1 == pytest.approx(-2.0, abs=1e-12)

    def test_nullspace(self):
        with pytest.raises(NumericalRangeError):
            power_iterate(np.array([[0.0, 1.0], [0.0, 0.0]]), [1.0, 0.0])

    @pytest.mark.parametrize("x0", [[0.0, 0.0], [np.nan, 1.0], [1.0, 2.0, 3.0]])
    def test_bad_start(self, x0):
        with pytest.raises(ValueError):
            power_iterate(np.eye(2), x0)

    def test_stagnation_detected(self):
        # start orthogonal to the dominant direction of a rotation-like matrix
        A = np.array([[0.0, 1.0], [-1.0, 0.0]])
        with pytest.raises(StagnationError):
            power_iterate(A, [1.0, 0.0], ref=[1.0, 1.0])

    def test_keep_iterates_thinning(self):
        _, _, trace = power_iterate(DIAG, [1.0, 1.0], PowerConfig(keep_iterates=10))
        assert len(trace.iterates) == math.ceil(trace.iterations / 10) + ((trace.iterations - 1) % 10 != 0)

    @given(st.integers(2, 6).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, 2**32 - 1))))
    def test_unit_norm_and_sin_range(self, data):
        n, seed = data
        rng = np.random.default_rng(seed)
        A = rng.random((n, n)) + np.eye(n)
        w, V = np.linalg.eig(A)
        ref = np.abs(V[:, np.argmax(w.real)].real)
        _, _, trace = power_iterate(A, rng.random(n) + 0.1, PowerConfig(keep_iterates=1, max_iters=500), ref=ref)
        norms = [np.linalg.norm(v) for v in trace.iterates]
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)
        assert all(0.0 <= s <= 1.0 for s in trace.sin_angle)
        assert len(trace.sin_angle) == len(trace.rayleigh) == trace.iterations


class TestExpPowerIterate:
    def test_exact_mode_rate(self):
        _, est, trace = exp_power_iterate(DIAG, [1.0, 1.0], PowerConfig(alpha=2.0, m="exact"), ref=E1)
        r, _ = fit_geometric_rate(trace.sin_angle)
        assert r == pytest.approx(spectral_ratio(DIAG, lambda l: math.exp(2 * l)), abs=1e-3)
        assert r == pytest.approx(math.exp(-1), abs=1e-3)
        assert est.lambda1 == pytest.approx(1.0, abs=1e-12)

    def test_m_zero_is_simple_power(self):
        _, _, t0 = exp_power_iterate(DIAG, [1.0, 1.0], PowerConfig(alpha=5.0, m=0), ref=E1)
        _, _, t1 = power_iterate(DIAG, [1.0, 1.0], ref=E1)
        assert t0.sin_angle == t1.sin_angle
        assert fit_geometric_rate(t0.sin_angle)[0] == pytest.approx(0.5, abs=1e-3)

    @pytest.mark.parametrize("m", [1, 2, 3])
    @pytest.mark.parametrize("alpha", [1.0, 2.0])
    def test_truncated_rate(self, m, alpha):
        _, _, trace = exp_power_iterate(DIAG, [1.0, 1.0], PowerConfig(alpha=alpha, m=m), ref=E1)
        r, _ = fit_geometric_rate(trace.sin_angle)
        assert r == pytest.approx(oracles.truncated_ratio(1.0, 0.5, alpha, m), abs=1e-3)

    @pytest.mark.parametrize("cfg", [PowerConfig(alpha=0.3, m=2), PowerConfig(alpha=3.0, m="exact")])
    def test_identity_one_step(self, cfg):
        x, _, trace = exp_power_iterate(np.eye(2), [2.0, 0.0], cfg)
        np.testing.assert_allclose(x, [1.0, 0.0])
        assert trace.iterations == 1

    @pytest.mark.parametrize("lam2,alpha", [(0.5, 2.0), (0.8, 3.0), (0.2, 4.0)])
    def test_exponentiation_beats_simple_power(self, lam2, alpha):
        A = np.diag([1.0, lam2])
        assert math.exp(alpha * (lam2 - 1)) < lam2
        _, _, te = exp_power_iterate(A, [1.0, 1.0], PowerConfig(alpha=alpha, m="exact"), ref=E1)
        _, _, ts = power_iterate(A, [1.0, 1.0], ref=E1)
        assert fit_geometric_rate(te.sin_angle)[0] < fit_geometric_rate(ts.sin_angle)[0]
        assert te.iterations < ts.iterations

    @given(st.integers(2, 5), st.integers(0, 2**32 - 1), st.floats(0.1, 3.0), st.integers(0, 6))
    def test_fixed_direction_inherited(self, n, seed, alpha, m):
        rng = np.random.default_rng(seed)
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        lam = rng.uniform(-1, 1, size=n)
        lam[0] = 1.0
        A = Q @ np.diag(lam) @ Q.T
        x_star = Q[:, 0]
        y = truncated_exp_apply(A, alpha, m, x_star)
        scale = sum(alpha**k / math.factorial(k) for k in range(m + 1))
        np.testing.assert_allclose(y, scale * x_star, atol=1e-10 * scale)


class TestFitGeometricRate:
    def test_exact_geometric(self):
        r, c = fit_geometric_rate(0.5 ** np.arange(30))
        assert r == pytest.approx(0.5, rel=1e-12)
        assert c == pytest.approx(1.0, rel=1e-12)

    def test_early_zero_means_exact_convergence(self):
        assert fit_geometric_rate([0.5, 0.0, 0.0])[0] == 0.0

    def test_trailing_zero_ignored(self):
        s = list(0.3 ** np.arange(20)) + [0.0]
        assert fit_geometric_rate(s)[0] == pytest.approx(0.3, rel=1e-9)

    def test_floor_noise_ignored(self):
        s = list(0.5 ** np.arange(40)) + [1e-14, 3e-14, 2e-15]
        assert fit_geometric_rate(s)[0] == pytest.approx(0.5, rel=1e-9)

    def test_too_short(self):
        with pytest.raises(ValueError):
            fit_geometric_rate([0.5, 0.25, 0.125])


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_sin_angle_is_symmetric_and_bounded(x, u):
    x, u = np.array(x), np.array(u)
    if np.linalg.norm(x) < 1e-3 or np.linalg.norm(u) < 1e-3:
        return
    s = sin_angle(x, u)
    assert 0.0 <= s <= 1.0
    assert s == pytest.approx(sin_angle(u, x), abs=1e-12)
    assert sin_angle(x, -2 * x) == pytest.approx(0.0, abs=1e-12)
