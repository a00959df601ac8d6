import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpboost.games import builtin_matrix, relative_entropy, uniform, vertex
from fpboost.replicator import hedge_integrator_error, integrate_orbit, replicator_rhs

import oracles

RPS = builtin_matrix("rps")
X0 = np.array([0.5, 0.25, 0.25])


class TestRhs:
    @pytest.mark.parametrize(
        "C,X,expected",
        [
            (RPS, uniform(3), [0.0, 0.0, 0.0]),
            (RPS, X0, [0.0, 0.0625, -0.0625]),
            (builtin_matrix("shapley6"), vertex(6, 0), np.zeros(6)),
        ],
    )
    def test_examples(self, C, X, expected):
        np.testing.assert_allclose(replicator_rhs(C, X), expected, atol=1e-16)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            replicator_rhs(RPS, uniform(2))

    def test_tangent_on_random_cases(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(2, 9))
            C = rng.normal(size=(n, n))
            X = rng.dirichlet(np.ones(n))
            worst = max(worst, abs(replicator_rhs(C, X).sum()))
        assert worst <= 1e-12

    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_every_vertex_is_a_rest_point(self, n, seed):
        C = np.random.default_rng(seed).normal(size=(n, n))
        for j in range(n):
            np.testing.assert_array_equal(replicator_rhs(C, vertex(n, j)), 0.0)


class TestIntegrateOrbit:
    def test_matches_adaptive_reference(self):
        orbit = integrate_orbit(RPS, X0, 10.0, 0.01, record_every=100)
        ref = oracles.replicator_reference(RPS, X0, 10.0, t_eval=orbit.times)
        np.testing.assert_allclose(orbit.points, ref, atol=1e-8)

    def test_conservation_and_average(self):
        orbit = integrate_orbit(RPS, X0, 100.0, 0.01, target=uniform(3), record_every=1000)
        assert orbit.summary.conserved_re_drift <= 1e-6
        assert orbit.summary.clamps == 0
        np.testing.assert_allclose(orbit.re, relative_entropy(uniform(3), X0), atol=1e-6)

    def test_orbit_cycles_but_average_settles(self):
        orbit = integrate_orbit(RPS, X0, 1000.0, 0.01, record_every=1000)
        assert np.max(np.abs(orbit.summary.average - uniform(3))) <= 1e-2
        assert np.max(np.abs(orbit.points[-1] - uniform(3))) > 0.05
        # distance of the average at t = 10 against t = 1000
        dist = np.max(np.abs(orbit.averages - uniform(3)), axis=1)
        assert dist[-1] <= dist[1] / 10

    def test_uniform_is_a_rest_point(self):
        orbit = integrate_orbit(RPS, uniform(3), 5.0, 0.01)
        np.testing.assert_allclose(orbit.points, np.tile(uniform(3), (len(orbit.points), 1)), atol=1e-15)
        np.testing.assert_allclose(orbit.summary.average, uniform(3), atol=1e-15)

    def test_dominant_strategy_game(self):
        # row 1 dominates in [[0,1],[-1,0]], so mass flows to E_1 and the average follows
        orbit = integrate_orbit(builtin_matrix("pennies"), [0.7, 0.3], 500.0, 0.01, record_every=50_000)
        assert orbit.points[-1][0] > 0.99
        assert orbit.summary.average[0] > 0.95

    def test_simplex_preserved(self):
        rng = np.random.default_rng(3)
        C = rng.normal(size=(5, 5))
        orbit = integrate_orbit(C, rng.dirichlet(np.ones(5)), 20.0, 0.01)
        np.testing.assert_allclose(orbit.points.sum(axis=1), 1.0, atol=1e-10)
        np.testing.assert_allclose(orbit.averages.sum(axis=1), 1.0, atol=1e-10)
        assert orbit.points.min() >= 0.0

    def test_record_every_keeps_endpoints(self):
        orbit = integrate_orbit(RPS, X0, 1.0, 0.01, record_every=30)
        assert orbit.times[0] == 0.0
        assert orbit.times[-1] == pytest.approx(1.0)
        assert orbit.steps == 100 and orbit.complete

    @pytest.mark.parametrize("t_end,dt", [(1.0, 0.0), (1.0, -0.1), (1.005, 0.01), (-1.0, 0.01)])
    def test_bad_horizon(self, t_end, dt):
        with pytest.raises(ValueError):
            integrate_orbit(RPS, X0, t_end, dt)

    def test_rejects_boundary_start(self):
        with pytest.raises(ValueError):
            integrate_orbit(RPS, [0.5, 0.5, 0.0], 1.0)

    def test_non_finite_step_aborts_with_partial_trace(self):
        orbit = integrate_orbit(RPS * 1e306, X0, 1.0, 0.01)
        assert not orbit.complete
        assert orbit.aborted_at == 0.0
        assert len(orbit.points) == 1

    def test_trace_rows(self):
        orbit = integrate_orbit(RPS, X0, 0.05, 0.01, target=uniform(3))
        rows = list(orbit.trace_rows())
        assert len(rows) == 6
        t, x, avg, re = rows[0]
        assert t == 0.0 and np.array_equal(x, X0) and np.array_equal(avg, X0)
        assert re == pytest.approx(relative_entropy(uniform(3), X0))


@pytest.fixture(scope="module")
def table():
    return hedge_integrator_error(RPS, X0, 5.0, [0.1, 0.05, 0.025])


class TestHedgeIntegratorError:
    def test_first_order_hedge(self, table):
        for r in table.ratios("hedge_error"):
            assert 1.6 <= r <= 2.6

    def test_second_order_agreement_with_euler(self, table):
        for r in table.ratios("step_gap"):
            assert 4 * 0.7 <= r <= 4 * 1.3

    def test_euler_is_also_first_order(self, table):
        for r in table.ratios("euler_error"):
            assert 1.6 <= r <= 2.6
        assert all(row.euler_left_simplex is None for row in table.rows)

    def test_reference_resolution(self, table):
        assert table.ref_dt == pytest.approx(0.025 / 20)
        assert [row.steps for row in table.rows] == [50, 100, 200]

    def test_uniform_start_has_no_error(self):
        table = hedge_integrator_error(RPS, uniform(3), 1.0, [0.1, 0.05])
        for row in table.rows:
            assert row.hedge_error <= 1e-15 and row.euler_error <= 1e-15 and row.step_gap <= 1e-15

    def test_euler_leaving_simplex_is_flagged(self):
        table = hedge_integrator_error(RPS * 20, X0, 1.0, [0.5])
        assert table.rows[0].euler_left_simplex is not None

    @pytest.mark.parametrize("kwargs", [dict(alphas=[]), dict(alphas=[0.3]), dict(alphas=[0.1], ref_dt=0.05)])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            hedge_integrator_error(RPS, X0, 1.0, **kwargs)
