import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpboost.eignash import eignash_iterate, eignash_residual, project_simplex
from fpboost.games import builtin_matrix, normalize_payoffs, uniform, vertex

NRPS = normalize_payoffs(builtin_matrix("rps")).normalized
X0 = np.array([0.5, 0.25, 0.25])


class TestResidual:
    def test_normalized_rps_uniform(self):
        assert eignash_residual(NRPS, uniform(3), 0.5) == pytest.approx(0.0, abs=1e-16)

    def test_identity_vertex(self):
        assert eignash_residual(np.eye(3), vertex(3, 0), 1.0) == 0.0

    def test_mismatched_lambda(self):
        assert eignash_residual(NRPS, uniform(3), 0.7) == pytest.approx(0.2 / 3)
        assert eignash_residual(NRPS, X0, 0.5) > 0

    def test_rejects_negative_entries(self):
        with pytest.raises(ValueError):
            eignash_residual(builtin_matrix("rps"), uniform(3), 0.0)
        with pytest.raises(ValueError):
            eignash_iterate(builtin_matrix("rps"), X0, 1)


class TestProjectSimplex:
    def test_sign_flip(self):
        np.testing.assert_allclose(project_simplex([-1.0, -3.0]), [0.25, 0.75])

    @given(st.lists(st.floats(1e-6, 10.0), min_size=1, max_size=8), st.booleans())
    def test_unit_sum_and_nonnegative(self, v, flip):
        v = np.array(v) * (-1 if flip else 1)
        p = project_simplex(v)
        assert p.min() >= 0.0
        assert abs(p.sum() - 1.0) <= 1e-12


class TestIterate:
    def test_uniform_is_fixed(self):
        trace = eignash_iterate(NRPS, uniform(3), 5)
        for rec in trace:
            np.testing.assert_allclose(rec.X, uniform(3), atol=1e-12)
            assert rec.lam == pytest.approx(0.5, abs=1e-12)

    def test_converges_on_rps(self):
        trace = eignash_iterate(NRPS, X0, 120)
        dist = [np.max(np.abs(r.X - uniform(3))) for r in trace]
        first = next(k for k, d in enumerate(dist, start=1) if d <= 1e-6)
        assert first <= 120
        assert trace[-1].residual <= 1e-8
        assert trace[-1].lam == pytest.approx(0.5, abs=1e-12)
        assert all(r.inner_converged for r in trace)

    def test_linear_contraction_rate(self):
        # the map's Jacobian at uniform has spectral radius sqrt(3)/2, so
        # the distance to uniform shrinks by about that factor per step
        trace = eignash_iterate(NRPS, X0, 80)
        dist = np.array([np.max(np.abs(r.X - uniform(3))) for r in trace])
        rate = (dist[-1] / dist[39]) ** (1 / 40)
        assert rate == pytest.approx(math.sqrt(3) / 2, abs=0.01)

    def test_fifty_iterations_fall_short_of_one_in_a_million(self):
        trace = eignash_iterate(NRPS, X0, 50)
        assert 1e-6 < np.max(np.abs(trace[-1].X - uniform(3))) < 1e-3

    def test_random_nonnegative_game_emits_a_trace(self):
        C = np.random.default_rng(1).random((5, 5))
        trace = eignash_iterate(C, uniform(5), 20)
        assert len(trace) == 20
        for k, rec in enumerate(trace, start=1):
            assert rec.k == k
            assert rec.lam > 0 and rec.residual >= 0 and rec.approx_error >= 0
            assert abs(rec.X.sum() - 1.0) <= 1e-12 and rec.X.min() >= 0

    def test_inner_cap_is_recorded_not_fatal(self):
        trace = eignash_iterate(NRPS, X0, 2, inner_max_iters=3)
        assert len(trace) == 2
        assert not trace[0].inner_converged and trace[0].inner_iterations == 3

    @pytest.mark.parametrize("X", [[0.5, 0.5, 0.0], [0.5, 0.5]])
    def test_bad_start(self, X):
        with pytest.raises(ValueError):
            eignash_iterate(NRPS, X, 1)
