import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hoinfo.linalg import (
    NotPositiveDefiniteError,
    cholesky,
    conditional_moments,
    logdet,
    schur_conditional,
)


def equicorrelated(n: int, rho: float) -> np.ndarray:
    return np.full((n, n), rho) + (1.0 - rho) * np.eye(n)


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky(np.eye(3)), np.eye(3))

    def test_two_by_two(self):
        m = np.array([[1.0, 0.5], [0.5, 1.0]])
        L = cholesky(m)
        np.testing.assert_allclose(L, [[1.0, 0.0], [0.5, np.sqrt(0.75)]])
        assert np.max(np.abs(L @ L.T - m)) < 1e-8

    def test_rank_deficient(self):
        with pytest.raises(NotPositiveDefiniteError) as err:
            cholesky(np.array([[1.0, 1.0], [1.0, 1.0]]))
        assert err.value.pivot == 1
        assert "pivot" in str(err.value)

    def test_jitter_retry_recovers_singular_limit(self):
        m = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(NotPositiveDefiniteError):
            cholesky(m)
        L = cholesky(m, jitter=True)
        assert np.max(np.abs(L @ L.T - m)) < 1e-7

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            cholesky(np.array([[1.0, 0.2], [0.0, 1.0]]))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            cholesky(np.array([[np.inf, 0.0], [0.0, 1.0]]))

    @settings(deadline=None, max_examples=50)
    @given(
        arrays(np.float64, (4, 4), elements=st.floats(-2, 2, allow_nan=False)),
    )
    def test_round_trip_random_pd(self, a):
        m = a @ a.T + 1e-3 * np.eye(4)
        L = cholesky(m)
        assert np.max(np.abs(L @ L.T - m)) <= 1e-8
        assert np.allclose(np.triu(L, k=1), 0.0)


class TestLogdet:
    def test_identity(self):
        assert logdet(np.eye(7)) == pytest.approx(0.0, abs=1e-12)

    def test_scalar(self):
        assert logdet(np.array([[4.0]])) == pytest.approx(np.log(4.0))

    def test_equicorrelated_vs_brute_force(self):
        rho = 0.5
        m = equicorrelated(3, rho)
        # Leibniz expansion of the 3x3 determinant, no linear algebra involved
        det = (
            m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
            - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
        )
        assert det == pytest.approx((1 - rho) ** 2 * (1 + 2 * rho))
        assert logdet(m) == pytest.approx(np.log(det))
        assert logdet(m) == pytest.approx(np.log(0.5))


class TestSchurConditional:
    def test_independent_blocks_unchanged(self):
        m = np.diag([1.0, 2.0, 3.0, 4.0])
        out = schur_conditional(m, [0, 1], [2, 3])
        np.testing.assert_allclose(out, np.diag([1.0, 2.0]))

    def test_equicorrelated_scalar(self):
        m = equicorrelated(3, 0.5)
        # direct 2x2 inverse: 1 - [rho, rho] inv([[1, rho], [rho, 1]]) [rho, rho]'
        rho = 0.5
        inv22 = np.linalg.inv(np.array([[1.0, rho], [rho, 1.0]]))
        expected = 1.0 - np.array([rho, rho]) @ inv22 @ np.array([rho, rho])
        assert expected == pytest.approx(2.0 / 3.0)
        out = schur_conditional(m, [0], [1, 2])
        assert out[0, 0] == pytest.approx(2.0 / 3.0)

    def test_empty_given(self):
        m = equicorrelated(3, 0.3)
        np.testing.assert_allclose(schur_conditional(m, [0, 2], []), m[np.ix_([0, 2], [0, 2])])

    def test_overlap_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            schur_conditional(np.eye(3), [0, 1], [1, 2])

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError, match="bounds"):
            schur_conditional(np.eye(3), [0], [5])

    def test_conditional_moments_match_regression(self):
        gen = np.random.default_rng(0)
        a = gen.standard_normal((5, 5))
        m = a @ a.T + np.eye(5)
        coef, schur = conditional_moments(m, [0, 1], [2, 3, 4])
        expected_coef = m[np.ix_([0, 1], [2, 3, 4])] @ np.linalg.inv(m[np.ix_([2, 3, 4], [2, 3, 4])])
        np.testing.assert_allclose(coef, expected_coef, atol=1e-10)
        np.testing.assert_allclose(schur, schur.T)
