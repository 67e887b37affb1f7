import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hoinfo import oracle
from hoinfo.rng import RngStream
from hoinfo.systems import (
    Dataset,
    SingularSystemError,
    SystemSpec,
    VariablePartition,
    apply_transform,
    build_cov,
    build_mixed_cov,
    build_redundant_cov,
    build_synergistic_cov,
    default_sigma_grid,
    gauss_cdf,
    half_cube,
    sample,
    sample_system,
)


class TestPartition:
    def test_offsets_and_dims(self):
        p = VariablePartition((2, 1, 3))
        assert p.n_vars == 3
        assert p.total_dim == 6
        assert p.offsets == (0, 2, 3, 6)
        assert p.block(1) == slice(2, 3)
        np.testing.assert_array_equal(p.indices((0, 2)), [0, 1, 3, 4, 5])

    def test_invalid_dims(self):
        with pytest.raises(ValueError):
            VariablePartition((2, 0))
        with pytest.raises(ValueError):
            VariablePartition(())


class TestRedundant:
    def test_sigma_one_gives_half_correlation(self):
        cov = build_redundant_cov(3, 1, 1.0)
        assert cov.matrix[0, 1] == pytest.approx(0.5)
        np.testing.assert_allclose(np.diag(cov.matrix), 1.0)

    def test_large_sigma_is_independence_limit(self):
        cov = build_redundant_cov(4, 2, 1e6)
        assert np.max(np.abs(cov.matrix - np.eye(8))) < 1e-10
        assert abs(oracle.measures(cov).o_info) < 1e-9

    def test_smallest_eigenvalue(self):
        cov = build_redundant_cov(3, 1, 1.0)
        assert np.linalg.eigvalsh(cov.matrix)[0] == pytest.approx(0.5)

    def test_sigma_zero_singular(self):
        with pytest.raises(SingularSystemError):
            build_redundant_cov(3, 1, 0.0)

    def test_block_structure_multidim(self):
        cov = build_redundant_cov(2, 3, 1.0)
        np.testing.assert_allclose(cov.matrix[:3, 3:], 0.5 * np.eye(3))


class TestSynergistic:
    def test_sigma_zero_couplings(self):
        cov = build_synergistic_cov(3, 1, 0.0, require_pd=False)
        c = 1.0 / np.sqrt(2.0)
        assert cov.matrix[0, 1] == pytest.approx(c)
        assert cov.matrix[1, 2] == pytest.approx(c)
        assert cov.matrix[0, 2] == 0.0

    def test_sigma_zero_is_singular(self):
        with pytest.raises(SingularSystemError, match="eigenvalue"):
            build_synergistic_cov(3, 1, 0.0)

    def test_positive_sigma_is_pd(self):
        cov = build_synergistic_cov(4, 1, 1.0)
        assert np.linalg.eigvalsh(cov.matrix)[0] > 0

    def test_large_sigma_decouples_tail(self):
        cov = build_synergistic_cov(3, 1, 1e6)
        assert abs(cov.matrix[1, 2]) < 1e-6
        assert abs(oracle.measures(cov).o_info) < 1e-9

    def test_coupling_values(self):
        n, sig = 5, 0.7
        cov = build_synergistic_cov(n, 1, sig)
        rho = 1.0 / np.sqrt(1 + sig**2)
        assert cov.matrix[0, 1] == pytest.approx(1 / np.sqrt(n - 1))
        for i in range(2, n):
            assert cov.matrix[1, i] == pytest.approx(rho / np.sqrt(n - 1))
        assert cov.matrix[0, 2] == 0.0

    def test_needs_three_vars(self):
        with pytest.raises(ValueError):
            build_synergistic_cov(2, 1, 1.0)


class TestMixed:
    def test_single_block_matches_builder(self):
        spec = SystemSpec("redundant", 3, 2, 1.5)
        np.testing.assert_array_equal(
            build_mixed_cov([spec]).matrix, build_redundant_cov(3, 2, 1.5).matrix
        )

    def test_cross_block_zeros(self):
        cov = build_mixed_cov(
            [SystemSpec("redundant", 3, 1, 1.0), SystemSpec("synergistic", 3, 1, 0.5)]
        )
        np.testing.assert_array_equal(cov.matrix[:3, 3:], 0.0)
        assert cov.partition.dims == (1,) * 6

    def test_oracle_additivity(self):
        blocks = [SystemSpec("redundant", 3, 1, 1.0), SystemSpec("synergistic", 3, 1, 0.5)]
        total = oracle.measures(build_mixed_cov(blocks))
        parts = [oracle.measures(build_cov(b)) for b in blocks]
        assert total.o_info == pytest.approx(sum(p.o_info for p in parts), abs=1e-10)
        assert total.tc == pytest.approx(sum(p.tc for p in parts), abs=1e-10)
        assert total.dtc == pytest.approx(sum(p.dtc for p in parts), abs=1e-10)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            build_mixed_cov([])
        with pytest.raises(ValueError):
            SystemSpec("mixed")


class TestSample:
    def test_empirical_covariance(self):
        part = VariablePartition((1, 1, 1))
        from hoinfo.systems import CovarianceMatrix

        cov = CovarianceMatrix(np.eye(3), part)
        ds = sample(cov, 100_000, RngStream(1))
        emp = ds.samples.T @ ds.samples / ds.n_samples
        assert np.max(np.abs(emp - np.eye(3))) < 0.02

    def test_deterministic(self):
        cov = build_redundant_cov(3, 1, 1.0)
        a = sample(cov, 100, RngStream(5))
        b = sample(cov, 100, RngStream(5))
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_empty_dataset_valid(self):
        cov = build_redundant_cov(2, 1, 1.0)
        ds = sample(cov, 0, RngStream(0))
        assert ds.samples.shape == (0, 2)

    def test_dataset_validation(self):
        part = VariablePartition((1, 1))
        with pytest.raises(ValueError, match="finite"):
            Dataset(np.array([[1.0, np.nan]]), part)
        with pytest.raises(ValueError, match="match"):
            Dataset(np.ones((3, 3)), part)


class TestTransforms:
    def test_half_cube_values(self):
        np.testing.assert_allclose(half_cube(np.array([4.0, 0.0, -1.0])), [8.0, 0.0, -1.0])

    def test_cdf_values(self):
        assert gauss_cdf(0.0) == pytest.approx(0.5)

    @settings(deadline=None, max_examples=30)
    @given(st.lists(st.integers(-600_000, 600_000), min_size=2, max_size=30, unique=True))
    def test_strictly_monotone(self, steps):
        # within +-6 sigma, where the float64 normal CDF is still resolvable
        grid = np.sort(np.asarray(steps, dtype=np.float64)) * 1e-5
        assert np.all(np.diff(half_cube(grid)) > 0)
        assert np.all(np.diff(gauss_cdf(grid)) > 0)

    def test_transform_keeps_partition_and_truth(self):
        spec = SystemSpec("redundant", 3, 1, 1.0, transform="cdf")
        truth = oracle.measures(build_cov(spec))
        ds = sample_system(spec, 50, RngStream(3))
        assert ds.partition == build_cov(spec).partition
        assert np.all((ds.samples > 0) & (ds.samples < 1))
        # ground truth for the transformed system is the Gaussian value
        assert truth.o_info == pytest.approx(0.0849495183976976)

    def test_unknown_transform_rejected(self):
        ds = sample(build_redundant_cov(2, 1, 1.0), 5, RngStream(0))
        with pytest.raises(ValueError):
            apply_transform(ds, "log")


class TestInvariants:
    @settings(deadline=None, max_examples=25)
    @given(
        kind=st.sampled_from(["redundant", "synergistic"]),
        n_vars=st.integers(3, 6),
        dim=st.integers(1, 3),
        sigma=st.floats(0.1, 5.0),
    )
    def test_constructed_covariances_symmetric_pd(self, kind, n_vars, dim, sigma):
        cov = build_cov(SystemSpec(kind, n_vars, dim, sigma))
        assert np.max(np.abs(cov.matrix - cov.matrix.T)) <= 1e-12
        assert np.linalg.eigvalsh(cov.matrix)[0] > 0

    def test_redundant_o_info_decreases_with_sigma(self):
        grid = default_sigma_grid()
        assert len(grid) == 8
        omegas = [
            oracle.measures(build_redundant_cov(4, 1, float(s))).o_info for s in grid
        ]
        assert all(a > b for a, b in zip(omegas, omegas[1:]))
