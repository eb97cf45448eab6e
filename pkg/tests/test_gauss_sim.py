import numpy as np
import pytest

from errors import DomainError, FactorizationError
from process.gauss_sim import (
    Grid,
    RngStream,
    conditional_gaussian,
    factorize,
    factorize_matrix,
    sample_path,
    sample_path_shifted,
)
from process.kernels import CovKernel, cov, cov_matrix


class TestGrid:
    def test_nodes_and_spacing(self):
        grid = Grid(0.0, 1.0, 5)
        np.testing.assert_allclose(grid.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
        assert grid.spacing == pytest.approx(0.25)

    def test_scaled_bm_grid_starts_positive(self):
        grid = Grid.for_kernel(CovKernel.scaled_bm(), 2.0, 64)
        assert grid.t_start == pytest.approx(2.0 / 64)
        assert grid.nodes[-1] == 2.0

    def test_scaled_bm_rejects_zero_start(self):
        with pytest.raises(DomainError, match="positive time"):
            factorize(CovKernel.scaled_bm(), Grid(0.0, 1.0, 8))

    @pytest.mark.parametrize("args", [(0.0, 1.0, 1), (1.0, 1.0, 4), (-0.5, 1.0, 4)])
    def test_invalid(self, args):
        with pytest.raises(DomainError):
            Grid(*args)


class TestRngStream:
    def test_same_key_same_draws(self):
        a = RngStream(42, 7).standard_normal(100)
        b = RngStream(42, 7).standard_normal(100)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = RngStream(42, 0).standard_normal(10)
        b = RngStream(42, 1).standard_normal(10)
        c = RngStream(43, 0).standard_normal(10)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_uniforms_in_open_interval(self):
        u = RngStream(1).uniform(100_000)
        assert u.min() > 0.0 and u.max() < 1.0

    def test_normal_moments(self):
        n = 200_000
        x = RngStream(2024).standard_normal(n)
        assert abs(x.mean()) < 4.0 / np.sqrt(n)
        assert abs(x.var() - 1.0) < 4.0 * np.sqrt(2.0 / n)

    def test_draws_continue_within_a_stream(self):
        stream = RngStream(5, 3)
        first = stream.standard_normal(4)
        second = stream.standard_normal(4)
        assert np.array_equal(np.concatenate([first, second]), RngStream(5, 3).standard_normal(8))

    def test_substreams_are_distinct(self):
        base = RngStream(9)
        assert not np.array_equal(base.substream(0).uniform(4), base.substream(1).uniform(4))


class TestFactorize:
    def test_reproduces_covariance(self):
        grid = Grid(0.0, 1.0, 65)
        kernel = CovKernel.fbm(0.3)
        fk = factorize(kernel, grid)
        np.testing.assert_allclose(fk.covariance(), cov_matrix(kernel, grid.nodes), atol=1e-12)
        assert fk.jitter_used == 0.0

    def test_zero_variance_node_is_pinned(self):
        fk = factorize(CovKernel.bm(), Grid(0.0, 1.0, 16))
        assert not fk.active_mask[0]
        assert np.all(fk.lower[0] == 0.0)
        path = sample_path(fk, RngStream(1))
        assert path[0] == 0.0

    def test_indefinite_matrix_fails(self):
        with pytest.raises(FactorizationError, match="not positive definite"):
            factorize_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]), [0.0, 1.0], label="bad")

    def test_slepian_factorizes(self):
        fk = factorize(CovKernel.slepian(), Grid(0.0, 3.0, 200))
        np.testing.assert_allclose(fk.covariance(), cov_matrix(CovKernel.slepian(), fk.times),
                                   atol=1e-6)

    def test_node_limit(self):
        with pytest.raises(DomainError, match="factorization limit"):
            factorize(CovKernel.bm(), Grid(0.0, 1.0, 8193))

    def test_empirical_variance(self):
        grid = Grid(0.0, 1.0, 33)
        fk = factorize(CovKernel.fbm(0.7), grid)
        reps = 20_000
        xi = np.stack([RngStream(11, i).standard_normal(grid.n) for i in range(reps)])
        paths = fk.transform(xi)
        var_end = paths[:, -1].var()
        # Var of a sample variance of N(0,1) is about 2/reps
        assert abs(var_end - 1.0) < 4.0 * np.sqrt(2.0 / reps)


class TestShiftedSampling:
    def test_zero_shift_is_plain_sampling(self):
        fk = factorize(CovKernel.ou(), Grid(0.0, 1.0, 20))
        path, log_ratio = sample_path_shifted(fk, RngStream(4), np.zeros(20))
        assert log_ratio == 0.0
        assert np.array_equal(path, sample_path(fk, RngStream(4)))

    def test_shift_moves_the_mean(self):
        grid = Grid(0.0, 1.0, 10)
        fk = factorize(CovKernel.ou(), grid)
        mean = fk.covariance() @ np.full(10, 0.3)
        v = fk.whiten(mean)
        np.testing.assert_allclose(fk.transform(v), mean, atol=1e-12)

    def test_mean_on_pinned_node_rejected(self):
        fk = factorize(CovKernel.bm(), Grid(0.0, 1.0, 6))
        with pytest.raises(DomainError, match="zero-variance"):
            fk.whiten(np.ones(6))


class TestConditionalGaussian:
    def test_independent_inputs(self):
        mean, var = conditional_gaussian(1.0, np.eye(2), np.array([0.5, 0.0]), 2.0, -3.0)
        assert mean == pytest.approx(1.0)
        assert var == pytest.approx(0.75)

    def test_correlated_inputs(self):
        q = np.array([[2.0, 1.0], [1.0, 2.0]])
        b = np.array([1.0, 1.0])
        mean, var = conditional_gaussian(2.0, q, b, 1.0, 1.0)
        # weights q^{-1} b = (1/3, 1/3)
        assert mean == pytest.approx(2.0 / 3.0)
        assert var == pytest.approx(2.0 - 2.0 / 3.0)

    def test_singular(self):
        with pytest.raises(DomainError, match="singular"):
            conditional_gaussian(1.0, np.ones((2, 2)), np.array([1.0, 1.0]), 0.0, 0.0)


class TestSampledLaw:
    reps = 20_000

    def _paths(self, kernel, grid, seed):
        fk = factorize(kernel, grid)
        xi = np.stack([RngStream(seed, i).standard_normal(grid.n) for i in range(self.reps)])
        return fk.transform(xi)

    def test_pair_covariance_matches_kernel(self):
        grid = Grid(0.0, 1.0, 21)
        kernel = CovKernel.fbm(0.75)
        paths = self._paths(kernel, grid, 31)
        a, b = paths[:, 10], paths[:, 20]  # t = 0.5 and t = 1.0
        target = cov(kernel, 0.5, 1.0)
        var_a, var_b = cov(kernel, 0.5, 0.5), cov(kernel, 1.0, 1.0)
        se = np.sqrt((var_a * var_b + target**2) / self.reps)
        assert abs(np.mean(a * b) - target) < 4.0 * se
        assert abs(np.mean(a * a) - var_a) < 4.0 * var_a * np.sqrt(2.0 / self.reps)

    def test_node_means_vanish(self):
        grid = Grid(0.0, 1.0, 21)
        kernel = CovKernel.fbm(0.75)
        paths = self._paths(kernel, grid, 32)
        sd = np.sqrt(np.maximum(np.diag(cov_matrix(kernel, grid.nodes)), 1e-300))
        means = paths.mean(axis=0)
        assert means[0] == 0.0
        assert np.all(np.abs(means[1:]) < 4.0 * sd[1:] / np.sqrt(self.reps))

    def test_distinct_streams_are_uncorrelated(self):
        n = 20_000
        for first, second in ((0, 1), (1, 2), (5, 1000)):
            x = RngStream(8, first).standard_normal(n)
            y = RngStream(8, second).standard_normal(n)
            assert abs(np.corrcoef(x, y)[0, 1]) < 4.0 / np.sqrt(n)
        x = RngStream(8).substream(3).standard_normal(n)
        y = RngStream(8).substream(4).standard_normal(n)
        assert abs(np.corrcoef(x, y)[0, 1]) < 4.0 / np.sqrt(n)


class TestConditionalGaussianLaw:
    def test_matches_binned_samples(self):
        var_z = 1.0
        q = np.array([[1.0, 0.5], [0.5, 1.0]])
        b = np.array([0.6, 0.3])
        x, y = 0.5, 0.2
        full = np.array([[var_z, *b], [b[0], *q[0]], [b[1], *q[1]]])
        lower = np.linalg.cholesky(full)
        n = 400_000
        draws = RngStream(41).standard_normal(3 * n).reshape(n, 3) @ lower.T
        near = (np.abs(draws[:, 1] - x) < 0.05) & (np.abs(draws[:, 2] - y) < 0.05)
        z = draws[near, 0]
        assert z.size > 300

        mean, var = conditional_gaussian(var_z, q, b, x, y)
        assert mean == pytest.approx(0.3)
        assert var == pytest.approx(0.64)
        assert abs(z.mean() - mean) < 4.0 * np.sqrt(var / z.size) + 0.01
        assert abs(z.var() - var) < 4.0 * var * np.sqrt(2.0 / z.size) + 0.01

    def test_variance_bounds(self):
        rng = RngStream(42)
        for _ in range(50):
            m = rng.standard_normal(9).reshape(3, 3)
            full = m @ m.T + 0.1 * np.eye(3)
            _, var = conditional_gaussian(full[0, 0], full[1:, 1:], full[0, 1:],
                                          *rng.standard_normal(2))
            assert 0.0 <= var <= full[0, 0]
