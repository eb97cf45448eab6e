import math

import numpy as np
import pytest
from scipy import integrate

from errors import DomainError
from process.discount import DiscountSpec, delta_tilde, delta_tilde_nodes
from process.gauss_sim import Grid, RngStream, factorize
from process.kernels import CovKernel
from process.riskproc import (
    NO_RUIN,
    RiskPath,
    RiskPathBuilder,
    build_risk_path,
    check_horizon,
    detect_parisian,
    excursions_below_zero,
    scan_batch,
    scan_reserve,
)


class TestDiscount:
    def test_linear_closed_form(self):
        assert delta_tilde(DiscountSpec.linear(1.0), 1.0) == pytest.approx(1.0 - math.exp(-1.0))

    def test_constant_zero_is_identity(self):
        assert delta_tilde(DiscountSpec.constant(0.0), 2.5) == 2.5

    def test_table_matches_linear(self):
        table = DiscountSpec.table([0.0, 10.0], [0.0, 10.0])
        assert delta_tilde(table, 1.5) == pytest.approx(delta_tilde(DiscountSpec.linear(1.0), 1.5),
                                                        rel=1e-9)

    def test_table_nodes_accumulate(self):
        table = DiscountSpec.table([0.0, 1.0, 2.0], [0.0, 0.5, 0.5])
        times = np.linspace(0.0, 3.0, 13)
        nodes = delta_tilde_nodes(table, times)
        direct = [delta_tilde(table, float(t)) for t in times]
        np.testing.assert_allclose(nodes, direct, rtol=1e-9, atol=1e-12)

    def test_factor_scalar(self):
        assert DiscountSpec.linear(2.0).factor(0.5) == pytest.approx(math.exp(-1.0))

    def test_negative_time(self):
        with pytest.raises(DomainError):
            delta_tilde(DiscountSpec.linear(), -1.0)

    def test_from_dict_rejects_unknown(self):
        with pytest.raises(DomainError, match="unknown fields"):
            DiscountSpec.from_dict({"kind": "linear", "rate": 1.0, "d": 2.0})


class TestReservePath:
    def test_zero_loss_gives_premium(self):
        grid = Grid(0.0, 2.0, 9)
        path = build_risk_path(np.zeros(9), grid, DiscountSpec.constant(0.0), u=1.0, c=0.5)
        np.testing.assert_allclose(path.r, 1.0 + 0.5 * grid.nodes)

    def test_trapezoid_exact_for_linear_integrand(self):
        grid = Grid(0.0, 1.0, 11)
        builder = RiskPathBuilder(grid, DiscountSpec.constant(0.0), c=0.0)
        y = builder.integrated_loss(grid.nodes)
        np.testing.assert_allclose(y, 0.5 * grid.nodes**2, atol=1e-14)

    def test_positive_start_adds_rectangle(self):
        grid = Grid(0.25, 1.0, 4)
        builder = RiskPathBuilder(grid, DiscountSpec.constant(0.0), c=0.0)
        y = builder.integrated_loss(np.ones(4))
        np.testing.assert_allclose(y, grid.nodes)

    def test_trapezoid_weights_reproduce_loss_at_horizon(self):
        grid = Grid(0.0, 1.5, 31)
        builder = RiskPathBuilder(grid, DiscountSpec.linear(1.0), c=1.0)
        z = RngStream(7).standard_normal(31)
        a = builder.trapezoid_weights(1.0)
        k = 20  # node at t = 1.0
        assert a @ z == pytest.approx(builder.integrated_loss(z)[k], rel=1e-12, abs=1e-14)
        assert np.all(a[k + 1:] == 0.0)

    def test_length_mismatch(self):
        with pytest.raises(DomainError, match="does not match"):
            build_risk_path(np.zeros(5), Grid(0.0, 1.0, 6), DiscountSpec.linear(), 1.0, 1.0)


class TestExcursions:
    times = np.linspace(0.0, 4.0, 5)

    def test_interpolated_entry_and_exit(self):
        r = np.array([1.0, -1.0, -1.0, 1.0, 1.0])
        first, start, end = excursions_below_zero(self.times, r)
        assert list(first) == [1]
        assert start[0] == pytest.approx(0.5)
        assert end[0] == pytest.approx(2.5)

    def test_censored_at_grid_end(self):
        r = np.array([1.0, 1.0, 1.0, -1.0, -1.0])
        _, start, end = excursions_below_zero(self.times, r)
        assert start[0] == pytest.approx(2.5)
        assert end[0] == 4.0

    def test_zero_counts_as_not_ruined(self):
        assert scan_reserve(self.times, np.array([1.0, 0.0, 1.0, 0.0, 1.0]), 4.0, 0.0) == NO_RUIN

    def test_parisian_window(self):
        r = np.array([1.0, -1.0, -1.0, 1.0, 1.0])
        verdict = scan_reserve(self.times, r, 1.0, 1.5)
        assert verdict.classical_ruin and verdict.parisian_ruin
        assert verdict.tau == pytest.approx(2.0)
        assert verdict.first_hit == pytest.approx(0.5)

        too_long = scan_reserve(self.times, r, 1.0, 2.5)
        assert too_long.classical_ruin and not too_long.parisian_ruin
        assert too_long.tau is None

    def test_excursion_entered_after_horizon_is_ignored(self):
        r = np.array([1.0, -1.0, -1.0, 1.0, 1.0])
        assert scan_reserve(self.times, r, 0.4, 0.0) == NO_RUIN

    def test_second_excursion_can_qualify(self):
        r = np.array([1.0, -1.0, 1.0, -1.0, -1.0])
        verdict = scan_reserve(self.times, r, 3.0, 1.2)
        assert verdict.parisian_ruin
        assert verdict.tau == pytest.approx(2.5 + 1.2)
        assert verdict.first_hit == pytest.approx(0.5)

    def test_horizon_beyond_grid(self):
        with pytest.raises(DomainError, match="exceeds the grid end"):
            check_horizon(self.times, 3.5, 1.0)


class TestScanBatch:
    def test_matches_single_scans_and_parisian_implies_classical(self):
        grid = Grid(0.0, 1.2, 97)
        fk = factorize(CovKernel.fbm(0.5), grid)
        builder = RiskPathBuilder(grid, DiscountSpec.linear(1.0), c=0.1)
        xi = np.stack([RngStream(3, i).standard_normal(grid.n) for i in range(200)])
        r = builder.reserve(fk.transform(xi), 0.05)

        out = scan_batch(grid.nodes, r, 1.0, 0.1)
        assert not np.any(out["parisian"] & ~out["classical"])
        assert out["classical"].any()
        for i in range(0, 200, 17):
            single = scan_reserve(grid.nodes, r[i], 1.0, 0.1)
            assert single.classical_ruin == out["classical"][i]
            assert single.parisian_ruin == out["parisian"][i]
            if single.parisian_ruin:
                assert single.tau == out["tau"][i]
                assert single.tau <= 1.0 + 0.1 + 1e-12

    def test_detect_parisian_needs_grid_to_reach_horizon(self):
        grid = Grid(0.0, 1.0, 11)
        path = build_risk_path(np.zeros(11), grid, DiscountSpec.linear(), 1.0, 1.0)
        assert detect_parisian(path, 0.5, 0.5) == NO_RUIN
        assert detect_parisian(path, 0.8, 0.5) == NO_RUIN
        with pytest.raises(DomainError, match="exceeds the grid end"):
            detect_parisian(path, 1.5, 0.1)


def _path_from_reserve(grid, r):
    r = np.asarray(r, dtype=float)
    zeros = np.zeros(grid.n)
    return RiskPath(grid=grid, z=zeros, discounted_premium=zeros, y=1.0 - r, r=r, u=1.0, c=0.0)


class TestDetectParisian:
    def test_excursion_closing_inside_grid(self):
        path = _path_from_reserve(Grid(0.0, 3.0, 4), [1.0, -1.0, -1.0, 1.0])
        verdict = detect_parisian(path, 3.0, 0.5)
        assert verdict.classical_ruin and verdict.parisian_ruin
        assert verdict.tau == pytest.approx(1.0)
        assert verdict.first_hit == pytest.approx(0.5)

    def test_open_excursion_short_of_window_is_undecided(self):
        path = _path_from_reserve(Grid(0.0, 3.0, 4), [1.0, 1.0, 1.0, -1.0])
        with pytest.raises(DomainError, match="still open"):
            detect_parisian(path, 3.0, 1.0)

    def test_open_excursion_past_window_is_decided(self):
        path = _path_from_reserve(Grid(0.0, 3.0, 4), [1.0, -1.0, -1.0, -1.0])
        verdict = detect_parisian(path, 3.0, 1.0)
        assert verdict.parisian_ruin
        assert verdict.tau == pytest.approx(1.5)

    def test_open_excursion_entered_after_horizon_is_ignored(self):
        path = _path_from_reserve(Grid(0.0, 3.0, 4), [1.0, 1.0, 1.0, -1.0])
        assert detect_parisian(path, 1.0, 5.0) == NO_RUIN

    def test_simulation_scan_stays_strict(self):
        r = np.array([[1.0, -1.0, -1.0, 1.0]])
        with pytest.raises(DomainError, match="exceeds the grid end"):
            scan_batch(np.linspace(0.0, 3.0, 4), r, 3.0, 0.5)


class TestPathwiseProperties:
    def test_raising_u_never_creates_ruin(self):
        grid = Grid(0.0, 1.2, 121)
        fk = factorize(CovKernel.fbm(0.7), grid)
        builder = RiskPathBuilder(grid, DiscountSpec.linear(1.0), c=0.2)
        xi = np.stack([RngStream(17, i).standard_normal(grid.n) for i in range(300)])
        z = fk.transform(xi)
        previous = None
        for u in (0.0, 0.05, 0.1, 0.2, 0.4):
            out = scan_batch(grid.nodes, builder.reserve(z, u), 1.0, 0.05)
            if previous is not None:
                assert not np.any(out["classical"] & ~previous["classical"])
                assert not np.any(out["parisian"] & ~previous["parisian"])
            previous = out

    def test_tau_converges_under_refinement(self):
        # z(t) = 2t, no discount, c = 0: R(t) = u − t², first zero at √u
        u, window = 0.3, 0.1
        exact = math.sqrt(u) + window
        taus = []
        for n in (41, 81, 161):
            grid = Grid(0.0, 1.2, n)
            path = build_risk_path(2.0 * grid.nodes, grid, DiscountSpec.constant(0.0), u, 0.0)
            verdict = detect_parisian(path, 1.0, window)
            assert verdict.parisian_ruin
            assert abs(verdict.tau - exact) <= grid.spacing
            taus.append(verdict.tau)
        assert abs(taus[2] - taus[1]) <= abs(taus[1] - taus[0]) + 1e-12

    def test_trapezoid_loss_matches_quadrature(self):
        coeffs = RngStream(29).standard_normal(3)

        def z_of(t):
            return sum(a * np.sin((k + 1) * np.pi * t) for k, a in enumerate(coeffs))

        grid = Grid(0.0, 1.0, 201)
        path = build_risk_path(z_of(grid.nodes), grid, DiscountSpec.linear(1.0), u=1.0, c=1.0)
        for k in (50, 100, 200):
            t = grid.nodes[k]
            expected, _ = integrate.quad(lambda s: math.exp(-s) * z_of(s), 0.0, t,
                                         epsabs=1e-13, epsrel=1e-12)
            assert path.y[k] == pytest.approx(expected, abs=2e-3)
            assert path.r[k] == pytest.approx(1.0 + (1.0 - math.exp(-t)) - expected, abs=2e-3)
