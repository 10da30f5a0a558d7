"""Amplification-factor mathematics: frozen examples and invariants."""

import math

import numpy as np
import pytest

from srj.core import (
    KappaRange,
    PoleError,
    WeightSchedule,
    effective_n,
    gamma,
    interior_extrema,
    kappa_min,
    log_gamma,
    log_gamma_slope,
    performance_index,
)


def _renorm(betas):
    b = np.asarray(betas, dtype=float)
    return b / b.sum()


@pytest.fixture
def jacobi():
    return WeightSchedule(omegas=[1.0], betas=[1.0], n=100)


@pytest.fixture
def p2_n100():
    # two-level schedule optimized for N=100, published to 6 digits;
    # fractions renormalized so they sum to 1 exactly
    return WeightSchedule(
        omegas=[321.074, 0.968096],
        betas=_renorm([0.00993673, 0.990063]),
        n=100,
    )


@pytest.fixture
def p6_n100():
    return WeightSchedule(
        omegas=[3177.91, 734.924, 110.636, 15.7187, 2.41695, 0.614642],
        betas=_renorm(
            [0.00367219, 0.00906128, 0.0276578, 0.0863039, 0.261008, 0.612297]
        ),
        n=100,
    )


class TestWeightSchedule:
    def test_p1_jacobi_valid(self, jacobi):
        assert jacobi.p == 1
        assert jacobi.rho == 1.0

    def test_rho_computed(self, p2_n100):
        assert p2_n100.rho == pytest.approx(
            np.dot(p2_n100.omegas, p2_n100.betas), rel=1e-15
        )

    def test_rho_mismatch_rejected(self):
        with pytest.raises(ValueError, match="rho"):
            WeightSchedule(
                omegas=[321.074, 0.968096],
                betas=_renorm([0.00993673, 0.990063]),
                n=100,
                rho=5.0,
            )

    def test_nondecreasing_omegas_rejected(self):
        with pytest.raises(ValueError, match="decreasing"):
            WeightSchedule(omegas=[0.5, 0.9], betas=[0.5, 0.5], n=100)

    def test_omega_last_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="omega_P"):
            WeightSchedule(omegas=[3.0, 1.5], betas=[0.5, 0.5], n=100)

    def test_omega_first_not_overrelaxed_rejected(self):
        with pytest.raises(ValueError, match="omega_1"):
            WeightSchedule(omegas=[0.9, 0.5], betas=[0.5, 0.5], n=100)

    def test_beta_sum_gate(self):
        with pytest.raises(ValueError, match="sum to 1"):
            WeightSchedule(omegas=[2.0, 0.5], betas=[0.5, 0.499999], n=100)

    def test_arrays_read_only(self, p2_n100):
        with pytest.raises(ValueError):
            p2_n100.omegas[0] = 7.0

    def test_kappa_range_validation(self):
        KappaRange(1e-4)
        with pytest.raises(ValueError):
            KappaRange(-1.0)
        with pytest.raises(ValueError):
            KappaRange(0.1, kappa_max=3.0)


class TestGamma:
    def test_identity_at_zero(self, jacobi):
        assert gamma(jacobi, 0.0) == 1.0

    def test_vanishing_factor(self, jacobi):
        assert gamma(jacobi, 1.0) == 0.0

    def test_equal_maxima_at_endpoints(self, p2_n100):
        km = kappa_min(100, d=2, bc="neumann")
        g_lo = gamma(p2_n100, km)
        g_hi = gamma(p2_n100, 2.0)
        assert abs(g_lo - g_hi) / g_hi < 1e-4

    def test_array_evaluation_matches_scalar(self, p2_n100):
        ks = np.linspace(kappa_min(100), 2.0, 17)
        vec = gamma(p2_n100, ks)
        assert vec.shape == ks.shape
        for k, v in zip(ks, vec):
            assert gamma(p2_n100, float(k)) == pytest.approx(v, rel=1e-14)

    def test_below_one_on_design_band(self, p2_n100, p6_n100):
        for sched in (p2_n100, p6_n100):
            ks = np.linspace(kappa_min(sched.n), 2.0, 10_000)
            assert np.all(gamma(sched, ks) < 1.0)

    def test_log_gamma_finite_and_consistent(self, p2_n100):
        k = 1.0
        assert math.exp(log_gamma(p2_n100, k)) == pytest.approx(
            gamma(p2_n100, k), rel=1e-14
        )


class TestSlope:
    def test_jacobi_at_zero(self, jacobi):
        assert log_gamma_slope(jacobi, 0.0) == 1.0

    def test_pole_raises(self, jacobi):
        with pytest.raises(PoleError):
            log_gamma_slope(jacobi, 1.0)

    def test_zero_at_bisected_extremum(self, p2_n100):
        (k_star,) = interior_extrema(p2_n100)
        assert 1.0 / p2_n100.omegas[0] < k_star < 1.0 / p2_n100.omegas[1]
        assert abs(log_gamma_slope(p2_n100, k_star)) < 1e-8

    def test_negative_at_upper_bound(self, p2_n100):
        assert log_gamma_slope(p2_n100, 2.0) < 0.0

    def test_matches_finite_difference_of_log_gamma(self, p2_n100):
        # slope = -d(log Gamma)/d(kappa) away from poles
        h = 1e-6
        for k in (0.5, 1.5, 1.9):
            fd = (log_gamma(p2_n100, k + h) - log_gamma(p2_n100, k - h)) / (2 * h)
            assert -fd == pytest.approx(log_gamma_slope(p2_n100, k), rel=1e-4)

    def test_extrema_are_stationary_points_of_gamma(self, p6_n100):
        ks = interior_extrema(p6_n100)
        assert ks.shape == (5,)
        assert np.all(np.diff(ks) > 0)
        om = p6_n100.omegas
        for i, k in enumerate(ks):
            assert 1.0 / om[i] < k < 1.0 / om[i + 1]
            assert abs(log_gamma_slope(p6_n100, k)) < 1e-8
            # each interior extremum is a local maximum of Gamma
            lg = log_gamma(p6_n100, k)
            assert lg > log_gamma(p6_n100, k * (1 - 1e-4))
            assert lg > log_gamma(p6_n100, k * (1 + 1e-4))

    def test_equal_maxima_across_all_extrema(self, p6_n100):
        km = kappa_min(p6_n100.n)
        points = np.concatenate([[km], interior_extrema(p6_n100), [2.0]])
        vals = np.array([gamma(p6_n100, k) for k in points])
        assert (vals.max() - vals.min()) / vals.max() < 1e-3


class TestPerformanceIndex:
    def test_jacobi_is_one(self, jacobi):
        assert performance_index(jacobi) == 1.0

    def test_p2_n100(self, p2_n100):
        assert performance_index(p2_n100) == pytest.approx(4.15, abs=0.005)

    def test_p6_n100(self, p6_n100):
        assert performance_index(p6_n100) == pytest.approx(23.75, abs=0.01)


class TestKappaMin:
    def test_n100_d2(self):
        assert kappa_min(100, d=2) == pytest.approx(
            math.sin(math.pi / 200) ** 2, rel=1e-15
        )
        assert kappa_min(100, d=2) == pytest.approx(2.467e-4, rel=1e-3)

    def test_n2_d2_exact_half(self):
        assert kappa_min(2, d=2) == pytest.approx(0.5, abs=1e-15)

    def test_d1_doubles(self):
        assert kappa_min(100, d=1) == pytest.approx(2 * kappa_min(100, d=2), rel=1e-15)

    def test_dirichlet_equals_effective_n_route(self):
        # direct Dirichlet value must agree with converting through the
        # equivalent 2-D grid size
        for n, d in [(64, 1), (100, 2), (48, 3)]:
            n_eff = effective_n([n] * d, d=d, bc="dirichlet")
            assert kappa_min(n, d=d, bc="dirichlet") == pytest.approx(
                math.sin(math.pi / (2 * n_eff)) ** 2, rel=1e-12
            )

    def test_validation(self):
        with pytest.raises(ValueError):
            kappa_min(1)
        with pytest.raises(ValueError):
            kappa_min(100, d=4)
        with pytest.raises(ValueError):
            kappa_min(100, bc="periodic")


class TestEffectiveN:
    def test_neumann_d2_identity(self):
        assert effective_n(100, d=2) == 100.0

    def test_neumann_d3(self):
        n_eff = effective_n([100, 100, 100], d=3)
        assert abs(n_eff - 100 * math.sqrt(3 / 2)) < 0.5
        assert n_eff == pytest.approx(122.47, abs=0.01)

    def test_dirichlet_rectangle(self):
        assert effective_n((585, 280), bc="dirichlet") == pytest.approx(
            252.56, abs=0.005
        )

    def test_neumann_uses_largest_axis(self):
        assert effective_n((585, 280), d=2) == 585.0

    def test_validation(self):
        with pytest.raises(ValueError):
            effective_n([1, 100])
