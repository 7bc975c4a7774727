import math

import numpy as np
import pytest
from scipy.integrate import quad

from dplr.bounds import (
    PolylogFactor,
    classical_locations,
    covariance_utility_bound,
    gap_bound_rhs,
    gap_threshold,
    rigidity_envelope,
    semicircle_density,
    semicircle_tail,
    spectral_sup_tail,
    spectral_sup_threshold,
    subspace_utility_bound,
    weaker_metric_bound,
)
from dplr.errors import DegenerateGap, InvalidInput, InvalidRank, LargeSpectrumWarning
from dplr.randmat import RngStream


class TestPolylogFactor:
    def test_guard_below_four(self):
        for d in (1, 2, 3):
            assert PolylogFactor(d).value == 1.0

    def test_formula(self):
        d = 64
        expected = math.log(d) ** math.log(math.log(d))
        assert PolylogFactor(d).value == pytest.approx(expected, rel=1e-12)

    def test_monotone_for_large_d(self):
        values = [PolylogFactor(d).value for d in range(16, 200, 8)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_exponent_constant(self):
        assert PolylogFactor(100, L=2.0).value == pytest.approx(
            PolylogFactor(100, L=1.0).value ** 2, rel=1e-9
        )

    def test_at_least_one(self):
        assert all(PolylogFactor(d).value >= 1.0 for d in range(1, 100))


class TestSemicircle:
    def test_center_value(self):
        assert semicircle_density(0.0) == pytest.approx(1.0 / math.pi, abs=1e-12)

    def test_support_endpoints(self):
        assert semicircle_density(2.0) == 0.0
        assert semicircle_density(-2.0) == 0.0
        assert semicircle_density(3.0) == 0.0

    def test_unit_mass_by_quadrature(self):
        # substitute x = 2 sin(theta) so a 1e4-point rule resolves the edges
        theta = np.linspace(-math.pi / 2, math.pi / 2, 10_000)
        integrand = semicircle_density(2.0 * np.sin(theta)) * 2.0 * np.cos(theta)
        assert np.trapezoid(integrand, theta) == pytest.approx(1.0, abs=1e-8)

    def test_tail_closed_form_vs_quadrature(self):
        for x in (-1.5, 0.0, 0.7, 1.9):
            val, _ = quad(semicircle_density, x, 2.0)
            assert semicircle_tail(x) == pytest.approx(val, abs=1e-10)


class TestClassicalLocations:
    def test_top_location_exact(self):
        for d in (4, 16, 50):
            cs = classical_locations(d)
            assert cs.omegas[0] == 2.0 * math.sqrt(d)

    def test_middle_location_zero_for_even_d(self):
        cs = classical_locations(16)
        assert abs(cs.omegas[8]) <= 1e-9  # i = d/2 + 1

    def test_final_entry_convention(self):
        cs = classical_locations(10)
        assert cs.omegas[-1] == -2.0 * math.sqrt(10)

    def test_strictly_decreasing_and_symmetric(self):
        d = 32
        cs = classical_locations(d)
        assert np.all(np.diff(cs.omegas) < 0.0)
        # omega_i = -omega_{d+2-i}
        assert np.allclose(cs.omegas, -cs.omegas[::-1], atol=1e-9 * math.sqrt(d))

    def test_residuals_tiny(self):
        cs = classical_locations(64)
        assert np.max(cs.residuals()) <= 1e-10

    def test_quadrature_oracle(self):
        d = 12
        cs = classical_locations(d)
        for i in (2, 5, 9):
            val, _ = quad(semicircle_density, cs.omegas[i - 1] / math.sqrt(d), 2.0)
            assert d * val == pytest.approx(i - 1, abs=1e-8)

    def test_gap_sandwich(self):
        for d in (16, 64):
            cs = classical_locations(d)
            gaps = cs.gaps()
            i = np.arange(1, d + 1, dtype=np.float64)
            local = np.minimum(i, d - i + 1) ** (-1.0 / 3.0)
            lo = d ** (-1.0 / 6.0) * local
            hi = 2.0 * math.pi * d ** (-1.0 / 6.0) * local
            assert np.all(gaps >= lo) and np.all(gaps <= hi)


class TestRigidityEnvelope:
    def test_symmetry(self):
        env = rigidity_envelope(20)
        assert np.allclose(env, env[::-1], rtol=1e-12)

    def test_edge_to_bulk_ratio(self):
        d = 64
        env = rigidity_envelope(d)
        assert env[0] / env[d // 2 - 1] == pytest.approx((d / 2) ** (1.0 / 3.0), rel=1e-9)

    def test_positive(self):
        assert np.all(rigidity_envelope(17) > 0.0)

    def test_small_d_rejected(self):
        with pytest.raises(InvalidInput):
            rigidity_envelope(3)


class TestCovarianceBound:
    def test_reference_value(self):
        # sqrt(2) * 10/8 with unit constant, polylog and T
        out = covariance_utility_bound([10.0, 2.0], 1, 2, 1.0, PolylogFactor(2), 1.0)
        assert out == pytest.approx(math.sqrt(2.0) * 1.25, abs=1e-9)

    def test_ratio_limit(self):
        # huge gap with sigma_k/gap -> 1 leaves sqrt(k d T) * constant
        out = covariance_utility_bound([8.0, 0.0, 0.0], 1, 3, 2.0, PolylogFactor(3), 1.5)
        assert out == pytest.approx(1.5 * math.sqrt(1 * 3) * 1.0 * math.sqrt(2.0), rel=1e-12)

    def test_T_scaling(self):
        a = covariance_utility_bound([10.0, 2.0], 1, 2, 1.0)
        b = covariance_utility_bound([10.0, 2.0], 1, 2, 2.0)
        assert b == pytest.approx(a * math.sqrt(2.0), rel=1e-12)

    def test_monotone_in_gap(self):
        prev = np.inf
        for gap in (1.0, 2.0, 4.0, 8.0):
            out = covariance_utility_bound([10.0, 10.0 - gap], 1, 2, 1.0)
            assert out <= prev
            prev = out

    def test_explicit_mode_formula(self):
        spectrum = [10.0, 2.0]
        b = PolylogFactor(2)
        out = covariance_utility_bound(spectrum, 1, 2, 1.0, b, mode="explicit")
        expected = math.sqrt(
            1e6 * b.value**2 * 1 * 2 * 1.0 * (10.0 / 8.0) ** 2 * math.log(2.0) ** 3 * math.log(11.0)
        )
        assert out == pytest.approx(expected, rel=1e-12)

    def test_degenerate_gap(self):
        with pytest.raises(DegenerateGap):
            covariance_utility_bound([5.0, 5.0], 1, 2, 1.0)

    def test_k_equals_d_uses_last_value_with_flag(self):
        from dplr.errors import DegenerateGapWarning

        with pytest.warns(DegenerateGapWarning):
            out = covariance_utility_bound([5.0, 2.0], 2, 2, 1.0)
        assert out == pytest.approx(math.sqrt(4.0) * (2.0 / 2.0), rel=1e-12)

    def test_huge_sigma1_warns(self):
        with pytest.warns(LargeSpectrumWarning):
            covariance_utility_bound([float(3) ** 51, 1.0, 0.5], 1, 3, 1.0)

    def test_bad_rank(self):
        with pytest.raises(InvalidRank):
            covariance_utility_bound([1.0, 0.5], 3, 2, 1.0)


class TestSubspaceBound:
    def test_two_by_two(self):
        assert subspace_utility_bound([2.0, 0.0], 1, 1.0) == pytest.approx(0.5, abs=1e-12)

    def test_three_by_three(self):
        out = subspace_utility_bound([4.0, 2.0, 0.0], 1, 1.0)
        assert out == pytest.approx(math.sqrt(1.0 / 4.0 + 1.0 / 16.0), abs=1e-9)

    def test_uniform_gap_comparison(self):
        # term-wise 1/(sigma_i - sigma_j)^2 <= 1/g^2 across the cut
        g, d, k, T = 1.5, 9, 3, 2.0
        spectrum = g * np.arange(d - 1, -1, -1.0)
        out = subspace_utility_bound(spectrum, k, T)
        assert out <= math.sqrt(k) * math.sqrt(d) / g * math.sqrt(T) + 1e-9

    def test_degenerate_cut(self):
        with pytest.raises(DegenerateGap):
            subspace_utility_bound([2.0, 2.0], 1, 1.0)

    def test_monotone_under_uniform_gap_inflation(self):
        spectrum = np.array([9.0, 6.0, 3.0, 1.0])
        prev = np.inf
        for lam in (1.0, 1.5, 2.0, 4.0):
            out = subspace_utility_bound(lam * spectrum, 2, 1.0)
            assert out <= prev + 1e-15
            prev = out

    def test_dominance_under_gap_assumption(self):
        # with gap >= 4 sqrt(Td), the exact sum never beats sqrt(kd)/gap * sqrt(T)
        rng = RngStream(77, 0)
        T = 1.0
        for _ in range(200):
            d = 4 + int(rng.uniforms(()) * 13)
            k = 1 + int(rng.uniforms(()) * (d - 1))
            base = np.sort(rng.uniforms(d))[::-1] * 10.0
            gap_needed = 4.0 * math.sqrt(T * d)
            base[:k] += gap_needed + base[k] - base[k - 1]
            out = subspace_utility_bound(base, k, T)
            gap = base[k - 1] - base[k]
            assert out <= math.sqrt(k) * math.sqrt(d) / gap * math.sqrt(T) * (1.0 + 1e-9)


class TestGapBound:
    def test_beta2(self):
        assert gap_bound_rhs(0.5, 2, 8) == pytest.approx(0.125, abs=1e-12)

    def test_beta1(self):
        assert gap_bound_rhs(0.5, 1, 8) == pytest.approx(0.25, abs=1e-12)

    def test_unit_boundary(self):
        assert gap_bound_rhs(1.0, 2, 8) == pytest.approx(1.0, abs=1e-300)

    def test_dimension_term(self):
        # representable only at d=2; underflows to zero for d >= 3
        assert gap_bound_rhs(0.5, 2, 2) == pytest.approx(0.125 + 2.0 ** (-1000), abs=0)
        assert gap_bound_rhs(0.5, 2, 3) == 0.125

    def test_threshold(self):
        d = 16
        assert gap_threshold(1.0, d) == pytest.approx(1.0 / (PolylogFactor(d).value * 4.0), rel=1e-12)

    def test_invalid(self):
        with pytest.raises(InvalidInput):
            gap_bound_rhs(0.0, 2, 4)
        with pytest.raises(InvalidInput):
            gap_bound_rhs(0.5, 3, 4)


class TestSpectralSup:
    def test_probability_cap(self):
        assert spectral_sup_tail(1e-12) == 1.0
        assert spectral_sup_tail(0.0) == 1.0

    def test_alpha_four(self):
        assert spectral_sup_tail(4.0) == pytest.approx(2.0 * math.sqrt(math.pi) * math.exp(-8.0), rel=1e-12)

    def test_threshold(self):
        assert spectral_sup_threshold(4.0, 9, 1.0) == pytest.approx(8.0, abs=1e-12)

    def test_threshold_validation(self):
        with pytest.raises(InvalidInput):
            spectral_sup_threshold(-1.0, 4, 1.0)


class TestWeakerMetricBound:
    def test_full_rank_order_d(self):
        d, T = 6, 2.0
        out = weaker_metric_bound(d, d, T, PolylogFactor(d))
        assert out == pytest.approx(d * math.sqrt(T) * PolylogFactor(d).value, rel=1e-12)

    def test_zero_noise(self):
        assert weaker_metric_bound(3, 10, 0.0) == 0.0

    def test_quadrupling_k_doubles(self):
        a = weaker_metric_bound(2, 16, 1.0)
        b = weaker_metric_bound(8, 16, 1.0)
        assert b == pytest.approx(2.0 * a, rel=1e-12)
