import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isi_mismatch.model import InfeasibleError, InvalidInputError
from isi_mismatch.spectra import (ar_response, exponent_symbol, freq_response, frequency_grid, guarded_log,
                                  integrand_f, integrand_g, integrand_u, integrate_periodic, periodic_mean,
                                  spectral_densities)

from conftest import SQRT_HALF, random_stable_phi


class TestFreqResponse:
    def test_single_tap(self):
        nu = np.linspace(0, 2 * np.pi, 17)
        np.testing.assert_allclose(freq_response([1.0], nu), 1.0)

    def test_two_tap_endpoints(self):
        assert freq_response([SQRT_HALF, SQRT_HALF], 0.0) == pytest.approx(math.sqrt(2))
        assert abs(freq_response([SQRT_HALF, SQRT_HALF], np.pi)) < 1e-15

    def test_matches_direct_sum(self):
        taps = [0.3, -1.2, 0.7]
        nu = 1.234
        direct = sum(t * complex(math.cos(k * nu), -math.sin(k * nu)) for k, t in enumerate(taps))
        assert freq_response(taps, nu) == pytest.approx(direct, abs=1e-14)

    def test_ar_response_has_no_lag_zero(self):
        assert ar_response([0.5], 0.0) == pytest.approx(0.5)
        assert ar_response([], 1.0) == 0

    def test_rejects_bad_taps(self):
        with pytest.raises(InvalidInputError):
            freq_response([np.nan], 0.0)


class TestSpectralDensities:
    def test_white_input(self):
        s_x, s_y = spectral_densities([1.0], 1.0, 1.0, [])
        nu = frequency_grid(64)
        np.testing.assert_allclose(s_x(nu), 1.0)
        np.testing.assert_allclose(s_y(nu), 2.0)

    def test_ar1_peak(self):
        s_x, _ = spectral_densities([1.0], 1.0, 0.75, [0.5])
        assert s_x(0.0) == pytest.approx(3.0)

    def test_output_dominates_noise(self):
        rng = np.random.default_rng(3)
        phi = random_stable_phi(rng, 3)
        _, s_y = spectral_densities([0.4, -0.9, 0.2], 0.7, 0.5, phi)
        assert np.all(s_y(frequency_grid(256)) >= 0.7)

    def test_rejects_unstable(self):
        with pytest.raises(InvalidInputError):
            spectral_densities([1.0], 1.0, 1.0, [1.2])


class TestIntegrands:
    def test_f_without_metric_term(self):
        nu = frequency_grid(32)
        bracket = np.abs(1 - 0.5 * np.exp(-1j * nu)) ** 2
        np.testing.assert_allclose(integrand_f(0.0, [1.0], [0.5], 0.75, nu), bracket / 1.5)

    def test_f_constant_case(self):
        np.testing.assert_allclose(integrand_f(1.0, [1.0], [], 1.0, frequency_grid(16)), 1.0)

    def test_f_two_tap_by_hand(self):
        # |A(0)|^2 = 2, |1 - Phi(0)|^2 = 0.25
        assert integrand_f(2.0, [SQRT_HALF, SQRT_HALF], [0.5], 0.75, 0.0) == pytest.approx(0.5 * 2 * 2 + 0.25 / 1.5)

    def test_g_memoryless(self):
        np.testing.assert_allclose(integrand_g([2.5, 7.0], [1.0], 0, frequency_grid(16)), 2.5)

    def test_g_metric_tail(self):
        nu = frequency_grid(16)
        np.testing.assert_allclose(integrand_g([3.0, 1.0], [1.0, 1.0], 0, nu), 3.0 + np.cos(nu))

    def test_g_at_pi(self):
        w = np.array([2.0, 0.3, 0.8])
        # p = 1 covers lag 1, so the metric tail is empty
        assert integrand_g(w, [1.0, 0.5], 1, np.pi) == pytest.approx(2.0 - 0.3)

    def test_g_metric_tail_beyond_order(self):
        w = np.array([2.0, 0.3, 0.8])
        assert integrand_g(w, [1.0, 0.5, 0.25], 1, np.pi) == pytest.approx(2.0 - 0.3 + 0.8 * 0.25)

    def test_g_rejects_wrong_length(self):
        with pytest.raises(InvalidInputError):
            integrand_g([1.0, 2.0], [1.0], 1, 0.0)

    def test_u_memoryless_values(self):
        assert integrand_u([0, 0, 0], [1.0], 1.0, 0.3) == pytest.approx(0.0)
        assert integrand_u([-0.5, 0, 0], [1.0], 1.0, 0.3) == pytest.approx(0.25)

    @pytest.mark.parametrize("nu", [0.0, np.pi / 2, np.pi])
    def test_u_two_tap_hand_expansion(self, nu):
        w0, w1, w2 = -1.0, 0.0, 0.0
        h0, h1 = 1.0, 1.0
        first = 0.25 * abs(w1 - h0 + h1 * complex(math.cos(nu), -math.sin(nu))) ** 2
        second = (0.5 + w2) * (w0 + 0.5 * (h0 ** 2 + h1 ** 2) + h0 * h1 * math.cos(nu))
        assert integrand_u([w0, w1, w2], [h0, h1], 1.0, nu) == pytest.approx(first - second)

    def test_symbol_is_2x2_determinant(self):
        rng = np.random.default_rng(0)
        h = rng.normal(size=3)
        w = np.array([0.8, 0.3, 0.2])
        s2 = 0.6
        for nu in rng.uniform(0, 2 * np.pi, 5):
            H = freq_response(h, nu)
            M = np.array([[2 * w[0] + abs(H) ** 2 / s2, w[1] - np.conj(H) / s2],
                          [w[1] - H / s2, 2 * (0.5 / s2 + w[2])]])
            assert exponent_symbol(w, h, s2, nu) == pytest.approx(np.linalg.det(M).real / 4)


class TestQuadrature:
    @pytest.mark.parametrize("k", [1, 2, 7, 100])
    def test_cosines_vanish(self, k):
        assert abs(integrate_periodic(lambda nu: np.cos(k * nu), 1024)) < 1e-12

    def test_constant(self):
        assert integrate_periodic(lambda nu: np.ones_like(nu), 64) == pytest.approx(1.0)

    @given(st.floats(-0.98, 0.98))
    @settings(max_examples=50, deadline=None)
    def test_jensen_ar1(self, phi):
        value = integrate_periodic(lambda nu: np.log(np.abs(1 - ar_response([phi], nu)) ** 2), 4096)
        assert abs(value) < 1e-9

    def test_doubling_check_passes_for_smooth(self):
        value = integrate_periodic(lambda nu: 1 / (1.2 + np.cos(nu)), 256, check_doubling=True)
        assert value == pytest.approx(1 / math.sqrt(1.2 ** 2 - 1), rel=1e-12)

    def test_doubling_check_flags_underresolved(self):
        with pytest.raises(InfeasibleError, match="not converged"):
            integrate_periodic(lambda nu: 1 / (1.0001 + np.cos(nu)), 16, check_doubling=True)

    def test_nonfinite_names_frequency(self):
        with pytest.raises(InfeasibleError, match="nu ="):
            periodic_mean(np.array([1.0, np.inf, 2.0, 3.0]))

    def test_log_floor(self):
        with pytest.raises(InfeasibleError):
            guarded_log(np.array([1.0, 1e-310]))

    def test_grid_too_small(self):
        with pytest.raises(InvalidInputError):
            frequency_grid(4)
