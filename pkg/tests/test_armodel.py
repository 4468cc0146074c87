import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isi_mismatch import armodel
from isi_mismatch.model import InvalidInputError
from isi_mismatch.spectra import ar_response, integrate_periodic, spectral_densities

from conftest import random_stable_phi

reflections = st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=4)


class TestEtaSquared:
    def test_white(self):
        assert armodel.eta_squared([], 2.5) == 2.5

    @pytest.mark.parametrize("phi1", [-0.9, -0.3, 0.5, 0.8])
    def test_ar1(self, phi1):
        assert armodel.eta_squared([phi1], 1.7) == pytest.approx(1.7 * (1 - phi1 ** 2), rel=1e-12)

    def test_ar2_against_yule_walker_system(self):
        phi1, phi2 = 0.5, -0.3
        # gamma_0 = phi1 g1 + phi2 g2 + eta2, g1 = phi1 g0 + phi2 g1, g2 = phi1 g1 + phi2 g0, with eta2 = 1
        A = np.array([[1, -phi1, -phi2], [-phi1, 1 - phi2, 0], [-phi2, -phi1, 1]])
        g0 = np.linalg.solve(A, [1.0, 0, 0])[0]
        assert armodel.eta_squared([phi1, phi2], 1.0) == pytest.approx(1.0 / g0, rel=1e-12)

    def test_unstable(self):
        with pytest.raises(InvalidInputError, match="not stable"):
            armodel.eta_squared([1.0], 1.0)

    @given(st.integers(1, 4), st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_quadrature_agrees(self, p, seed):
        phi = random_stable_phi(np.random.default_rng(seed), p)
        exact = armodel.eta_squared(phi, 1.0)
        assert armodel.eta_squared(phi, 1.0, method="quadrature") == pytest.approx(exact, rel=1e-9)


class TestAutocov:
    def test_white(self):
        params = armodel.ArParams.from_phi([], 1.3)
        np.testing.assert_allclose(armodel.autocov_from_ar(params, 4), [1.3, 0, 0, 0, 0])

    def test_ar1_geometric(self):
        params = armodel.ArParams.from_phi([0.5], 1.0)
        np.testing.assert_allclose(armodel.autocov_from_ar(params, 6), 0.5 ** np.arange(7), atol=1e-12)

    def test_ar1_against_simulation(self):
        rng = np.random.default_rng(11)
        n = 1_000_000
        z = rng.standard_normal(n) * np.sqrt(0.75)
        x = np.empty(n)
        x[0] = rng.standard_normal()
        for t in range(1, n):
            x[t] = 0.5 * x[t - 1] + z[t]
        est = np.mean(x[1:] * x[:-1])
        gamma1 = armodel.autocov_from_ar(armodel.ArParams.from_phi([0.5], 1.0), 1)[1]
        assert abs(est - gamma1) < 0.01

    @given(reflections)
    @settings(max_examples=40, deadline=None)
    def test_yule_walker_residual(self, kappa):
        params = armodel.ArParams.from_phi(armodel.phi_from_reflection(kappa), 1.0)
        gamma = armodel.autocov_from_ar(params, params.order + 3)
        assert np.max(np.abs(armodel.yule_walker_residual(params.phi, params.eta2, gamma))) < 1e-10
        assert gamma[0] == pytest.approx(1.0, abs=1e-9)

    def test_wiener_khinchin(self):
        rng = np.random.default_rng(5)
        params = armodel.ArParams.from_phi(random_stable_phi(rng, 3), 2.0)
        s_x, _ = spectral_densities([1.0], 1.0, params.eta2, params.phi)
        gamma = armodel.autocov_from_ar(params, 2)
        assert integrate_periodic(s_x) == pytest.approx(gamma[0], abs=1e-8)
        assert integrate_periodic(lambda nu: s_x(nu) * np.cos(2 * nu)) == pytest.approx(gamma[2], abs=1e-8)


class TestLevinson:
    def test_white(self):
        params = armodel.ar_from_autocov([1.0, 0.0, 0.0])
        np.testing.assert_allclose(params.phi, 0.0)
        assert params.eta2 == pytest.approx(1.0)

    def test_one_step(self):
        params = armodel.ar_from_autocov([1.0, 0.5])
        np.testing.assert_allclose(params.phi, [0.5])
        assert params.eta2 == pytest.approx(0.75)

    @given(reflections, st.floats(0.2, 5.0))
    @settings(max_examples=60, deadline=None)
    def test_round_trip(self, kappa, p_x):
        params = armodel.ArParams.from_phi(armodel.phi_from_reflection(kappa), p_x)
        gamma = armodel.autocov_from_ar(params, params.order)
        back = armodel.ar_from_autocov(gamma)
        np.testing.assert_allclose(back.phi, params.phi, atol=1e-9)
        assert back.eta2 == pytest.approx(params.eta2, abs=1e-9)

    @given(reflections)
    @settings(max_examples=40, deadline=None)
    def test_reflection_parametrisation(self, kappa):
        gamma = armodel.gamma_from_reflection(kappa, 1.5)
        _, _, refl = armodel.levinson_durbin(gamma)
        np.testing.assert_allclose(refl, kappa, atol=1e-10)
        assert np.all(np.abs(refl) < 1)

    def test_names_failing_minor(self):
        with pytest.raises(InvalidInputError, match="order 3"):
            armodel.levinson_durbin([1.0, 0.9, 0.0])

    def test_extension_keeps_prefix(self):
        ext = armodel.extend_autocov([1.0, 0.5], 4)
        np.testing.assert_allclose(ext, 0.5 ** np.arange(5))


class TestValidate:
    def test_stable(self):
        verdict = armodel.validate_params(phi=[0.5])
        assert verdict and verdict.spectral_radius == pytest.approx(0.5)

    def test_unstable(self):
        verdict = armodel.validate_params(phi=[1.2])
        assert not verdict and "not stable" in verdict.reason

    def test_not_pd(self):
        verdict = armodel.validate_params(gamma=[1.0, 1.1])
        assert not verdict and verdict.failing_minor == 2

    def test_exactly_one_argument(self):
        with pytest.raises(InvalidInputError):
            armodel.validate_params()
        with pytest.raises(InvalidInputError):
            armodel.validate_params(phi=[0.1], gamma=[1.0])

    @pytest.mark.parametrize("p", [1, 2, 3, 4])
    def test_companion_agrees_with_roots(self, p):
        rng = np.random.default_rng(p)
        phi = rng.uniform(-1, 1, size=p)
        roots = np.roots(np.concatenate([[1.0], -phi]))
        assert armodel.spectral_radius(phi) == pytest.approx(np.max(np.abs(roots)), rel=1e-9)


@given(st.integers(1, 4), st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_szego_identity(p, seed):
    phi = random_stable_phi(np.random.default_rng(seed), p, bound=0.95)
    value = integrate_periodic(lambda nu: np.log(np.abs(1 - ar_response(phi, nu)) ** 2))
    assert abs(value) < 1e-9


@given(st.integers(1, 4), st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_stationary_power_matches(p, seed):
    phi = random_stable_phi(np.random.default_rng(seed), p)
    eta2 = armodel.eta_squared(phi, 1.0)
    gain = integrate_periodic(lambda nu: 1 / np.abs(1 - ar_response(phi, nu)) ** 2)
    assert eta2 * gain == pytest.approx(1.0, rel=1e-9)
