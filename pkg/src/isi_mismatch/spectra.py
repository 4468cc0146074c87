"""Frequency-domain quantities and periodic quadrature.

Every integral over ``[0, 2*pi]`` in this package is a normalised mean
``(1/2pi) * int_0^{2pi} f(nu) dnu`` evaluated with the trapezoidal rule on a
uniform periodic grid.  For the smooth periodic integrands met here the rule
converges geometrically, so a modest grid already gives near machine
precision; ``integrate_periodic`` can be asked to double the grid to make
that observable.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .model import InfeasibleError, InvalidInputError, as_taps, tap_correlation

DEFAULT_POINTS = 4096
LOG_FLOOR = 1e-300

__all__ = [
    "DEFAULT_POINTS",
    "frequency_grid",
    "freq_response",
    "ar_response",
    "spectral_densities",
    "integrand_f",
    "integrand_g",
    "integrand_u",
    "exponent_symbol",
    "integrate_periodic",
    "periodic_mean",
    "guarded_log",
]


def frequency_grid(n_points: int = DEFAULT_POINTS) -> np.ndarray:
    """Uniform periodic grid ``2*pi*i/N`` (the endpoint 2*pi is the wrap of 0)."""
    n_points = int(n_points)
    if n_points < 8:
        raise InvalidInputError(f"quadrature needs at least 8 points, got {n_points}")
    return 2.0 * np.pi * np.arange(n_points) / n_points


def freq_response(taps, nu):
    """``sum_k taps[k] * exp(-1j*k*nu)``; ``nu`` may be a scalar or an array."""
    taps = as_taps(taps, allow_empty=True)
    nu_arr = np.asarray(nu, dtype=float)
    if taps.size == 0:
        out = np.zeros(nu_arr.shape, dtype=complex)
    else:
        k = np.arange(taps.size)
        out = np.exp(-1j * np.multiply.outer(nu_arr, k)) @ taps
    return out[()] if out.ndim == 0 else out


def ar_response(phi, nu):
    """Response of ``phi_1..phi_p`` with the convention ``phi_0 = 0``."""
    phi = as_taps(phi, "phi", allow_empty=True)
    return freq_response(np.concatenate([[0.0], phi]), nu)


def _real(z, what: str):
    z = np.asarray(z)
    if np.iscomplexobj(z):
        resid = np.max(np.abs(z.imag)) if z.size else 0.0
        if resid > 1e-12 * max(1.0, float(np.max(np.abs(z.real))) if z.size else 1.0):
            raise AssertionError(f"{what} has imaginary residue {resid:.3e}")
        z = z.real
    return z[()] if z.ndim == 0 else z


def spectral_densities(h, sigma2: float, eta2: float, phi) -> tuple[Callable, Callable]:
    """Input and output power spectra of an AR input through the ISI channel.

    Returns ``(S_X, S_Y)`` as vectorised functions of ``nu`` with
    ``S_X = eta2 / |1 - Phi|^2`` and ``S_Y = |H|^2 S_X + sigma2``.
    """
    from .armodel import check_stable

    h = as_taps(h, "h")
    phi = as_taps(phi, "phi", allow_empty=True)
    check_stable(phi)
    if not eta2 > 0:
        raise InvalidInputError(f"innovation variance must be positive, got {eta2}")
    if not sigma2 > 0:
        raise InvalidInputError(f"noise variance must be positive, got {sigma2}")

    def s_x(nu):
        return eta2 / np.abs(1.0 - ar_response(phi, nu)) ** 2

    def s_y(nu):
        return np.abs(freq_response(h, nu)) ** 2 * s_x(nu) + sigma2

    return s_x, s_y


def integrand_f(omega: float, alpha, phi, eta2: float, nu):
    """Integrand of the AR-ensemble rate:
    ``omega/2 |A|^2 + (1 + |Phi|^2 - 2 Re Phi) / (2 eta2)``."""
    phi_resp = ar_response(phi, nu)
    bracket = 1.0 + np.abs(phi_resp) ** 2 - 2.0 * phi_resp.real
    return 0.5 * omega * np.abs(freq_response(alpha, nu)) ** 2 + bracket / (2.0 * eta2)


def _metric_tail_cos(alpha: np.ndarray, p: int, nu) -> np.ndarray:
    """``sum_{k = 1 + min(p, K)}^{K} Pi_k(alpha) cos(k nu)``."""
    nu = np.asarray(nu, dtype=float)
    K = alpha.size - 1
    out = np.zeros(nu.shape)
    for k in range(1 + min(p, K), K + 1):
        out = out + tap_correlation(alpha, k) * np.cos(k * nu)
    return out


def integrand_g(omega, alpha, p: int, nu):
    """Integrand of the fixed-composition rate.

    ``omega`` has ``p + 2`` entries: the lag multipliers ``omega_0..omega_p``
    and the metric multiplier ``omega_{p+1}``.
    """
    omega = np.asarray(omega, dtype=float)
    alpha = as_taps(alpha, "alpha")
    if omega.size != p + 2:
        raise InvalidInputError(f"omega must have p + 2 = {p + 2} entries, got {omega.size}")
    nu = np.asarray(nu, dtype=float)
    k = np.arange(p + 1)
    lag_part = np.cos(np.multiply.outer(nu, k)) @ omega[: p + 1]
    return lag_part + omega[p + 1] * _metric_tail_cos(alpha, p, nu)


def integrand_u(omega_hat, h, sigma2: float, nu):
    """The exponent integrand exactly as displayed in the source derivation.

    ``1/4 |w1 - h0 + sum_{k>=1} h_k e^{-jk nu}|^2
    - (1/(2 sigma2) + w2) (w0 + |h|^2/2 + sum_k Pi_k(h) cos(k nu))``.

    This display drops the noise scaling of the likelihood and carries a
    sign slip, so it is kept for reference only; the exponent code uses
    :func:`exponent_symbol`.
    """
    w0, w1, w2 = np.asarray(omega_hat, dtype=float)
    h = as_taps(h, "h")
    nu = np.asarray(nu, dtype=float)
    tail = freq_response(np.concatenate([[0.0], h[1:]]), nu)
    first = 0.25 * np.abs(w1 - h[0] + tail) ** 2
    corr = sum(tap_correlation(h, k) * np.cos(k * nu) for k in range(1, h.size))
    second = (0.5 / sigma2 + w2) * (w0 + 0.5 * float(np.dot(h, h)) + corr)
    return first - second


def exponent_symbol(omega_hat, h, sigma2: float, nu):
    """Toeplitz symbol of the Gaussian integral behind the error exponent.

    For the tilted density ``W(y|x) exp(-w0|x|^2 - w1 <x,y> - w2 |y|^2)`` the
    quadratic form has symbol

    ``lam * (w0 + |H|^2 / (2 sigma2)) - |w1 - H / sigma2|^2 / 4``,
    ``lam = 1/(2 sigma2) + w2``,

    whose normalised log-integral is the limit of ``(1/n) log det`` of the
    joint precision matrix.  The tilted integral converges iff ``lam > 0`` and
    the symbol is positive on the whole circle.
    """
    w0, w1, w2 = np.asarray(omega_hat, dtype=float)
    h_resp = freq_response(as_taps(h, "h"), nu)
    lam = 0.5 / sigma2 + w2
    return lam * (w0 + np.abs(h_resp) ** 2 / (2.0 * sigma2)) - 0.25 * np.abs(w1 - h_resp / sigma2) ** 2


def periodic_mean(values) -> float:
    """Trapezoidal normalised integral of samples on :func:`frequency_grid`."""
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        nu_bad = 2.0 * np.pi * bad / values.size
        raise InfeasibleError(f"integrand is not finite at nu = {nu_bad:.6g}")
    return float(_real(np.mean(values), "periodic integral"))


def integrate_periodic(f: Callable, n_points: int = DEFAULT_POINTS, check_doubling: bool = False,
                       tol: float = 1e-9) -> float:
    """``(1/2pi) int_0^{2pi} f(nu) dnu`` by the periodic trapezoidal rule.

    With ``check_doubling`` the integral is recomputed on ``2 * n_points``
    and an :class:`InfeasibleError` is raised if the two differ by more
    than ``tol``.
    """
    value = periodic_mean(f(frequency_grid(n_points)))
    if check_doubling:
        fine = periodic_mean(f(frequency_grid(2 * n_points)))
        if abs(fine - value) > tol:
            raise InfeasibleError(
                f"quadrature not converged: |I(2N) - I(N)| = {abs(fine - value):.3e} with N = {n_points}"
            )
        return fine
    return value


def guarded_log(values) -> np.ndarray:
    """Elementwise log that treats values at or below ``1e-300`` as infeasible."""
    values = np.asarray(values, dtype=float)
    if values.size and not np.min(values) > LOG_FLOOR:
        raise InfeasibleError(f"log argument not positive (min = {np.min(values):.3e})")
    return np.log(values)
