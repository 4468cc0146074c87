"""Independent closed-form and textbook oracles.

These routines share no code path with the rate and exponent formulas and
are used to cross-check them:

* water-filling capacity of the Gaussian ISI channel,
* the generalized mutual information of an i.i.d. Gaussian codebook decoded
  with a scaled nearest-neighbour metric (derivation in
  ``docs/gmi_derivation.md``),
* the Kullback-Leibler divergence between zero-mean bivariate Gaussians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ChannelModel, InvalidInputError
from .spectra import freq_response, frequency_grid

CAPACITY_POINTS = 1 << 16


@dataclass(frozen=True)
class CapacityResult:
    capacity: float
    water_level: float
    quadrature_points: int
    allocated_power: float


def matched_capacity(channel: ChannelModel, n_points: int = CAPACITY_POINTS, tol: float = 1e-12) -> CapacityResult:
    """Water-filling capacity (nats per channel use) of the ISI channel.

    The power density is ``[theta - sigma2/|H|^2]_+``; ``theta`` is found by
    bisection so that its normalised integral equals ``p_x``.
    """
    gain = np.abs(freq_response(channel.h, frequency_grid(n_points))) ** 2
    with np.errstate(divide="ignore"):
        floor = np.where(gain > 0, channel.sigma2 / gain, np.inf)

    def power(theta):
        return np.maximum(theta - floor, 0.0)

    lo = 0.0
    hi = float(np.min(floor)) + channel.p_x * 4.0
    while np.mean(power(hi)) < channel.p_x:
        hi *= 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if np.mean(power(mid)) < channel.p_x:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    alloc = power(theta)
    capacity = 0.5 * float(np.mean(np.log1p(alloc * gain / channel.sigma2)))
    return CapacityResult(capacity, theta, int(n_points), float(np.mean(alloc)))


def gmi_iid_gaussian(h0: float, noise: float, alpha0: float, p_x: float) -> float:
    """GMI of an i.i.d. N(0, p_x) codebook on ``y = h0 x + w`` (``E w^2 = noise``)
    decoded with the metric ``-(y - alpha0 x)^2``.

    With ``D = E(Y - alpha0 X)^2`` and ``E_Y = E Y^2`` the GMI is

        max_{s >= 0}  -s D + log(1 + 2 s alpha0^2 p_x)/2 + s E_Y / (1 + 2 s alpha0^2 p_x),

    and the stationarity condition is a quadratic in ``z = 1 + 2 s alpha0^2 p_x``.
    """
    if not noise > 0:
        raise InvalidInputError(f"noise power must be positive, got {noise}")
    if alpha0 == 0.0:
        return 0.0
    a2p = alpha0 * alpha0 * p_x
    d = (h0 - alpha0) ** 2 * p_x + noise
    e_y = h0 * h0 * p_x + noise
    z = (a2p + math.sqrt(a2p * a2p + 4.0 * d * e_y)) / (2.0 * d)
    if z <= 1.0:
        return 0.0
    s = (z - 1.0) / (2.0 * a2p)
    return max(0.0, -s * d + 0.5 * math.log(z) + s * e_y / z)


def _check_pd(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2) or not np.allclose(m, m.T):
        raise InvalidInputError(f"{name} must be a symmetric 2x2 matrix")
    if not (m[0, 0] > 0 and np.linalg.det(m) > 0):
        raise InvalidInputError(f"{name} is not positive definite")
    return m


def kl_gaussian_bivariate(sigma_q, sigma_p) -> float:
    """``D(N(0, sigma_q) || N(0, sigma_p))`` in nats."""
    sq = _check_pd(sigma_q, "sigma_q")
    sp = _check_pd(sigma_p, "sigma_p")
    ratio = np.linalg.solve(sp, sq)
    _, logdet_p = np.linalg.slogdet(sp)
    _, logdet_q = np.linalg.slogdet(sq)
    return max(0.0, 0.5 * (float(np.trace(ratio)) - 2.0 + logdet_p - logdet_q))


def exponent_covariances(p_x: float, p_y: float, rho: float, h0: float, sigma2: float):
    """``(Sigma_Q, Sigma_P)``: the tilted joint law with output power ``p_y`` and
    correlation ``rho``, and the true memoryless channel law."""
    c = rho * math.sqrt(p_x * p_y)
    sigma_q = np.array([[p_x, c], [c, p_y]])
    sigma_p = np.array([[p_x, h0 * p_x], [h0 * p_x, h0 * h0 * p_x + sigma2]])
    return sigma_q, sigma_p


def kl_memoryless_expanded(p_x: float, p_y: float, rho: float, h0: float, sigma2: float) -> float:
    """The same divergence written out for the memoryless channel law."""
    return (-0.5 * math.log((1.0 - rho * rho) * p_y / sigma2)
            + (p_y - 2.0 * h0 * rho * math.sqrt(p_x * p_y) + h0 * h0 * p_x) / (2.0 * sigma2) - 0.5)
