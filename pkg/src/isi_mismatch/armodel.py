"""Autoregressive input processes and their autocovariances.

The AR(p) recursion ``X_t = sum_i phi_i X_{t-i} + eta Z_t`` is tied to its
autocovariances through the Yule-Walker equations

    gamma_m = sum_k phi_k gamma_{m-k} + eta^2 delta_m,   gamma_{-m} = gamma_m.

``autocov_from_ar`` solves them forward, ``ar_from_autocov`` inverts them
with the Levinson-Durbin recursion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import InvalidInputError, as_taps
from .spectra import DEFAULT_POINTS, ar_response, integrate_periodic

STABILITY_MARGIN = 1e-9


@dataclass(frozen=True)
class ArParams:
    phi: np.ndarray
    eta2: float
    p_x: float

    @property
    def order(self) -> int:
        return self.phi.size

    @classmethod
    def from_phi(cls, phi, p_x: float, n_points: int = DEFAULT_POINTS) -> "ArParams":
        phi = as_taps(phi, "phi", allow_empty=True)
        return cls(phi, eta_squared(phi, p_x, n_points), float(p_x))


@dataclass(frozen=True)
class Verdict:
    valid: bool
    reason: str = ""
    spectral_radius: float | None = None
    failing_minor: int | None = None
    reflection: np.ndarray | None = None

    def __bool__(self):
        return self.valid


def spectral_radius(phi) -> float:
    """Largest root modulus of ``z^p - sum_i phi_i z^{p-i}``."""
    phi = as_taps(phi, "phi", allow_empty=True)
    p = phi.size
    if p == 0:
        return 0.0
    if p == 1:
        return abs(phi[0])
    if p == 2:
        return float(np.max(np.abs(np.roots([1.0, -phi[0], -phi[1]]))))
    companion = np.zeros((p, p))
    companion[0, :] = phi
    companion[1:, :-1] = np.eye(p - 1)
    return float(np.max(np.abs(np.linalg.eigvals(companion))))


def _validate_phi(phi) -> Verdict:
    try:
        phi = as_taps(phi, "phi", allow_empty=True)
    except InvalidInputError as exc:
        return Verdict(False, str(exc))
    rho = spectral_radius(phi)
    if rho < 1.0 - STABILITY_MARGIN:
        return Verdict(True, spectral_radius=rho)
    return Verdict(False, f"AR coefficients {phi.tolist()} are not stable (spectral radius {rho:.6g})",
                   spectral_radius=rho)


def _validate_gamma(gamma) -> Verdict:
    try:
        gamma = as_taps(gamma, "gamma")
    except InvalidInputError as exc:
        return Verdict(False, str(exc))
    # Leading minors via Cholesky: grow the Toeplitz matrix one lag at a time.
    for m in range(1, gamma.size + 1):
        idx = np.arange(m)
        toeplitz = gamma[np.abs(idx[:, None] - idx[None, :])]
        try:
            np.linalg.cholesky(toeplitz)
        except np.linalg.LinAlgError:
            return Verdict(False, f"autocovariance Toeplitz matrix is not positive definite "
                                  f"(leading minor of order {m} fails)", failing_minor=m)
    return Verdict(True, reflection=levinson_durbin(gamma)[2])


def validate_params(phi=None, gamma=None) -> Verdict:
    """Check ``phi`` for stability or ``gamma`` for positive definiteness."""
    if (phi is None) == (gamma is None):
        raise InvalidInputError("pass exactly one of phi or gamma")
    return _validate_phi(phi) if gamma is None else _validate_gamma(gamma)


def check_stable(phi) -> None:
    verdict = _validate_phi(phi)
    if not verdict:
        raise InvalidInputError(verdict.reason)


def eta_squared(phi, p_x: float, n_points: int = DEFAULT_POINTS, method: str = "exact") -> float:
    """Innovation variance that gives the AR process stationary power ``p_x``.

    ``p_x`` divided by the normalised integral of ``1/|1 - Phi|^2``.  The
    ``"exact"`` method evaluates that integral as the lag-0 Yule-Walker
    solution for unit innovation variance; ``"quadrature"`` uses the
    trapezoidal rule, which loses accuracy as roots approach the unit circle.
    """
    phi = as_taps(phi, "phi", allow_empty=True)
    check_stable(phi)
    if phi.size == 0:
        return float(p_x)
    if method == "exact":
        gain = _yule_walker_head(phi, 1.0)[0]
    elif method == "quadrature":
        gain = integrate_periodic(lambda nu: 1.0 / np.abs(1.0 - ar_response(phi, nu)) ** 2, n_points)
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    return float(p_x) / gain


def yule_walker_residual(phi, eta2: float, gamma) -> np.ndarray:
    """Residual of the Yule-Walker equations at lags ``0..len(gamma)-1``."""
    phi = as_taps(phi, "phi", allow_empty=True)
    gamma = np.asarray(gamma, dtype=float)
    out = np.empty(gamma.size)
    for m in range(gamma.size):
        pred = sum(phi[k - 1] * gamma[abs(m - k)] for k in range(1, phi.size + 1) if abs(m - k) < gamma.size)
        out[m] = gamma[m] - pred - (eta2 if m == 0 else 0.0)
    return out


def _yule_walker_head(phi: np.ndarray, eta2: float) -> np.ndarray:
    """``gamma_0..gamma_p`` from the dense (p+1)x(p+1) Yule-Walker system."""
    p = phi.size
    system = np.eye(p + 1)
    for m in range(p + 1):
        for k in range(1, p + 1):
            system[m, abs(m - k)] -= phi[k - 1]
    rhs = np.zeros(p + 1)
    rhs[0] = eta2
    try:
        return np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - excluded by stability
        raise RuntimeError(f"singular Yule-Walker system for phi = {phi.tolist()}") from exc


def autocov_from_ar(params: ArParams, m_max: int) -> np.ndarray:
    """Autocovariances ``gamma_0..gamma_{m_max}`` of a stable AR process."""
    phi = params.phi
    p = phi.size
    check_stable(phi)
    head = _yule_walker_head(phi, params.eta2)
    gamma = np.zeros(max(m_max, p) + 1)
    gamma[: p + 1] = head
    for m in range(p + 1, gamma.size):
        gamma[m] = np.dot(phi, gamma[m - 1 :: -1][:p])
    return gamma[: m_max + 1]


def extend_autocov(gamma, m_max: int) -> np.ndarray:
    """Maximum-entropy (Yule-Walker) continuation of ``gamma`` up to ``m_max``."""
    gamma = as_taps(gamma, "gamma")
    if m_max < gamma.size:
        return gamma[: m_max + 1].copy()
    phi, eta2, _ = levinson_durbin(gamma)
    out = np.zeros(m_max + 1)
    out[: gamma.size] = gamma
    p = phi.size
    for m in range(gamma.size, m_max + 1):
        out[m] = np.dot(phi, out[m - 1 :: -1][:p]) if p else 0.0
    return out


def levinson_durbin(gamma) -> tuple[np.ndarray, float, np.ndarray]:
    """Return ``(phi, eta2, reflection)`` for autocovariances ``gamma_0..gamma_p``.

    Raises :class:`InvalidInputError` naming the first failing leading minor
    when the Toeplitz matrix is not positive definite.
    """
    gamma = as_taps(gamma, "gamma")
    if not gamma[0] > 0:
        raise InvalidInputError("autocovariance Toeplitz matrix is not positive definite "
                                "(leading minor of order 1 fails)")
    phi = np.zeros(0)
    err = gamma[0]
    reflection = np.zeros(gamma.size - 1)
    for k in range(1, gamma.size):
        kappa = (gamma[k] - np.dot(phi, gamma[k - 1 : 0 : -1])) / err
        if not abs(kappa) < 1.0:
            raise InvalidInputError("autocovariance Toeplitz matrix is not positive definite "
                                    f"(leading minor of order {k + 1} fails)")
        phi = np.concatenate([phi - kappa * phi[::-1], [kappa]])
        err *= 1.0 - kappa * kappa
        reflection[k - 1] = kappa
    return phi, float(err), reflection


def ar_from_autocov(gamma) -> ArParams:
    """Invert the Yule-Walker map: autocovariances to ``(phi, eta2)``."""
    gamma = as_taps(gamma, "gamma")
    phi, eta2, _ = levinson_durbin(gamma)
    return ArParams(phi, eta2, float(gamma[0]))


def phi_from_reflection(kappa) -> np.ndarray:
    """Step-up recursion: reflection coefficients in (-1, 1) to stable ``phi``."""
    phi = np.zeros(0)
    for k in np.asarray(kappa, dtype=float):
        phi = np.concatenate([phi - k * phi[::-1], [k]])
    return phi


def gamma_from_reflection(kappa, p_x: float) -> np.ndarray:
    """Positive-definite autocovariances with ``gamma_0 = p_x`` from reflection coefficients."""
    kappa = np.asarray(kappa, dtype=float)
    gamma = np.zeros(kappa.size + 1)
    gamma[0] = p_x
    phi = np.zeros(0)
    err = float(p_x)
    for k_idx, k in enumerate(kappa, start=1):
        gamma[k_idx] = k * err + np.dot(phi, gamma[k_idx - 1 : 0 : -1])
        phi = np.concatenate([phi - k * phi[::-1], [k]])
        err *= 1.0 - k * k
    return gamma
