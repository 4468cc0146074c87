"""Channel and decoder-metric descriptions shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class InvalidInputError(ValueError):
    """Raised for malformed parameters (non-finite taps, unstable AR
    coefficients, non positive-definite autocovariances, ...)."""


class InfeasibleError(RuntimeError):
    """Raised when a computation has no feasible point (for example an
    integrand that is not strictly positive on the frequency grid)."""


def as_taps(values: Sequence[float] | np.ndarray, name: str = "taps", allow_empty: bool = False) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float)).ravel()
    if arr.size == 0 and not allow_empty:
        raise InvalidInputError(f"{name} must contain at least one coefficient")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries: {arr.tolist()}")
    return arr


def pad_taps(a: np.ndarray, length: int) -> np.ndarray:
    if a.size >= length:
        return a
    return np.concatenate([a, np.zeros(length - a.size)])


def tap_correlation(taps: np.ndarray, lag: int) -> float:
    """Deterministic autocorrelation ``sum_k taps[k] * taps[k + lag]``."""
    taps = np.asarray(taps, dtype=float)
    if lag >= taps.size:
        return 0.0
    return float(np.dot(taps[: taps.size - lag], taps[lag:]))


@dataclass(frozen=True)
class ChannelModel:
    """Gaussian ISI channel ``y_t = sum_i h_i x_{t-i} + w_t``.

    ``sigma2`` is the variance of the white Gaussian noise and ``p_x`` the
    average input power constraint.
    """

    h: np.ndarray
    sigma2: float = 1.0
    p_x: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "h", as_taps(self.h, "h"))
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise InvalidInputError(f"noise variance must be positive, got {self.sigma2}")
        if not (np.isfinite(self.p_x) and self.p_x > 0):
            raise InvalidInputError(f"input power must be positive, got {self.p_x}")
        if not np.any(self.h != 0):
            raise InvalidInputError("channel taps are all zero")

    @property
    def memory(self) -> int:
        return self.h.size - 1

    @property
    def energy(self) -> float:
        return float(np.dot(self.h, self.h))

    def output_power(self) -> float:
        """Output power for a white input of power ``p_x``."""
        return self.energy * self.p_x + self.sigma2


@dataclass(frozen=True)
class DecoderMetric:
    """Mismatched Gaussian ISI metric with taps ``alpha``.

    The decoder ranks codewords by ``-sum_t (y_t - sum_i alpha_i x_{t-i})^2``.
    Shorter tap vectors are zero padded to the channel length when paired
    with a channel.
    """

    alpha: np.ndarray = field(default_factory=lambda: np.array([1.0]))

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_taps(self.alpha, "alpha"))

    @property
    def is_memoryless(self) -> bool:
        return not np.any(self.alpha[1:] != 0)

    def padded(self, length: int) -> np.ndarray:
        return pad_taps(self.alpha, length)


def align(channel: ChannelModel, metric: DecoderMetric) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(h, alpha)`` zero padded to a common length ``K + 1``."""
    length = max(channel.h.size, metric.alpha.size)
    return pad_taps(channel.h, length), metric.padded(length)
