import math

import numpy as np
import pytest

from isi_mismatch.model import ChannelModel, DecoderMetric

SQRT_HALF = 1.0 / math.sqrt(2.0)
HALF_LOG2 = 0.5 * math.log(2.0)


def random_stable_phi(rng: np.random.Generator, p: int, bound: float = 0.9) -> np.ndarray:
    """Real AR coefficients whose characteristic roots lie in the disc of radius ``bound``."""
    roots = []
    while len(roots) < p:
        r = bound * np.sqrt(rng.uniform())
        if p - len(roots) >= 2 and rng.uniform() < 0.5:
            z = r * np.exp(1j * rng.uniform(0, np.pi))
            roots += [z, np.conj(z)]
        else:
            roots.append(r * rng.choice([-1.0, 1.0]))
    # z^p - sum phi_i z^{p-i} = prod (z - root)
    return -np.real(np.poly(roots))[1:]


@pytest.fixture
def awgn():
    return ChannelModel((1.0,))


@pytest.fixture
def two_tap():
    return ChannelModel((SQRT_HALF, SQRT_HALF))


@pytest.fixture
def two_tap_metric():
    return DecoderMetric((SQRT_HALF, SQRT_HALF))
