"""Gaussian main and eavesdropper channels for L users.

Receiver and eavesdropper observe

    Y(t) = sum_l sqrt(h_l) X_l(t) + N_Y(t),   N_Y ~ Normal(0, sigma2_Y)
    Z(t) = sum_l sqrt(g_l) X_l(t) + N_Z(t),   N_Z ~ Normal(0, sigma2_Z)

Config files store the gains h and g themselves; the channel applies the
amplitude factors sqrt(h), sqrt(g).  Noise comes from numpy's PCG64
``Generator`` (ziggurat normal sampler), so a fixed sub-stream reproduces
the exact noise sequence.  A ``noiseless=True`` escape hatch emits exactly
zero noise for algebraic tests, even though real parameters require strictly
positive variances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import Rng


@dataclass(frozen=True)
class ChannelParams:
    h: tuple[float, ...]
    g: tuple[float, ...]
    sigma2_Y: float
    sigma2_Z: float

    def __post_init__(self):
        object.__setattr__(self, "h", tuple(float(x) for x in self.h))
        object.__setattr__(self, "g", tuple(float(x) for x in self.g))
        if len(self.h) != len(self.g):
            raise ValueError("h and g must list one gain per user")
        if any(x < 0 for x in self.h) or any(x < 0 for x in self.g):
            raise ValueError("channel gains must be nonnegative")
        if self.sigma2_Y <= 0 or self.sigma2_Z <= 0:
            raise ValueError("noise variances must be positive")

    @property
    def users(self) -> int:
        return len(self.h)


def noise_sample(rng: Rng, variance: float, n: int | tuple) -> np.ndarray:
    """IID zero-mean Gaussian draws with the given variance."""
    if variance <= 0:
        raise ValueError("noise variance must be positive")
    return rng.normal(0.0, np.sqrt(variance), size=n)


def _superpose(codewords: Sequence[np.ndarray], gains: Sequence[float]) -> np.ndarray:
    if len(codewords) != len(gains):
        raise ValueError(f"got {len(codewords)} codewords for {len(gains)} users")
    arrays = [np.atleast_2d(np.asarray(x, dtype=float)) for x in codewords]
    n = arrays[0].shape[1]
    batch = arrays[0].shape[0]
    for x in arrays[1:]:
        if x.shape != (batch, n):
            raise ValueError("codewords must share the same (batch, n) shape")
    out = np.zeros((batch, n))
    for gain, x in zip(gains, arrays):
        out += np.sqrt(gain) * x
    return out


def transmit_main(
    codewords: Sequence[np.ndarray],
    params: ChannelParams,
    rng: Rng,
    noiseless: bool = False,
) -> np.ndarray:
    """Legitimate receiver's observation of the superposed codewords."""
    y = _superpose(codewords, params.h)
    if not noiseless:
        y = y + noise_sample(rng, params.sigma2_Y, y.shape)
    return y


def transmit_eve(
    codewords: Sequence[np.ndarray],
    params: ChannelParams,
    rng: Rng,
    noiseless: bool = False,
) -> np.ndarray:
    """Eavesdropper's observation of the superposed codewords."""
    z = _superpose(codewords, params.g)
    if not noiseless:
        z = z + noise_sample(rng, params.sigma2_Z, z.shape)
    return z
