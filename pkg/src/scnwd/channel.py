"""All-zero-codeword BPSK transmission over AWGN and channel LLR generation.

The decoder is sign-symmetric for any weights, damping and schedule, so
error statistics do not depend on the transmitted codeword; simulation
therefore always sends the all-zero codeword as +1 symbols.  Randomness
comes from counter-based Philox streams addressed by (master seed, path),
which keeps every draw reproducible independently of worker layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    """Eb/N0 operating point of a rate-R code under unit-energy BPSK."""

    ebno_db: float
    rate: float

    def __post_init__(self):
        if not 0.0 < self.rate < 1.0:
            raise ValueError(f"rate must be in (0, 1), got {self.rate}")

    @property
    def noise_var(self) -> float:
        """sigma^2 = 1 / (2 R 10^(Eb/N0 / 10))."""
        return 1.0 / (2.0 * self.rate * 10.0 ** (self.ebno_db / 10.0))


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Philox generator for a logical substream of the master seed.

    The path is a tuple of small integers naming the consumer, e.g.
    (purpose, stage, step, draw_index).  Streams with distinct paths are
    statistically independent and never shared across workers.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def llr_vector(n: int, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Channel LLRs for n all-zero bits: y = 1 + noise, LLR = 2 y / sigma^2."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sigma2 = params.noise_var
    y = 1.0 + np.sqrt(sigma2) * rng.standard_normal(n)
    return 2.0 * y / sigma2


def llr_matrix(shape, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Batch variant of :func:`llr_vector` with an arbitrary shape."""
    sigma2 = params.noise_var
    y = 1.0 + np.sqrt(sigma2) * rng.standard_normal(shape)
    return 2.0 * y / sigma2
