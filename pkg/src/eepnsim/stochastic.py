"""Seeded random streams and the two stochastic processes of the model:
Wiener laser phase noise and complex circular AWGN.

Stream identity is (master_seed, label tuple): the same pair always yields
the same sequence, independent of thread scheduling, and distinct label
tuples give statistically independent streams. Streams are derived with
numpy's SeedSequence (spawn_key = labels) feeding a Philox counter-based
generator; Gaussians come from Generator.normal (ziggurat). Golden values
therefore pin the numpy generation algorithms, which numpy documents as
stable across releases for a fixed bit generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError


@dataclass(frozen=True)
class PhasePath:
    """Wiener phase samples at uniform spacing dt_s, phases[0] = 0,
    increments i.i.d. N(0, 2 pi linewidth dt)."""

    phases: NDArray[np.float64]
    linewidth_hz: float
    dt_s: float


def derive_stream(master_seed: int, labels) -> np.random.Generator:
    """Independent, reproducible generator for (master_seed, labels).

    Labels are non-negative integers; order is significant. Parallel workers
    must each derive their own stream, never share one.
    """
    labels = tuple(int(v) for v in labels)
    if any(v < 0 for v in labels):
        raise ConfigError(f"stream labels must be non-negative, got {labels}")
    seq = np.random.SeedSequence(int(master_seed), spawn_key=labels)
    return np.random.Generator(np.random.Philox(seq))


def complex_gaussian(rng: np.random.Generator, variance: float, size=None):
    """Circular complex Gaussian with total variance E|z|^2 = variance
    (independent N(0, variance/2) quadratures). Real block drawn before the
    imaginary block, which keeps sequences stable for golden tests."""
    if variance < 0:
        raise ConfigError(f"noise variance must be >= 0, got {variance}")
    scale = np.sqrt(variance / 2.0)
    re = rng.normal(0.0, scale, size=size)
    im = rng.normal(0.0, scale, size=size)
    z = re + 1j * im
    return complex(z) if size is None else z


def wiener_path(rng: np.random.Generator, linewidth_hz: float, dt_s: float,
                count: int) -> PhasePath:
    """Wiener phase noise path: cumulative sum of N(0, 2 pi linewidth dt)
    increments, first sample pinned to 0. The field exp(j phi(t)) then has a
    Lorentzian spectrum of full width linewidth_hz."""
    if linewidth_hz < 0:
        raise ConfigError(f"linewidth must be >= 0, got {linewidth_hz}")
    if dt_s <= 0:
        raise ConfigError(f"sample spacing must be > 0, got {dt_s}")
    if count < 1:
        raise ConfigError(f"path length must be >= 1, got {count}")
    phases = np.zeros(count)
    if count > 1:
        # draw unconditionally so stream consumption does not depend on the
        # linewidth value (keeps draws common across sweep settings)
        sigma = np.sqrt(2.0 * np.pi * linewidth_hz * dt_s)
        np.cumsum(sigma * rng.standard_normal(count - 1), out=phases[1:])
    return PhasePath(phases=phases, linewidth_hz=linewidth_hz, dt_s=dt_s)
