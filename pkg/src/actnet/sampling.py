"""Seedable random variate generation for sojourn times and update gaps.

Sojourn times follow a Pareto-type density f(t) = (a-1)/t0 * (t/t0)^-a on
[t0, inf), inverted from the ccdf (t/t0)^(1-a) and clamped at an upper
bound `cap` so a single draw cannot stall the event loop.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

DEFAULT_T0 = 1.0
DEFAULT_CAP = 1.0e4

# Below this exponent the neglected truncation term of the mean is no longer
# tiny relative to t0 (see truncated_mean); draws are still valid.
SOFT_ALPHA_FLOOR = 2.5


@dataclass(frozen=True)
class ActivationRates:
    """Power-law exponents and bounds for the two sojourn laws.

    lam governs quiescent sojourns (time until a vertex re-activates),
    mu governs activated sojourns (time until it quiesces).
    """

    lam: float
    mu: float
    t0: float = DEFAULT_T0
    cap: float = DEFAULT_CAP

    def __post_init__(self):
        for name, alpha in (("lam", self.lam), ("mu", self.mu)):
            if not alpha > 2.0:
                raise InvalidParameterError(f"{name} must exceed 2, got {alpha}")
            if alpha < SOFT_ALPHA_FLOOR:
                warnings.warn(
                    f"{name}={alpha} < {SOFT_ALPHA_FLOOR}: truncation bias of the "
                    f"capped sojourn mean is non-negligible",
                    stacklevel=2,
                )
        if not 0.0 < self.t0 <= self.cap:
            raise InvalidParameterError(
                f"need 0 < t0 <= cap, got t0={self.t0}, cap={self.cap}"
            )


@dataclass(frozen=True)
class RngStream:
    """Address of one reproducible variate stream.

    Identical (master_seed, stream_id) pairs reproduce the same sequence;
    distinct stream_ids give statistically independent streams (SeedSequence
    spawn keys).
    """

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        )

    def kernel_seed(self) -> int:
        """Derive a 32-bit seed for the compiled simulation kernels."""
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        return int(seq.generate_state(1, dtype=np.uint32)[0])


def stream_rng(master_seed: int, stream_id: int = 0) -> np.random.Generator:
    """Shorthand for RngStream(master_seed, stream_id).generator()."""
    return RngStream(master_seed, stream_id).generator()


def _check_power_law_params(alpha: float, t0: float, cap: float) -> None:
    if not alpha > 2.0:
        raise InvalidParameterError(f"power-law exponent must exceed 2, got {alpha}")
    if not 0.0 < t0 <= cap:
        raise InvalidParameterError(f"need 0 < t0 <= cap, got t0={t0}, cap={cap}")


def sample_power_law(
    alpha: float, t0: float, cap: float, rng: np.random.Generator, size=None
):
    """Draw capped power-law sojourns by inverse-transform sampling.

    Uses r = 1 - U with U ~ [0,1) so r lies in (0,1] and the variate
    t0 * r^(1/(1-alpha)) is finite before clamping; r = 1 returns t0.
    """
    _check_power_law_params(alpha, t0, cap)
    r = 1.0 - rng.random(size)
    return np.minimum(t0 * r ** (1.0 / (1.0 - alpha)), cap)


def sample_exponential(rate: float, rng: np.random.Generator, size=None):
    """Exponential gaps with mean 1/rate."""
    if not rate > 0.0:
        raise InvalidParameterError(f"rate must be positive, got {rate}")
    return rng.exponential(1.0 / rate, size)


def truncated_mean(alpha: float, t0: float, cap: float) -> float:
    """Mean of the power law restricted to [t0, cap].

    Equals ((alpha-1)/(2-alpha)) * t0^(alpha-1) * cap^(2-alpha)
         + ((alpha-1)/(alpha-2)) * t0; the first term vanishes as cap grows,
    leaving the untruncated mean (alpha-1)/(alpha-2) * t0.
    """
    _check_power_law_params(alpha, t0, cap)
    head = (alpha - 1.0) / (2.0 - alpha) * t0 ** (alpha - 1.0) * cap ** (2.0 - alpha)
    return head + (alpha - 1.0) / (alpha - 2.0) * t0


def power_law_cdf(t, alpha: float, t0: float):
    """CDF of the uncapped law, F(t) = 1 - (t/t0)^(1-alpha) for t >= t0."""
    t = np.asarray(t, dtype=float)
    return np.where(t < t0, 0.0, 1.0 - (t / t0) ** (1.0 - alpha))
