"""Random reference pulses and their running time-integrals.

The integrals double as the reconstruction dictionary: pixel energies are
correlated against ``integrals[:, t'-1]`` for every candidate integration
time ``t'``.
"""

from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

from tgi3d.backend import kernels
from tgi3d.errors import InvalidDimensionError, InvalidInputError
from tgi3d.parallel import run_chunks

# Domain tags keep the reference and noise streams disjoint for equal seeds.
REFERENCE_DOMAIN = 0x5247_4954_0000_0001
NOISE_DOMAIN = 0x4E4F_4953_0000_0002

_PULSE_CHUNK = 256
_U64_MAX = 2**64 - 1

# generator(seed, first_pulse, out) fills out[s, :] for pulse first_pulse + s
Generator = Callable[[int, int, np.ndarray], None]


def uniform_generator(seed: int, first_pulse: int, out: np.ndarray) -> None:
    kernels.fill_uniform(seed, REFERENCE_DOMAIN, first_pulse, out)


@dataclass(frozen=True, eq=False)
class ReferenceSet:
    """K recorded reference pulses, P ticks each, shape ``(K, P)``."""

    samples: np.ndarray
    seed: Optional[int] = None
    tick_seconds: float = 1.0

    @property
    def num_pulses(self) -> int:
        return self.samples.shape[0]

    @property
    def pulse_len(self) -> int:
        return self.samples.shape[1]

    K = num_pulses
    P = pulse_len

    def same_as(self, other: "ReferenceSet") -> bool:
        return (
            self.seed == other.seed
            and self.tick_seconds == other.tick_seconds
            and self.samples.shape == other.samples.shape
            and np.array_equal(self.samples, other.samples)
        )


@dataclass(frozen=True, eq=False)
class IntegralTable:
    """Running integrals of every pulse plus per-column statistics.

    Column ``j`` holds the integral over ticks ``1..j+1``; the empty window
    ``t' = 0`` is not stored (see :meth:`at`).
    """

    integrals: np.ndarray
    column_means: np.ndarray
    column_center_norms: np.ndarray
    tick_seconds: float = 1.0
    normalized: np.ndarray = field(default=None, repr=False)

    @property
    def K(self) -> int:
        return self.integrals.shape[0]

    @property
    def P(self) -> int:
        return self.integrals.shape[1]

    @property
    def valid_columns(self) -> np.ndarray:
        """Columns whose centered norm is nonzero, i.e. where correlation is defined."""
        return self.column_center_norms > 0

    def at(self, t) -> np.ndarray:
        """Integrals for window length ``t`` (int or int array), shape ``(K, ...)``."""
        t = np.asarray(t)
        if np.any(t < 0) or np.any(t > self.P):
            raise InvalidInputError(f"window length outside [0, {self.P}]")
        padded = t - 1
        vals = self.integrals[:, np.maximum(padded, 0)]
        return np.where(t > 0, vals, 0.0)


def _check_count(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise InvalidDimensionError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise InvalidDimensionError(f"{name} must be >= 1, got {value}")
    return int(value)


def generate_reference(
    K: int,
    P: int,
    seed: int = 1,
    tick_seconds: float = 1.0,
    generator: Optional[Generator] = None,
    workers: int = 1,
) -> ReferenceSet:
    """Draw K pulses of P i.i.d. uniform [0, 1) intensities.

    Pulse ``i`` comes from its own counter-based stream keyed on
    ``(seed, i)``, so values do not depend on chunking or ``workers``.
    ``generator`` swaps in another intensity model with the same keying.
    """
    K = _check_count("K", K)
    P = _check_count("P", P)
    if not tick_seconds > 0:
        raise InvalidInputError(f"tick_seconds must be > 0, got {tick_seconds}")
    if not 0 <= int(seed) <= _U64_MAX:
        raise InvalidInputError(f"seed must fit in 64 unsigned bits, got {seed}")
    seed = int(seed)
    gen = generator or uniform_generator
    samples = np.empty((K, P), dtype=np.float64)

    def fill(lo, hi):
        gen(seed, lo, samples[lo:hi])

    run_chunks(fill, K, _PULSE_CHUNK, workers)
    samples.flags.writeable = False
    return ReferenceSet(samples=samples, seed=seed, tick_seconds=float(tick_seconds))


def build_integral_table(ref: ReferenceSet, workers: int = 1) -> IntegralTable:
    """Compensated running sums of every pulse, scaled by the tick length.

    Also precomputes the column means, the centered column norms, and the
    centered-and-normalized dictionary used by the correlation kernel.
    """
    samples = np.ascontiguousarray(ref.samples, dtype=np.float64)
    K, P = samples.shape
    integrals = np.empty((K, P), dtype=np.float64)

    def accumulate(lo, hi):
        kernels.prefix_sum(samples[lo:hi], ref.tick_seconds, integrals[lo:hi])

    run_chunks(accumulate, K, _PULSE_CHUNK, workers)

    means = integrals.mean(axis=0)
    centered = integrals - means
    norms = np.sqrt(np.einsum("ij,ij->j", centered, centered))
    valid = norms > 0
    # zero-norm columns stay all-zero so they can never win the argmax
    np.divide(centered, norms, out=centered, where=valid[None, :])
    centered[:, ~valid] = 0.0
    for arr in (integrals, means, norms, centered):
        arr.flags.writeable = False
    return IntegralTable(
        integrals=integrals,
        column_means=means,
        column_center_norms=norms,
        tick_seconds=ref.tick_seconds,
        normalized=centered,
    )


def constant_generator(value: float) -> Generator:
    """Degenerate generator: every sample equals ``value``."""
    return partial(_fill_constant, value)


def _fill_constant(value, seed, first_pulse, out):
    out[...] = value
