"""Depth recovery by correlating pixel energies with the integral dictionary.

For every pixel the Pearson correlation between its K received energies and
the K integrals at each candidate window ``t' = 1..P`` is computed, and the
window with the highest correlation is taken as the integration time.

All pixels are handled as one (pixels x K) @ (K x P) product of centered,
unit-norm vectors, split into fixed-size pixel tiles.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from tgi3d.backend import kernels
from tgi3d.errors import (
    DimensionMismatchError,
    InsufficientSamplesError,
    InvalidInputError,
    NoEstimateError,
)
from tgi3d.parallel import run_chunks
from tgi3d.scene import MeasurementCube
from tgi3d.signal import IntegralTable

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_MASK_FRACTION = 0.3

# Fixed so that outputs never depend on how tiles are scheduled.
PIXEL_TILE = 256
_BOUND_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class CorrelationProfile:
    """``values[t'-1]`` is the correlation at window ``t'``; NaN where undefined."""

    values: np.ndarray
    pixel: Optional[tuple] = None

    @property
    def defined(self):
        return ~np.isnan(self.values)


@dataclass(frozen=True, eq=False)
class DepthEstimate:
    """Per-pixel reconstruction. ``t_hat == 0`` where there is no estimate."""

    t_hat: np.ndarray
    range: np.ndarray
    mask: np.ndarray
    peak_corr: np.ndarray
    failed: np.ndarray
    tick_seconds: float = 1.0

    @property
    def estimated(self):
        return self.mask & ~self.failed

    def same_as(self, other: "DepthEstimate") -> bool:
        return all(
            np.array_equal(a, b, equal_nan=a.dtype.kind == "f")
            for a, b in [
                (self.t_hat, other.t_hat),
                (self.range, other.range),
                (self.mask, other.mask),
                (self.peak_corr, other.peak_corr),
            ]
        ) and self.tick_seconds == other.tick_seconds


def correlate_block(Y: np.ndarray, table: IntegralTable) -> np.ndarray:
    """Correlation matrix ``(n, P)`` for a ``(K, n)`` block of pixel series."""
    Y = np.asarray(Y, dtype=np.float64)
    centered = Y - Y.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", centered, centered))
    flat = (np.ptp(Y, axis=0) == 0) | (norms == 0)
    np.divide(centered, norms, out=centered, where=~flat[None, :])
    C = centered.T @ table.normalized
    worst = np.abs(C).max(initial=0.0)
    assert worst <= 1 + _BOUND_SLACK, f"correlation {worst} outside [-1, 1]"
    np.clip(C, -1.0, 1.0, out=C)
    C[:, ~table.valid_columns] = np.nan
    C[flat, :] = np.nan
    return C


def correlation_profile(y, table: IntegralTable, pixel=None) -> CorrelationProfile:
    y = np.asarray(y, dtype=np.float64).ravel()
    if table.K < 2:
        raise InsufficientSamplesError("correlation needs K >= 2 measurements")
    if y.shape[0] != table.K:
        raise DimensionMismatchError(f"series has {y.shape[0]} samples, table has K={table.K}")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("pixel series must be finite")
    return CorrelationProfile(correlate_block(y[:, None], table)[0], pixel)


def estimate_integration_time(profile):
    """Smallest ``t'`` reaching the maximum defined correlation, and that maximum."""
    values = profile.values if isinstance(profile, CorrelationProfile) else np.asarray(profile, float)
    valid = np.ones(values.shape[0], dtype=np.uint8)
    idx, peak = kernels.masked_argmax(np.ascontiguousarray(values[None, :]), valid)
    if idx[0] < 0:
        raise NoEstimateError("every correlation value is undefined")
    return int(idx[0]) + 1, float(peak[0])


def time_to_range(t_hat, tick_seconds=1.0):
    """Round-trip time to one-way range: ``c * tick_seconds * t_hat / 2`` meters."""
    t = np.asarray(t_hat, dtype=np.float64)
    if np.any(t < 0):
        raise InvalidInputError("integration time must be >= 0")
    r = SPEED_OF_LIGHT * tick_seconds * t / 2
    return float(r) if r.ndim == 0 else r


def mask_from_2d(image, fraction=DEFAULT_MASK_FRACTION):
    """Object support: pixels brighter than ``fraction * max(image)``."""
    image = np.asarray(image, dtype=np.float64)
    if not np.all(np.isfinite(image)):
        raise InvalidInputError("2D image must be finite")
    top = image.max(initial=0.0)
    if top <= 0:
        return np.zeros(image.shape, dtype=bool)
    return image > fraction * top


def reconstruct_depth_map(cube: MeasurementCube, table: IntegralTable, mask=None, workers=1) -> DepthEstimate:
    """Estimate the integration time of every masked-in pixel.

    Masked-out pixels get ``t_hat = 0`` and NaN range/peak. Pixels whose
    series is constant are flagged in ``failed``.
    """
    if cube.K != table.K:
        raise DimensionMismatchError(f"cube has K={cube.K}, table has K={table.K}")
    if table.K < 2:
        raise InsufficientSamplesError("correlation needs K >= 2 measurements")
    H, W = cube.shape
    mask = np.ones((H, W), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (H, W):
        raise DimensionMismatchError(f"mask shape {mask.shape} does not match frames {(H, W)}")

    frames = cube.frames.reshape(cube.K, H * W)
    pixels = np.flatnonzero(mask)
    valid = table.valid_columns.astype(np.uint8)

    def solve(lo, hi):
        C = correlate_block(frames[:, pixels[lo:hi]], table)
        return kernels.masked_argmax(C, valid)

    results = run_chunks(solve, pixels.size, PIXEL_TILE, workers)
    t_hat = np.zeros(H * W, dtype=np.int64)
    peak = np.full(H * W, np.nan)
    failed = np.zeros(H * W, dtype=bool)
    if results:
        idx = np.concatenate([r[0] for r in results])
        t_hat[pixels] = idx + 1
        peak[pixels] = np.concatenate([r[1] for r in results])
        failed[pixels] = idx < 0
    t_hat = t_hat.reshape(H, W)
    failed = failed.reshape(H, W)
    estimated = mask & ~failed
    rng = np.full((H, W), np.nan)
    rng[estimated] = time_to_range(t_hat[estimated], table.tick_seconds)
    return DepthEstimate(t_hat, rng, mask, peak.reshape(H, W), failed, table.tick_seconds)
