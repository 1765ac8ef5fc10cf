"""Synthetic 3D scenes and the shutter-gated capture model.

A pixel whose surface sits ``h`` ticks above the base plane integrates the
returned pulse for ``T = T_min + h`` ticks before the shutter closes, so
frame ``i`` records ``reflectivity * integrals[i, T-1]`` plus white Gaussian
noise.
"""

from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from tgi3d.backend import kernels
from tgi3d.errors import InvalidDimensionError, InvalidInputError, TimingViolationError
from tgi3d.parallel import run_chunks
from tgi3d.signal import NOISE_DOMAIN, IntegralTable

PHANTOM_HEIGHTS = {"cone": 200, "l_shape": 400, "cuboid": 600, "cylinder": 800}
FOOTPRINT_FRACTION = 0.4
DEFAULT_T_MIN = 100
CONVENTIONS = ("variance", "std")

_FRAME_CHUNK = 64


@dataclass(frozen=True, eq=False)
class Scene:
    height_map: np.ndarray
    reflectivity: np.ndarray
    T_min: int
    shutter_len: int
    tick_seconds: float = 1.0
    name: str = "custom"
    labels: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        h = np.asarray(self.height_map)
        r = np.asarray(self.reflectivity, dtype=np.float64)
        if h.ndim != 2 or h.shape != r.shape:
            raise InvalidDimensionError("height_map and reflectivity must be equal-shape 2D arrays")
        if np.any(h < 0) or not np.all(np.equal(np.mod(h, 1), 0)):
            raise InvalidInputError("height_map must hold nonnegative integers")
        if not np.all((r >= 0) & (r <= 1)):
            raise InvalidInputError("reflectivity must lie in [0, 1]")
        if self.T_min < 1:
            raise TimingViolationError(f"T_min must be >= 1, got {self.T_min}")
        top = int(h[r > 0].max()) if np.any(r > 0) else 0
        if self.T_min + top > self.shutter_len:
            raise TimingViolationError(
                f"T_min + max height = {self.T_min + top} exceeds shutter_len = {self.shutter_len}"
            )
        object.__setattr__(self, "height_map", h.astype(np.int64))
        object.__setattr__(self, "reflectivity", r)

    @property
    def shape(self):
        return self.height_map.shape

    @property
    def support(self) -> np.ndarray:
        return self.reflectivity > 0

    def same_as(self, other: "Scene") -> bool:
        return (
            np.array_equal(self.height_map, other.height_map)
            and np.array_equal(self.reflectivity, other.reflectivity)
            and self.T_min == other.T_min
            and self.shutter_len == other.shutter_len
            and self.tick_seconds == other.tick_seconds
        )


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise settings.

    ``dsnr_db`` is the detection SNR at the scene's largest mean integrated
    energy; ``convention`` picks whether it is measured against the noise
    variance or the standard deviation. An explicit ``sigma`` overrides it.
    With neither set the capture is noise-free.
    """

    dsnr_db: Optional[float] = None
    seed: int = 0
    convention: str = "variance"
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise InvalidInputError(f"convention must be one of {CONVENTIONS}")
        if self.sigma is not None and not self.sigma >= 0:
            raise InvalidInputError(f"noise sigma must be >= 0, got {self.sigma}")

    def resolve_sigma(self, scene: Scene, table: IntegralTable) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        if self.dsnr_db is None:
            return 0.0
        return dsnr_to_sigma(self.dsnr_db, max_mean_energy(scene, table), self.convention)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class MeasurementCube:
    """Received frames, shape ``(K, H, W)``, with the settings that produced them."""

    frames: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def K(self):
        return self.frames.shape[0]

    @property
    def shape(self):
        return self.frames.shape[1:]

    def same_as(self, other: "MeasurementCube") -> bool:
        return (
            self.frames.shape == other.frames.shape
            and np.array_equal(self.frames, other.frames)
            and self.provenance == other.provenance
        )


def _disk(hq, wq, radius):
    yy, xx = np.mgrid[0:hq, 0:wq]
    r = np.hypot(yy - hq // 2, xx - wq // 2)
    return r, r < radius


def make_phantom_scene(W=120, H=120, T_min=DEFAULT_T_MIN, shutter=1200, scale=1.0, tick_seconds=1.0):
    """Cone, L-block, cuboid and cylinder, one per quadrant.

    Peak heights are 200, 400, 600 and 800 ticks (times ``scale``). The cone
    slopes linearly from its apex to its rim; the other three are flat. Each
    footprint covers about 40% of its quadrant and reflectivity is 1 on
    every shape, 0 elsewhere. ``labels`` marks the shape of each pixel
    (0 background, 1..4 in the order above).
    """
    if W < 16 or H < 16:
        raise InvalidDimensionError(f"phantom needs W, H >= 16, got {W}x{H}")
    peaks = {k: int(round(v * scale)) for k, v in PHANTOM_HEIGHTS.items()}
    if T_min + max(peaks.values()) > shutter:
        raise TimingViolationError(
            f"T_min + max height = {T_min + max(peaks.values())} exceeds shutter = {shutter}"
        )
    hq, wq = H // 2, W // 2
    area = FOOTPRINT_FRACTION * hq * wq
    heights = np.zeros((H, W), dtype=np.int64)
    labels = np.zeros((H, W), dtype=np.int64)

    radius = np.sqrt(area / np.pi)
    r, inside = _disk(hq, wq, radius)
    cone = np.where(inside, np.ceil(peaks["cone"] * (1 - r / radius)), 0).astype(np.int64)
    cone[inside] = np.maximum(cone[inside], 1)
    heights[:hq, :wq] = cone
    labels[:hq, :wq][inside] = 1

    # L: two bars of width w along the left and bottom edges of a b x b box
    b = int(round(0.8 * min(hq, wq)))
    w = max(1, int(round(b - np.sqrt(max(b * b - area, 0)))))
    y0, x0 = (hq - b) // 2, (wq - b) // 2
    l_mask = np.zeros((hq, wq), dtype=bool)
    l_mask[y0:y0 + b, x0:x0 + w] = True
    l_mask[y0 + b - w:y0 + b, x0:x0 + b] = True
    heights[:hq, wq:2 * wq][l_mask] = peaks["l_shape"]
    labels[:hq, wq:2 * wq][l_mask] = 2

    side = int(round(np.sqrt(area)))
    y0, x0 = (hq - side) // 2, (wq - side) // 2
    heights[hq + y0:hq + y0 + side, x0:x0 + side] = peaks["cuboid"]
    labels[hq + y0:hq + y0 + side, x0:x0 + side] = 3

    _, inside = _disk(hq, wq, radius)
    heights[hq:2 * hq, wq:2 * wq][inside] = peaks["cylinder"]
    labels[hq:2 * hq, wq:2 * wq][inside] = 4

    reflectivity = (labels > 0).astype(np.float64)
    return Scene(heights, reflectivity, int(T_min), int(shutter), float(tick_seconds), "phantom", labels)


def make_bar_scene_1d(N=100, max_height=800, T_min=DEFAULT_T_MIN, shutter=1200, steps=None, tick_seconds=1.0):
    """1 x N object whose height rises from 0 to ``max_height``.

    ``steps=None`` gives a linear ramp (one height per pixel, rounded);
    otherwise a staircase of ``steps`` equal-width, equally spaced levels.
    """
    if N < 1:
        raise InvalidDimensionError(f"N must be >= 1, got {N}")
    if T_min + max_height > shutter:
        raise TimingViolationError(f"T_min + max_height = {T_min + max_height} exceeds shutter = {shutter}")
    j = np.arange(N)
    if steps is None:
        frac = j / (N - 1) if N > 1 else np.zeros(N)
    else:
        if not 1 <= steps <= N:
            raise InvalidDimensionError(f"steps must be in [1, N], got {steps}")
        level = (j * steps) // N
        frac = level / (steps - 1) if steps > 1 else np.zeros(N)
    heights = np.rint(frac * max_height).astype(np.int64)[None, :]
    return Scene(heights, np.ones((1, N)), int(T_min), int(shutter), float(tick_seconds), "bar1d")


def integration_times(scene: Scene) -> np.ndarray:
    """Per-pixel integration time ``T_min + height``; 0 marks background (no return)."""
    return np.where(scene.support, scene.T_min + scene.height_map, 0).astype(np.int64)


def max_mean_energy(scene: Scene, table: IntegralTable) -> float:
    """Mean over pulses of the integral at the longest window, times peak reflectivity."""
    times = integration_times(scene)
    if not np.any(scene.support):
        raise InvalidInputError("scene has no object pixels; DSNR is undefined")
    t_max = int(times.max())
    if t_max > table.P:
        raise TimingViolationError(f"integration time {t_max} exceeds pulse length {table.P}")
    return float(table.column_means[t_max - 1] * scene.reflectivity.max())


def dsnr_to_sigma(dsnr_db: float, max_mean_energy: float, convention: str = "variance") -> float:
    if not max_mean_energy > 0:
        raise InvalidInputError(f"max_mean_energy must be > 0, got {max_mean_energy}")
    ratio = 10.0 ** (dsnr_db / 10.0)
    if convention == "variance":
        return float(np.sqrt(max_mean_energy / ratio))
    if convention == "std":
        return float(max_mean_energy / ratio)
    raise InvalidInputError(f"unknown DSNR convention {convention!r}")


def _check_timing(scene, table):
    if scene.shutter_len > table.P:
        raise TimingViolationError(f"shutter_len {scene.shutter_len} exceeds pulse length {table.P}")


def simulate_capture(scene: Scene, table: IntegralTable, noise: NoiseSpec = NoiseSpec(), workers=1) -> MeasurementCube:
    """Render K frames ``Y_i = r * integrals[i, T-1] + n_i``.

    Noise for frame ``i`` at pixel ``p = y*W + x`` is drawn from the stream
    keyed by ``(noise.seed, i)`` at counters ``2p, 2p+1``, and is added on
    every pixel, background included.
    """
    _check_timing(scene, table)
    sigma = noise.resolve_sigma(scene, table)
    H, W = scene.shape
    r = scene.reflectivity.ravel()
    cols = np.where(r > 0, scene.T_min + scene.height_map.ravel(), scene.T_min) - 1
    frames = np.empty((table.K, H * W), dtype=np.float64)

    def render(lo, hi):
        np.multiply(table.integrals[lo:hi][:, cols], r, out=frames[lo:hi])
        if sigma > 0:
            kernels.add_gaussian(noise.seed, NOISE_DOMAIN, lo, sigma, frames[lo:hi])

    run_chunks(render, table.K, _FRAME_CHUNK, workers)
    frames = frames.reshape(table.K, H, W)
    frames.flags.writeable = False
    provenance = {"scene": scene.name, "noise": noise.to_dict(), "sigma": sigma}
    return MeasurementCube(frames, provenance)


def simulate_single_shot_2d(scene: Scene, table: IntegralTable, noise: NoiseSpec = NoiseSpec(), pulse=0) -> np.ndarray:
    """One full-exposure frame: every pixel integrates the pulse up to shutter close.

    The gray level is then proportional to reflectivity alone. Noise uses the
    same stream as frame ``pulse`` of :func:`simulate_capture`.
    """
    _check_timing(scene, table)
    if not 0 <= pulse < table.K:
        raise InvalidInputError(f"pulse index {pulse} outside [0, {table.K})")
    sigma = noise.resolve_sigma(scene, table)
    H, W = scene.shape
    image = (scene.reflectivity.ravel() * table.integrals[pulse, scene.shutter_len - 1])[None, :].copy()
    if sigma > 0:
        kernels.add_gaussian(noise.seed, NOISE_DOMAIN, pulse, sigma, image)
    return image.reshape(H, W)
