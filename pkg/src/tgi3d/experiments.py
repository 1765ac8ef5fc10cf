"""End-to-end runs and the DSNR / measurement-count sweeps."""

import csv
import io
import time
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from tgi3d.errors import DimensionMismatchError, InvalidInputError, UndefinedMetricError
from tgi3d.reconstruct import DEFAULT_MASK_FRACTION, DepthEstimate, mask_from_2d, reconstruct_depth_map
from tgi3d.scene import (
    DEFAULT_T_MIN,
    PHANTOM_HEIGHTS,
    NoiseSpec,
    Scene,
    integration_times,
    make_bar_scene_1d,
    make_phantom_scene,
    simulate_capture,
    simulate_single_shot_2d,
)
from tgi3d.signal import build_integral_table, generate_reference

CSV_HEADER = ["variable", "value", "seed", "rmse_ticks", "wallclock_s"]
DEFAULT_SEEDS = (1, 2, 3, 4, 5)
DSNR_GRID = (0.0, 5.0, 10.0, 15.0, 20.0)
K_GRID = (200, 600, 2000, 8000, 32000)


def rmse(estimated, truth, mask) -> float:
    """Root-mean-square of ``estimated - truth`` over masked pixels, in ticks."""
    if isinstance(estimated, DepthEstimate):
        estimated = estimated.t_hat
    est = np.asarray(estimated, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if est.shape != tru.shape or est.shape != mask.shape:
        raise DimensionMismatchError(f"shapes differ: {est.shape}, {tru.shape}, {mask.shape}")
    if not mask.any():
        raise UndefinedMetricError("RMSE over an empty mask is undefined")
    diff = est[mask] - tru[mask]
    return float(np.sqrt(np.mean(diff * diff)))


@dataclass
class RunResult:
    scene: Scene
    estimate: DepthEstimate
    truth: np.ndarray
    image_2d: np.ndarray
    rmse: float
    sigma: float
    K: int
    P: int
    reference_seed: int
    noise: NoiseSpec

    @property
    def scored(self):
        """Pixels that enter the RMSE: in the mask and on the object."""
        return self.estimate.mask & self.scene.support

    def summary(self) -> dict:
        out = {
            "scene": self.scene.name,
            "K": self.K,
            "P": self.P,
            "reference_seed": self.reference_seed,
            "noise_seed": self.noise.seed,
            "dsnr_db": self.noise.dsnr_db,
            "dsnr_convention": self.noise.convention,
            "noise_sigma": self.sigma,
            "rmse_ticks": self.rmse,
            "pixels_estimated": int(self.estimate.estimated.sum()),
            "pixels_failed": int((self.estimate.mask & self.estimate.failed).sum()),
        }
        if self.scene.labels is not None:
            out["shapes"] = shape_summary(self.scene, self.estimate)
        return out


def run_pipeline(
    scene: Scene,
    K: int,
    dsnr_db: Optional[float] = None,
    reference_seed: int = 1,
    noise_seed: int = 1,
    P: Optional[int] = None,
    convention: str = "variance",
    mask_fraction: float = DEFAULT_MASK_FRACTION,
    sigma: Optional[float] = None,
    workers: int = 1,
) -> RunResult:
    """Generate pulses, capture, mask from the 2D shot, reconstruct and score."""
    P = scene.shutter_len if P is None else P
    table = build_integral_table(
        generate_reference(K, P, reference_seed, scene.tick_seconds, workers=workers), workers=workers
    )
    noise = NoiseSpec(dsnr_db=dsnr_db, seed=noise_seed, convention=convention, sigma=sigma)
    sig = noise.resolve_sigma(scene, table)
    cube = simulate_capture(scene, table, noise, workers=workers)
    image = simulate_single_shot_2d(scene, table, noise)
    mask = mask_from_2d(image, mask_fraction)
    estimate = reconstruct_depth_map(cube, table, mask, workers=workers)
    truth = integration_times(scene)
    scored = estimate.mask & scene.support
    score = rmse(estimate.t_hat, truth, scored) if scored.any() else float("nan")
    return RunResult(scene, estimate, truth, image, score, sig, K, P, reference_seed, noise)


def shape_summary(scene: Scene, estimate: DepthEstimate, top_tolerance=0.05) -> dict:
    """Per-shape medians of the recovered height ``t_hat - T_min``.

    ``median_top`` is taken over the pixels whose true height is within
    ``top_tolerance`` of the shape's peak, i.e. the whole footprint for the
    flat shapes and the apex region for the cone.
    """
    truth_h = scene.height_map
    rec_h = estimate.t_hat - scene.T_min
    out = {}
    for label, name in enumerate(PHANTOM_HEIGHTS, start=1):
        on = (scene.labels == label) & estimate.estimated
        if not on.any():
            out[name] = {"pixels": 0}
            continue
        peak = int(truth_h[scene.labels == label].max())
        top = on & (truth_h >= (1 - top_tolerance) * peak)
        out[name] = {
            "pixels": int(on.sum()),
            "peak_height": peak,
            "median_top": float(np.median(rec_h[top])) if top.any() else float("nan"),
            "true_median_top": float(np.median(truth_h[top])) if top.any() else float("nan"),
            "median_all": float(np.median(rec_h[on])),
            "true_median_all": float(np.median(truth_h[on])),
        }
    return out


def run_phantom_experiment(
    K=6000,
    dsnr_db: Optional[float] = 15.0,
    reference_seed=1,
    noise_seed=1,
    W=120,
    H=120,
    T_min=DEFAULT_T_MIN,
    shutter=1200,
    P=1200,
    convention="variance",
    mask_fraction=DEFAULT_MASK_FRACTION,
    tick_seconds=1.0,
    workers=1,
) -> RunResult:
    scene = make_phantom_scene(W, H, T_min, shutter, tick_seconds=tick_seconds)
    return run_pipeline(
        scene, K, dsnr_db, reference_seed, noise_seed, P, convention, mask_fraction, workers=workers
    )


@dataclass
class SweepSpec:
    """One-variable sweep on the 1D bar scene (or the phantom).

    ``variable`` is ``"dsnr_db"`` or ``"num_measurements"``; the other one
    is held at ``K`` or ``dsnr_db``. Each grid point runs once per seed,
    with the same seed pairing at every point.
    """

    variable: str
    grid: Sequence[float]
    K: int = 6000
    dsnr_db: float = 10.0
    seeds: Sequence[int] = DEFAULT_SEEDS
    scene: str = "bar"
    N: int = 100
    max_height: int = 800
    T_min: int = DEFAULT_T_MIN
    shutter: int = 1200
    P: int = 1200
    convention: str = "variance"
    mask_fraction: float = DEFAULT_MASK_FRACTION

    def __post_init__(self):
        if self.variable not in ("dsnr_db", "num_measurements"):
            raise InvalidInputError(f"unknown sweep variable {self.variable!r}")
        grid = list(self.grid)
        if not grid:
            raise InvalidInputError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidInputError("sweep grid must be strictly increasing")
        if len(self.seeds) < 1:
            raise InvalidInputError("need at least one seed per point")
        if self.variable == "num_measurements" and any(int(k) != k or k < 2 for k in grid):
            raise InvalidInputError("measurement counts must be integers >= 2")
        self.grid = grid
        self.seeds = [int(s) for s in self.seeds]

    def make_scene(self) -> Scene:
        if self.scene == "bar":
            return make_bar_scene_1d(self.N, self.max_height, self.T_min, self.shutter)
        if self.scene == "phantom":
            return make_phantom_scene(T_min=self.T_min, shutter=self.shutter)
        raise InvalidInputError(f"unknown scene {self.scene!r}")


@dataclass
class SweepRow:
    variable: str
    value: float
    seed: int
    rmse_ticks: float
    wallclock_s: float


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list = field(default_factory=list)

    def rmse_by_point(self) -> dict:
        out = {}
        for row in self.rows:
            out.setdefault(row.value, []).append(row.rmse_ticks)
        return out

    def medians(self) -> list:
        """Median RMSE per grid point, in grid order."""
        by_point = self.rmse_by_point()
        return [float(np.median(by_point[v])) for v in self.spec.grid]

    def wallclock(self) -> dict:
        out = {}
        for row in self.rows:
            out[row.value] = out.get(row.value, 0.0) + row.wallclock_s
        return out

    def inversions(self) -> list:
        """Adjacent points where the median RMSE rises along the grid.

        Each entry notes whether the rise is within the cross-seed spread
        (a flag, not a failure).
        """
        med = self.medians()
        by_point = self.rmse_by_point()
        flagged = []
        for j in range(len(med) - 1):
            if med[j + 1] > med[j]:
                a, b = self.spec.grid[j], self.spec.grid[j + 1]
                spread = max(np.ptp(by_point[a]), np.ptp(by_point[b]))
                flagged.append(
                    {"from": a, "to": b, "rise": med[j + 1] - med[j], "within_spread": bool(med[j + 1] - med[j] <= spread)}
                )
        return flagged

    def to_csv(self, timing=True) -> str:
        """CSV text; ``timing=False`` writes 0 in the wall-clock column for byte-stable output."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            value = int(row.value) if self.spec.variable == "num_measurements" else row.value
            writer.writerow(
                [row.variable, repr(value), row.seed, repr(row.rmse_ticks), repr(row.wallclock_s if timing else 0.0)]
            )
        return buf.getvalue()


def _run_sweep(spec: SweepSpec, workers=1) -> SweepResult:
    scene = spec.make_scene()
    result = SweepResult(spec)
    for value in spec.grid:
        for seed in spec.seeds:
            if spec.variable == "dsnr_db":
                K, dsnr = spec.K, float(value)
            else:
                K, dsnr = int(value), spec.dsnr_db
            start = time.perf_counter()
            run = run_pipeline(
                scene, K, dsnr, seed, seed, spec.P, spec.convention, spec.mask_fraction, workers=workers
            )
            elapsed = time.perf_counter() - start
            result.rows.append(SweepRow(spec.variable, value, seed, run.rmse, elapsed))
    return result


def sweep_dsnr(spec: SweepSpec, workers=1) -> SweepResult:
    if spec.variable != "dsnr_db":
        raise InvalidInputError("sweep_dsnr needs variable='dsnr_db'")
    return _run_sweep(spec, workers)


def sweep_measurements(spec: SweepSpec, workers=1) -> SweepResult:
    if spec.variable != "num_measurements":
        raise InvalidInputError("sweep_measurements needs variable='num_measurements'")
    return _run_sweep(spec, workers)


def spec_dict(spec: SweepSpec) -> dict:
    return asdict(spec)
