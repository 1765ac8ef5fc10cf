"""Focal-plane 3D imaging by temporal ghost imaging: simulation and depth reconstruction."""

from tgi3d.backend import NAME as BACKEND
from tgi3d.reconstruct import (
    CorrelationProfile,
    DepthEstimate,
    correlation_profile,
    estimate_integration_time,
    mask_from_2d,
    reconstruct_depth_map,
    time_to_range,
)
from tgi3d.scene import (
    MeasurementCube,
    NoiseSpec,
    Scene,
    dsnr_to_sigma,
    integration_times,
    make_bar_scene_1d,
    make_phantom_scene,
    simulate_capture,
    simulate_single_shot_2d,
)
from tgi3d.signal import IntegralTable, ReferenceSet, build_integral_table, generate_reference

__version__ = "0.1.0"
