"""Command-line front end.

Subcommands: ``scene``, ``simulate``, ``reconstruct``, ``run``,
``sweep-dsnr`` and ``sweep-k``. Settings come from defaults, then an
optional flat ``key = value`` file (``--config``), then flags.
"""

import argparse
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from tgi3d import __version__, io
from tgi3d.backend import NAME as BACKEND
from tgi3d.errors import ComputeError, FormatError, TGIError, UsageError
from tgi3d.experiments import (
    DSNR_GRID,
    K_GRID,
    SweepSpec,
    rmse,
    run_pipeline,
    shape_summary,
    spec_dict,
    sweep_dsnr,
    sweep_measurements,
)
from tgi3d.reconstruct import mask_from_2d, reconstruct_depth_map
from tgi3d.scene import NoiseSpec, integration_times, make_bar_scene_1d, make_phantom_scene, simulate_capture, simulate_single_shot_2d
from tgi3d.signal import build_integral_table, generate_reference

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_COMPUTE = 4

OUTPUT_ENV = "TGI3D_OUTPUT_DIR"
COMMANDS = ("scene", "simulate", "reconstruct", "run", "sweep-dsnr", "sweep-k")
SWEEPS = ("sweep-dsnr", "sweep-k")


def _default_out():
    return os.environ.get(OUTPUT_ENV, "tgi3d-out")


@dataclass
class RunConfig:
    scene: Optional[str] = None
    width: int = 120
    height: int = 120
    n: Optional[int] = None
    max_height: int = 800
    steps: Optional[int] = None
    k: int = 6000
    p: int = 1200
    t_min: int = 100
    shutter: int = 1200
    dsnr_db: Optional[float] = None
    dsnr_convention: str = "variance"
    sigma: Optional[float] = None
    seed: int = 1
    noise_seed: int = 1
    seeds: List[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    grid: Optional[List[float]] = None
    tick_seconds: float = 1.0
    mask_fraction: float = 0.3
    out: str = field(default_factory=_default_out)
    input: Optional[str] = None
    workers: int = 1
    timing: bool = True


def _int_list(text):
    return [int(v) for v in text.replace(",", " ").split()]


def _float_list(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(conv):
    def parse(text):
        return None if str(text).strip().lower() in ("", "none") else conv(text)
    return parse


PARSERS = {
    "scene": str, "width": int, "height": int, "n": _optional(int), "max_height": int,
    "steps": _optional(int), "k": int, "p": int, "t_min": int, "shutter": int,
    "dsnr_db": _optional(float), "dsnr_convention": str, "sigma": _optional(float),
    "seed": int, "noise_seed": int, "seeds": _int_list, "grid": _optional(_float_list),
    "tick_seconds": float, "mask_fraction": float, "out": str, "input": _optional(str),
    "workers": int, "timing": _bool,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    parser = _Parser(prog="tgi3d", description="Temporal ghost imaging 3D simulator and reconstructor")
    parser.add_argument("--version", action="version", version=f"tgi3d {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="flat key = value settings file")
        for f in fields(RunConfig):
            flag = "--" + f.name.replace("_", "-")
            if f.name == "timing":
                p.add_argument("--no-timing", dest="timing", action="store_const", const="false", default=None,
                               help="write 0 for wall-clock columns so outputs are byte-stable")
                continue
            p.add_argument(flag, dest=f.name, type=str, default=None, metavar=f.name.upper())
    return parser


def _convert(key, text):
    try:
        return PARSERS[key](text)
    except ValueError as exc:
        raise UsageError(f"invalid value for {key.replace('_', '-')}: {text!r} ({exc})") from None


def parse_config(argv, config_path=None):
    """Parse ``argv`` into ``(command, RunConfig)``.

    Flags override the config file, which overrides defaults. Unknown keys
    and malformed values raise :class:`UsageError` naming the key.
    """
    args = _build_parser().parse_args(list(argv))
    values = {}
    path = args.config or config_path
    if path is not None:
        try:
            pairs = io.read_kv(path)
        except OSError as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from None
        for key, text in pairs.items():
            norm = key.replace("-", "_")
            if norm not in PARSERS:
                raise UsageError(f"unknown config key {key!r} in {path}")
            values[norm] = _convert(norm, text)
    for key in PARSERS:
        text = getattr(args, key, None)
        if text is not None:
            values[key] = _convert(key, text)
    config = RunConfig(**values)
    _resolve(args.command, config)
    validate(args.command, config)
    return args.command, config


def _resolve(command, c: RunConfig):
    sweep = command in SWEEPS
    if c.scene is None:
        c.scene = "bar" if sweep else "phantom"
    if c.n is None:
        c.n = 1000 if sweep else 100
    if c.dsnr_db is None and c.sigma is None:
        c.dsnr_db = 10.0 if command == "sweep-k" else 15.0
    if c.grid is None and sweep:
        c.grid = list(DSNR_GRID) if command == "sweep-dsnr" else [float(k) for k in K_GRID]


def validate(command, c: RunConfig):
    def need(ok, key, why):
        if not ok:
            raise UsageError(f"invalid value for {key}: {why}")

    need(c.scene in ("phantom", "bar"), "scene", "must be 'phantom' or 'bar'")
    need(c.k >= 2, "k", "need at least 2 measurements")
    need(c.p >= 1, "p", "must be >= 1")
    need(c.t_min >= 1, "t-min", "must be >= 1")
    need(c.shutter <= c.p, "shutter", f"shutter {c.shutter} exceeds pulse length p={c.p}")
    top = c.max_height if c.scene == "bar" else 800
    need(c.t_min + top <= c.shutter, "shutter", f"t-min + max height = {c.t_min + top} exceeds shutter {c.shutter}")
    need(c.scene != "phantom" or min(c.width, c.height) >= 16, "width", "phantom needs at least 16x16")
    need(c.n >= 1, "n", "must be >= 1")
    need(c.dsnr_convention in ("variance", "std"), "dsnr-convention", "must be 'variance' or 'std'")
    need(c.sigma is None or c.sigma >= 0, "sigma", "must be >= 0")
    need(c.tick_seconds > 0, "tick-seconds", "must be > 0")
    need(0 <= c.mask_fraction < 1, "mask-fraction", "must be in [0, 1)")
    need(c.workers >= 1, "workers", "must be >= 1")
    need(len(c.seeds) >= 1, "seeds", "need at least one seed")
    need(all(0 <= s < 2**64 for s in c.seeds + [c.seed, c.noise_seed]), "seed", "must fit in 64 unsigned bits")
    if command in SWEEPS:
        g = c.grid
        need(bool(g) and all(b > a for a, b in zip(g, g[1:])), "grid", "must be nonempty and strictly increasing")
        if command == "sweep-k":
            need(all(v == int(v) and v >= 2 for v in g), "grid", "measurement counts must be integers >= 2")
    if command == "reconstruct":
        need(c.input is not None, "input", "reconstruct needs --input DIR")


def make_scene(c: RunConfig):
    if c.scene == "phantom":
        return make_phantom_scene(c.width, c.height, c.t_min, c.shutter, tick_seconds=c.tick_seconds)
    return make_bar_scene_1d(c.n, c.max_height, c.t_min, c.shutter, c.steps, c.tick_seconds)


def _noise(c: RunConfig):
    return NoiseSpec(dsnr_db=c.dsnr_db, seed=c.noise_seed, convention=c.dsnr_convention, sigma=c.sigma)


def emit_manifest(command, config: RunConfig, metrics: dict, files, out_dir, timing=None) -> dict:
    """Run manifest: config, seeds, metrics, content hashes; timing kept in its own key."""
    out_dir = Path(out_dir)
    return {
        "tool": "tgi3d",
        "version": __version__,
        "backend": BACKEND,
        "command": command,
        "config": asdict(config),
        "seeds": {"reference": config.seed, "noise": config.noise_seed, "sweep": list(config.seeds)},
        "metrics": metrics,
        "files": {str(Path(p).relative_to(out_dir)): io.sha256(p) for p in sorted(map(str, files))},
        "timing": timing or {},
    }


def _finish(command, config, metrics, files, out, timing):
    manifest = emit_manifest(command, config, metrics, files, out, timing)
    io.write_json(out / "manifest.json", manifest)
    return manifest


def cmd_scene(c: RunConfig, out: Path):
    scene = make_scene(c)
    files = io.write_scene(out / "scene", scene)
    return {"scene": scene.name, "shape": list(scene.shape)}, files, {}


def cmd_simulate(c: RunConfig, out: Path):
    start = time.perf_counter()
    scene = make_scene(c)
    ref = generate_reference(c.k, c.p, c.seed, c.tick_seconds, workers=c.workers)
    table = build_integral_table(ref, workers=c.workers)
    noise = _noise(c)
    cube = simulate_capture(scene, table, noise, workers=c.workers)
    cube = type(cube)(cube.frames, dict(cube.provenance, reference_seed=c.seed))
    image = simulate_single_shot_2d(scene, table, noise)
    files = io.write_scene(out / "scene", scene)
    io.write_reference(out / "reference.tgir", ref)
    io.write_cube(out / "cube.tgim", cube)
    io.write_matrix_csv(out / "image2d.csv", image)
    files += [out / "reference.tgir", out / "cube.tgim", out / "image2d.csv"]
    metrics = {"noise_sigma": cube.provenance["sigma"], "K": c.k, "P": c.p, "dsnr_db": c.dsnr_db}
    return metrics, files, {"wallclock_s": time.perf_counter() - start}


def _depth_timing(start, recon_s, pixels, K, P):
    return {
        "wallclock_s": time.perf_counter() - start,
        "reconstruct_s": recon_s,
        "throughput_madd_per_s": pixels * K * P / recon_s if recon_s > 0 else None,
    }


def cmd_reconstruct(c: RunConfig, out: Path):
    start = time.perf_counter()
    src = Path(c.input)
    ref = io.read_reference(src / "reference.tgir")
    cube = io.read_cube(src / "cube.tgim")
    image = io.read_matrix_csv(src / "image2d.csv")
    table = build_integral_table(ref, workers=c.workers)
    mask = mask_from_2d(image, c.mask_fraction)
    t0 = time.perf_counter()
    est = reconstruct_depth_map(cube, table, mask, workers=c.workers)
    recon_s = time.perf_counter() - t0
    summary = {"reference_seed": ref.seed, "K": table.K, "P": table.P,
               "noise": cube.provenance.get("noise"), "pixels_estimated": int(est.estimated.sum())}
    if (src / "scene.txt").exists():
        scene = io.read_scene(src / "scene")
        scored = est.mask & scene.support
        summary["rmse_ticks"] = rmse(est.t_hat, integration_times(scene), scored) if scored.any() else None
        if scene.labels is not None:
            summary["shapes"] = shape_summary(scene, est)
    files = io.write_depth(out, est, summary)
    timing = _depth_timing(start, recon_s, int(est.estimated.sum()), table.K, table.P)
    return summary, files, timing


def cmd_run(c: RunConfig, out: Path):
    start = time.perf_counter()
    scene = make_scene(c)
    result = run_pipeline(scene, c.k, c.dsnr_db, c.seed, c.noise_seed, c.p, c.dsnr_convention,
                          c.mask_fraction, c.sigma, workers=c.workers)
    recon_s = time.perf_counter() - start
    summary = result.summary()
    files = io.write_scene(out / "scene", scene)
    io.write_matrix_csv(out / "image2d.csv", result.image_2d)
    files.append(out / "image2d.csv")
    files += io.write_depth(out, result.estimate, summary)
    timing = _depth_timing(start, recon_s, int(result.estimate.estimated.sum()), c.k, c.p)
    return summary, files, timing


def cmd_sweep(command, c: RunConfig, out: Path):
    start = time.perf_counter()
    common = dict(seeds=c.seeds, scene=c.scene, N=c.n, max_height=c.max_height, T_min=c.t_min,
                  shutter=c.shutter, P=c.p, convention=c.dsnr_convention, mask_fraction=c.mask_fraction)
    if command == "sweep-dsnr":
        spec = SweepSpec("dsnr_db", c.grid, K=c.k, **common)
        result = sweep_dsnr(spec, workers=c.workers)
        name = "sweep_dsnr.csv"
    else:
        spec = SweepSpec("num_measurements", [int(v) for v in c.grid], dsnr_db=c.dsnr_db, **common)
        result = sweep_measurements(spec, workers=c.workers)
        name = "sweep_k.csv"
    path = out / name
    path.write_text(result.to_csv(timing=c.timing))
    metrics = {
        "spec": spec_dict(spec),
        "median_rmse_ticks": dict(zip(map(str, spec.grid), result.medians())),
        "inversions": result.inversions(),
    }
    return metrics, [path], {"wallclock_s": time.perf_counter() - start}


def execute(command, config: RunConfig) -> dict:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    if command == "scene":
        metrics, files, timing = cmd_scene(config, out)
    elif command == "simulate":
        metrics, files, timing = cmd_simulate(config, out)
    elif command == "reconstruct":
        metrics, files, timing = cmd_reconstruct(config, out)
    elif command == "run":
        metrics, files, timing = cmd_run(config, out)
    else:
        metrics, files, timing = cmd_sweep(command, config, out)
    if not config.timing:
        timing = {}
    return _finish(command, config, metrics, files, out, timing)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        command, config = parse_config(argv)
        manifest = execute(command, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ComputeError, TGIError) as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except FileNotFoundError as exc:
        print(f"format error: missing file {exc.filename}", file=sys.stderr)
        return EXIT_FORMAT
    metrics = manifest["metrics"]
    line = f"{command}: wrote {len(manifest['files'])} files to {config.out}"
    if metrics.get("rmse_ticks") is not None:
        line += f" (RMSE {metrics['rmse_ticks']:.4g} ticks)"
    print(line)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
