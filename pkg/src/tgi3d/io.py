"""Artifact file formats.

Binary formats are little-endian: 4-byte magic, u16 version, u64 dims, f64
payload, then a u64-length-prefixed JSON trailer. Images are Netpbm (16-bit
PGM, packed PBM); matrices are CSV printed with round-trip precision.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from tgi3d.errors import FormatError
from tgi3d.reconstruct import DepthEstimate
from tgi3d.scene import MeasurementCube, Scene
from tgi3d.signal import ReferenceSet

REFERENCE_MAGIC = b"TGIR"
CUBE_MAGIC = b"TGIM"
FORMAT_VERSION = 1


class _Reader:
    def __init__(self, path):
        self.path = Path(path)
        self.data = self.path.read_bytes()
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated while reading {what}", self.path, self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def header(self, magic):
        got = self.take(4, "magic")
        if got != magic:
            raise FormatError(f"bad magic {got!r}, expected {magic!r}", self.path, 0)
        (version,) = self.unpack("<H", "version")
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported version {version}", self.path, 4)

    def floats(self, count, what):
        return np.frombuffer(self.take(8 * count, what), dtype="<f8").astype(np.float64)

    def trailer(self, required):
        if self.pos == len(self.data) and not required:
            return {}
        (n,) = self.unpack("<Q", "trailer length")
        raw = self.take(n, "trailer")
        try:
            meta = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"trailer is not JSON: {exc}", self.path, self.pos - n) from None
        if self.pos != len(self.data):
            raise FormatError("trailing bytes after trailer", self.path, self.pos)
        return meta


def _trailer(meta):
    raw = json.dumps(meta, sort_keys=True).encode("utf-8")
    return struct.pack("<Q", len(raw)) + raw


def write_reference(path, ref: ReferenceSet):
    K, P = ref.samples.shape
    with open(path, "wb") as fh:
        fh.write(REFERENCE_MAGIC + struct.pack("<HQQd", FORMAT_VERSION, K, P, ref.tick_seconds))
        fh.write(np.ascontiguousarray(ref.samples, dtype="<f8").tobytes())
        fh.write(_trailer({"seed": ref.seed}))


def read_reference(path) -> ReferenceSet:
    r = _Reader(path)
    r.header(REFERENCE_MAGIC)
    K, P, tick = r.unpack("<QQd", "dimensions")
    samples = r.floats(K * P, "samples").reshape(K, P)
    meta = r.trailer(required=False)
    samples.flags.writeable = False
    return ReferenceSet(samples, meta.get("seed"), tick)


def write_cube(path, cube: MeasurementCube):
    K, H, W = cube.frames.shape
    with open(path, "wb") as fh:
        fh.write(CUBE_MAGIC + struct.pack("<HQQQ", FORMAT_VERSION, K, H, W))
        fh.write(np.ascontiguousarray(cube.frames, dtype="<f8").tobytes())
        fh.write(_trailer(cube.provenance))


def read_cube(path) -> MeasurementCube:
    r = _Reader(path)
    r.header(CUBE_MAGIC)
    K, H, W = r.unpack("<QQQ", "dimensions")
    frames = r.floats(K * H * W, "frames").reshape(K, H, W)
    meta = r.trailer(required=True)
    frames.flags.writeable = False
    return MeasurementCube(frames, meta)


# -- Netpbm ---------------------------------------------------------------

def write_pgm(path, image, maxval=65535):
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM needs a 2D array")
    if image.size and (image.min() < 0 or image.max() > maxval):
        raise ValueError(f"PGM values must lie in [0, {maxval}]")
    H, W = image.shape
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(f"P5\n{W} {H}\n{maxval}\n".encode("ascii"))
        fh.write(image.astype(dtype).tobytes())


def _netpbm_header(r: _Reader, magic, fields):
    if r.take(2, "magic") != magic:
        raise FormatError(f"not a {magic.decode()} file", r.path, 0)
    values = []
    while len(values) < fields:
        ch = r.take(1, "header")
        if ch == b"#":
            while r.take(1, "comment") not in (b"\n", b"\r"):
                pass
        elif ch.isspace():
            continue
        else:
            tok = ch
            while True:
                ch = r.take(1, "header")
                if ch.isspace():
                    break
                tok += ch
            if not tok.isdigit():
                raise FormatError(f"bad header token {tok!r}", r.path, r.pos - len(tok))
            values.append(int(tok))
    return values


def read_pgm(path) -> np.ndarray:
    r = _Reader(path)
    W, H, maxval = _netpbm_header(r, b"P5", 3)
    if not 0 < maxval < 65536:
        raise FormatError(f"bad maxval {maxval}", path, r.pos)
    dtype = ">u2" if maxval > 255 else "u1"
    size = np.dtype(dtype).itemsize
    raw = r.take(W * H * size, "pixels")
    return np.frombuffer(raw, dtype=dtype).reshape(H, W).astype(np.int64)


def write_pbm(path, mask):
    """Packed bitmap; a set bit (black in viewers) marks True."""
    mask = np.asarray(mask, dtype=bool)
    H, W = mask.shape
    with open(path, "wb") as fh:
        fh.write(f"P4\n{W} {H}\n".encode("ascii"))
        fh.write(np.packbits(mask, axis=1).tobytes())


def read_pbm(path) -> np.ndarray:
    r = _Reader(path)
    W, H = _netpbm_header(r, b"P4", 2)
    row_bytes = (W + 7) // 8
    raw = np.frombuffer(r.take(row_bytes * H, "bits"), dtype=np.uint8).reshape(H, row_bytes)
    return np.unpackbits(raw, axis=1)[:, :W].astype(bool)


# -- CSV matrices ---------------------------------------------------------

def write_matrix_csv(path, matrix):
    matrix = np.asarray(matrix, dtype=np.float64)
    with open(path, "w") as fh:
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise FormatError(f"non-numeric value on line {lineno}", path) from None
    if rows and len({len(r) for r in rows}) != 1:
        raise FormatError("ragged rows", path)
    return np.array(rows, dtype=np.float64)


# -- scenes ---------------------------------------------------------------

REFLECTIVITY_SCALE = 65535


def write_scene(prefix, scene: Scene) -> list:
    """Write ``<prefix>_height.pgm``, ``<prefix>_reflectivity.pgm`` and ``<prefix>.txt``.

    Reflectivity is quantized to ``k / 65535``; heights are stored in ticks.
    Phantom shape labels, when present, go to ``<prefix>_labels.pgm``.
    """
    prefix = Path(prefix)
    paths = [Path(f"{prefix}_height.pgm"), Path(f"{prefix}_reflectivity.pgm"), Path(f"{prefix}.txt")]
    write_pgm(paths[0], scene.height_map)
    write_pgm(paths[1], np.rint(scene.reflectivity * REFLECTIVITY_SCALE))
    with open(paths[2], "w") as fh:
        fh.write(f"T_min = {scene.T_min}\n")
        fh.write(f"shutter_len = {scene.shutter_len}\n")
        fh.write(f"tick_seconds = {scene.tick_seconds!r}\n")
        fh.write(f"name = {scene.name}\n")
    if scene.labels is not None:
        paths.append(Path(f"{prefix}_labels.pgm"))
        write_pgm(paths[-1], scene.labels)
    return paths


def read_kv(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"line {lineno} is not key = value", path)
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    return out


def read_scene(prefix) -> Scene:
    prefix = Path(prefix)
    side = read_kv(f"{prefix}.txt")
    try:
        T_min = int(side["T_min"])
        shutter = int(side["shutter_len"])
        tick = float(side.get("tick_seconds", 1.0))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad scene sidecar: {exc}", f"{prefix}.txt") from None
    heights = read_pgm(f"{prefix}_height.pgm")
    refl = read_pgm(f"{prefix}_reflectivity.pgm") / REFLECTIVITY_SCALE
    labels_path = Path(f"{prefix}_labels.pgm")
    labels = read_pgm(labels_path) if labels_path.exists() else None
    return Scene(heights, refl, T_min, shutter, tick, side.get("name", "custom"), labels)


# -- depth outputs --------------------------------------------------------

DEPTH_FILES = ("t_hat.pgm", "range.csv", "peak_corr.csv", "mask.pbm")


def write_depth(directory, estimate: DepthEstimate, summary: dict) -> list:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = [d / name for name in DEPTH_FILES] + [d / "summary.json"]
    write_pgm(paths[0], estimate.t_hat)
    write_matrix_csv(paths[1], estimate.range)
    write_matrix_csv(paths[2], estimate.peak_corr)
    write_pbm(paths[3], estimate.mask)
    write_json(paths[4], dict(summary, tick_seconds=estimate.tick_seconds))
    return paths


def read_depth(directory) -> DepthEstimate:
    d = Path(directory)
    t_hat = read_pgm(d / "t_hat.pgm")
    mask = read_pbm(d / "mask.pbm")
    summary = json.loads((d / "summary.json").read_text())
    tick = float(summary.get("tick_seconds", 1.0))
    failed = mask & (t_hat == 0)
    rng = read_matrix_csv(d / "range.csv").reshape(t_hat.shape)
    peak = read_matrix_csv(d / "peak_corr.csv").reshape(t_hat.shape)
    return DepthEstimate(t_hat, rng, mask, peak, failed, tick)


# -- misc -----------------------------------------------------------------

def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


__all__ = [
    "read_reference", "write_reference", "read_cube", "write_cube", "read_pgm", "write_pgm",
    "read_pbm", "write_pbm", "read_matrix_csv", "write_matrix_csv", "read_scene", "write_scene",
    "read_depth", "write_depth", "write_json", "sha256",
]
