"""Native volume files, a minimal NIfTI-1 reader and JSON report/trajectory files.

Native layout (little-endian)::

    magic    4s   b"SVL1"
    version  u32  1
    kind     u8   0 = float32 intensities, 1 = uint8 mask
    dims     3 x u32
    spacing  3 x f32 (mm)
    orient   u8   0 axial, 1 coronal, 2 sagittal, 3 isotropic
    payload  x-fastest raster
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptFile, InvalidVolume, IoError, UnsupportedFormat
from .motion import MotionTrajectory
from .volume import Mask, Orientation, Volume

MAGIC = b"SVL1"
VERSION = 1
KIND_INTENSITY = 0
KIND_MASK = 1
_HEADER = struct.Struct("<4sIB3I3fB")
REPORT_SCHEMA = "report_v1"
TRAJECTORY_SCHEMA = "trajectory_v1"


@dataclass(frozen=True, eq=False)
class NativeVolumeFile:
    kind: int
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    orientation: Orientation
    payload: np.ndarray  # flat, x-fastest; float32 or uint8

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(MAGIC, VERSION, self.kind, *self.dims, *self.spacing,
                              int(self.orientation))
        dtype = "<f4" if self.kind == KIND_INTENSITY else "u1"
        return header + np.ascontiguousarray(self.payload, dtype=dtype).tobytes()


def _to_file(obj, spacing=None, orientation=None) -> NativeVolumeFile:
    if isinstance(obj, Volume):
        return NativeVolumeFile(
            KIND_INTENSITY,
            obj.dims,
            tuple(spacing or obj.spacing),
            Orientation.parse(orientation if orientation is not None else obj.orientation),
            obj.flat().astype("<f4"),
        )
    if isinstance(obj, Mask):
        return NativeVolumeFile(
            KIND_MASK,
            obj.dims,
            tuple(spacing or (1.0, 1.0, 1.0)),
            Orientation.parse(orientation if orientation is not None else Orientation.ISOTROPIC),
            obj.flat(),
        )
    raise TypeError(f"cannot write {type(obj).__name__} as a native volume")


def write_native(path, obj, spacing=None, orientation=None) -> None:
    """Write a Volume or Mask; masks take spacing/orientation from the caller."""
    data = _to_file(obj, spacing, orientation).to_bytes()
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def parse_native(buf: bytes) -> NativeVolumeFile:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise UnsupportedFormat(f"bad magic {bytes(buf[:4])!r}, expected {MAGIC!r}")
    if len(buf) < _HEADER.size:
        raise CorruptFile(f"header truncated: {len(buf)} of {_HEADER.size} bytes")
    _, version, kind, nx, ny, nz, sx, sy, sz, orient = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise UnsupportedFormat(f"unsupported version {version}")
    if kind not in (KIND_INTENSITY, KIND_MASK):
        raise UnsupportedFormat(f"unknown kind byte {kind}")
    if orient > 3:
        raise UnsupportedFormat(f"unknown orientation byte {orient}")
    dims = (nx, ny, nz)
    if min(dims) < 1:
        raise CorruptFile(f"bad dims {dims}")
    spacing = (sx, sy, sz)
    if not all(math.isfinite(s) and s > 0 for s in spacing):
        raise CorruptFile(f"bad spacing {spacing}")
    itemsize = 4 if kind == KIND_INTENSITY else 1
    expected = nx * ny * nz * itemsize
    actual = len(buf) - _HEADER.size
    if actual != expected:
        raise CorruptFile(f"payload is {actual} bytes, expected {expected}")
    dtype = "<f4" if kind == KIND_INTENSITY else "u1"
    payload = np.frombuffer(buf, dtype=dtype, offset=_HEADER.size).copy()
    return NativeVolumeFile(kind, dims, spacing, Orientation(orient), payload)


def read_native_file(path) -> NativeVolumeFile:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return parse_native(buf)


def read_native(path) -> Volume | Mask:
    f = read_native_file(path)
    try:
        if f.kind == KIND_INTENSITY:
            return Volume.from_flat(f.payload.astype(np.float64), f.dims, f.spacing, f.orientation)
        if not np.all(f.payload <= 1):
            raise CorruptFile("mask payload holds values other than 0 and 1")
        return Mask(f.payload.reshape(f.dims, order="F").astype(bool))
    except InvalidVolume as exc:
        raise CorruptFile(str(exc)) from exc


# NIfTI-1 --------------------------------------------------------------------

_NIFTI_DTYPES = {16: "f4", 4: "i2"}


def read_nifti1(path) -> Volume:
    """Read an uncompressed single-file NIfTI-1 (.nii) holding one 3D float32/int16 image."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if buf[:2] == b"\x1f\x8b":
        raise UnsupportedFormat("compression: gzip-compressed NIfTI is not supported")
    if len(buf) < 348:
        raise UnsupportedFormat(f"sizeof_hdr: file shorter than a 348-byte header ({len(buf)})")
    for end in "<>":
        if struct.unpack_from(end + "i", buf, 0)[0] == 348:
            break
    else:
        raise UnsupportedFormat(f"sizeof_hdr: expected 348, got {struct.unpack_from('<i', buf, 0)[0]}")
    magic = buf[344:348]
    if magic != b"n+1\x00":
        raise UnsupportedFormat(f"magic: expected b'n+1\\x00', got {magic!r}")
    dim = struct.unpack_from(end + "8h", buf, 40)
    datatype, _bitpix = struct.unpack_from(end + "2h", buf, 70)
    pixdim = struct.unpack_from(end + "8f", buf, 76)
    vox_offset, scl_slope, scl_inter = struct.unpack_from(end + "3f", buf, 108)

    ndim = dim[0]
    if ndim < 3 or ndim > 7 or any(d != 1 for d in dim[4 : ndim + 1]):
        raise UnsupportedFormat(f"dim: only single 3D images are supported, got dim={dim}")
    dims = tuple(int(d) for d in dim[1:4])
    if min(dims) < 1:
        raise UnsupportedFormat(f"dim: non-positive size {dims}")
    if datatype not in _NIFTI_DTYPES:
        raise UnsupportedFormat(f"datatype: {datatype} (only 16 float32 and 4 int16)")
    spacing = tuple(float(abs(p)) for p in pixdim[1:4])
    if not all(math.isfinite(s) and s > 0 for s in spacing):
        raise UnsupportedFormat(f"pixdim: bad voxel sizes {spacing}")
    offset = int(vox_offset)
    if offset < 348:
        raise UnsupportedFormat(f"vox_offset: {vox_offset}")
    dtype = np.dtype(end + _NIFTI_DTYPES[datatype])
    count = dims[0] * dims[1] * dims[2]
    if len(buf) < offset + count * dtype.itemsize:
        raise CorruptFile(
            f"payload is {len(buf) - offset} bytes, expected {count * dtype.itemsize}"
        )
    data = np.frombuffer(buf, dtype=dtype, count=count, offset=offset).astype(np.float64)
    if scl_slope != 0 and math.isfinite(scl_slope):
        data = data * scl_slope + scl_inter
    try:
        return Volume.from_flat(data, dims, spacing, Orientation.ISOTROPIC)
    except InvalidVolume as exc:
        raise CorruptFile(str(exc)) from exc


# JSON -------------------------------------------------------------------------


def _round_floats(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.9g}")
    if isinstance(obj, (np.floating,)):
        return _round_floats(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round_floats(obj.tolist())
    return obj


def dumps(obj) -> str:
    """Compact JSON, insertion-ordered keys, floats at 9 significant digits, trailing newline."""
    return json.dumps(_round_floats(obj), separators=(",", ":"), ensure_ascii=False) + "\n"


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def report_document(items, **extra) -> dict:
    doc = {"schema": REPORT_SCHEMA}
    doc.update(extra)
    doc["items"] = [i.to_dict() if hasattr(i, "to_dict") else i for i in items]
    return doc


def write_report_json(items, path, **extra) -> None:
    """Write MotionReports or TrialOutcomes as a report_v1 document."""
    _write_text(path, dumps(report_document(items, **extra)))


def trajectory_document(traj: MotionTrajectory) -> dict:
    return {
        "schema": TRAJECTORY_SCHEMA,
        "slices": [
            {"index": i, "rot_deg": list(t.rotation_deg), "trans_mm": list(t.translation_mm)}
            for i, t in enumerate(traj.transforms)
        ],
        "interleaved": bool(traj.interleaved),
        "seed": traj.seed,
        "config": traj.config or {},
    }


def write_trajectory_json(traj: MotionTrajectory, path) -> None:
    _write_text(path, dumps(trajectory_document(traj)))


def parse_trajectory(doc: dict) -> MotionTrajectory:
    try:
        slices = doc["slices"]
        indices = sorted(int(s["index"]) for s in slices)
        if indices != list(range(len(slices))):
            raise CorruptFile("slice indices must cover 0..n-1 exactly once")
        ordered = sorted(slices, key=lambda s: int(s["index"]))
        params = [list(s["rot_deg"]) + list(s["trans_mm"]) for s in ordered]
        if any(len(p) != 6 for p in params):
            raise CorruptFile("each slice needs 3 rotations and 3 translations")
        return MotionTrajectory.from_params(
            np.asarray(params, dtype=np.float64).reshape(-1, 6),
            bool(doc.get("interleaved", False)),
            doc.get("seed"),
            doc.get("config"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"malformed trajectory document: {exc}") from exc


def read_trajectory_json(path) -> MotionTrajectory:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    return parse_trajectory(doc)
