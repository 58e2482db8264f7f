"""Motion indicators (CP, SVD-RSS, SVD-FS) and minimum-motion reference selection."""

from __future__ import annotations

import enum
import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cpd import AlsConfig, check_rank, cp_als, cp_relative_error
from .errors import (
    EmptyMask,
    InsufficientStacks,
    InvalidParameter,
    RankTooLarge,
    StackError,
)
from .linalg import tail_errors
from .volume import Mask, Orientation, Volume, check_pair, reslice_array, resample_isotropic


class Method(str, enum.Enum):
    CP = "CP"
    SVD_RSS = "SvdRss"
    SVD_FS = "SvdFs"

    @classmethod
    def parse(cls, name) -> "Method":
        if isinstance(name, Method):
            return name
        key = str(name).lower().replace("_", "-")
        aliases = {"cp": cls.CP, "svd-rss": cls.SVD_RSS, "svdrss": cls.SVD_RSS,
                   "svd-fs": cls.SVD_FS, "svdfs": cls.SVD_FS}
        if key not in aliases:
            raise InvalidParameter(f"unknown method {name!r}")
        return aliases[key]

    @property
    def cli_name(self) -> str:
        return {"CP": "cp", "SvdRss": "svd-rss", "SvdFs": "svd-fs"}[self.value]


DEFAULT_RANK = {Method.CP: 25, Method.SVD_RSS: 5, Method.SVD_FS: 5}


@dataclass(frozen=True)
class AssessConfig:
    method: Method = Method.CP
    rank: int | None = None  # None -> per-method default
    target_spacing: float | None = None  # None -> smallest input spacing
    als: AlsConfig = field(default_factory=AlsConfig)

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        if self.rank is not None and self.rank < 1:
            raise InvalidParameter(f"rank must be >= 1, got {self.rank}")

    @property
    def effective_rank(self) -> int:
        return self.rank if self.rank is not None else DEFAULT_RANK[self.method]


@dataclass(frozen=True)
class MotionReport:
    method: Method
    mi: float
    rank_used: int
    stack_id: str
    elapsed_ms: float
    effective_norm: float
    relative_error: float

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "mi": self.mi,
            "rank_used": self.rank_used,
            "stack_id": self.stack_id,
            "elapsed_ms": self.elapsed_ms,
            "effective_norm": self.effective_norm,
            "relative_error": self.relative_error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MotionReport":
        return cls(
            Method.parse(d["method"]),
            float(d["mi"]),
            int(d["rank_used"]),
            str(d["stack_id"]),
            float(d["elapsed_ms"]),
            float(d["effective_norm"]),
            float(d.get("relative_error", float("nan"))),
        )


def _masked(v: Volume, m: Mask) -> np.ndarray:
    return v.data * m.data


def _require_mask(m: Mask) -> None:
    if not np.any(m.data):
        raise EmptyMask("mask has no positive voxels")


def content_seed(v: Volume, m: Mask) -> int:
    """Stable 63-bit seed from the raster contents."""
    h = hashlib.sha256()
    h.update(np.asarray(v.dims, dtype="<u4").tobytes())
    h.update(np.ascontiguousarray(v.data, dtype="<f8").tobytes())
    h.update(np.packbits(m.data).tobytes())
    return int.from_bytes(h.digest()[:8], "little") >> 1


def rss_error_terms(data: np.ndarray, mask: np.ndarray, rank: int):
    """Per-plane relative errors and effective areas along the three axes."""
    terms = []
    for axis in range(3):
        planes = reslice_array(data, axis)
        areas = np.count_nonzero(reslice_array(mask, axis), axis=(1, 2))
        terms.append((tail_errors(planes, rank), areas))
    return terms


def mi_svd_rss(stack: Volume, m: Mask, cfg: AssessConfig = AssessConfig(Method.SVD_RSS),
               stack_id: str = "stack") -> MotionReport:
    """Sum over all re-sliced planes of (rank-r relative error) / (effective area)."""
    t0 = time.perf_counter()
    check_pair(stack, m)
    _require_mask(m)
    r = cfg.effective_rank
    iso, im = resample_isotropic(stack, m, cfg.target_spacing)
    _require_mask(im)
    limit = min(min(a, b) for a, b in ((iso.dims[1], iso.dims[2]), (iso.dims[0], iso.dims[2]),
                                        (iso.dims[0], iso.dims[1])))
    if r > limit:
        raise RankTooLarge(f"rank {r} exceeds the re-sliced image rows ({limit})")
    mi = 0.0
    total_err = 0.0
    s_sum = 0
    for errs, areas in rss_error_terms(_masked(iso, im), im.data, r):
        used = areas > 0
        mi += float(np.sum(errs[used] / areas[used]))
        total_err += float(np.sum(errs[used]))
        s_sum += int(np.sum(areas[used]))
    return MotionReport(Method.SVD_RSS, mi, r, stack_id, (time.perf_counter() - t0) * 1e3,
                        float(s_sum), total_err)


def cp_error(iso: Volume, im: Mask, als: AlsConfig, init=None):
    """Relative CP error of the masked isotropic tensor, plus the fitted model."""
    x = _masked(iso, im)
    check_rank(x.shape, als.rank)
    model, _ = cp_als(x, als, init)
    return cp_relative_error(x, model), model


def mi_cp(stack: Volume, m: Mask, cfg: AssessConfig = AssessConfig(Method.CP),
          stack_id: str = "stack") -> MotionReport:
    """Relative CP reconstruction error divided by the effective volume."""
    t0 = time.perf_counter()
    check_pair(stack, m)
    _require_mask(m)
    iso, im = resample_isotropic(stack, m, cfg.target_spacing)
    _require_mask(im)
    seed = content_seed(iso, im) ^ cfg.als.init_seed
    als = replace(cfg.als, rank=cfg.effective_rank, init_seed=seed)
    err, _ = cp_error(iso, im, als)
    vol = int(np.count_nonzero(im.data))
    return MotionReport(Method.CP, err / vol, als.rank, stack_id,
                        (time.perf_counter() - t0) * 1e3, float(vol), err)


def flatten_axis(v: Volume) -> int:
    if v.orientation is not Orientation.ISOTROPIC:
        return v.orientation.slice_axis
    # thickest axis is the through-plane one; ties resolve to z
    sp = np.asarray(v.spacing)
    return int(np.flatnonzero(sp == sp.max())[-1])


def mi_svd_fs(stack: Volume, m: Mask, cfg: AssessConfig = AssessConfig(Method.SVD_FS),
              stack_id: str = "stack") -> MotionReport:
    """Rank-r error of the (slices x in-plane voxels) matrix over the raw effective volume."""
    t0 = time.perf_counter()
    check_pair(stack, m)
    _require_mask(m)
    axis = flatten_axis(stack)
    n = stack.dims[axis]
    if n < 2:
        raise InvalidParameter("flattened-stack SVD needs at least 2 slices")
    D = reslice_array(_masked(stack, m), axis).reshape(n, -1)
    r = cfg.effective_rank
    if r > min(D.shape):
        raise RankTooLarge(f"rank {r} exceeds min{D.shape}")
    err = float(tail_errors(D[None], r)[0])
    vol = int(np.count_nonzero(m.data))
    return MotionReport(Method.SVD_FS, err / vol, r, stack_id,
                        (time.perf_counter() - t0) * 1e3, float(vol), err)


_DISPATCH = {Method.CP: mi_cp, Method.SVD_RSS: mi_svd_rss, Method.SVD_FS: mi_svd_fs}


def assess(stack: Volume, m: Mask, cfg: AssessConfig, stack_id: str = "stack") -> MotionReport:
    return _DISPATCH[cfg.method](stack, m, cfg, stack_id)


def worker_count() -> int:
    raw = os.environ.get("STACKSELECT_THREADS", "0").strip() or "0"
    n = int(raw)
    return n if n > 0 else (os.cpu_count() or 1)


def select_reference(stacks, cfg: AssessConfig, workers: int | None = None):
    """Pick the stack with the smallest motion indicator.

    ``stacks`` is a sequence of (Volume, Mask, stack_id). Ties go to the
    earliest stack. Returns the winning id and every report in input order.
    """
    stacks = list(stacks)
    if len(stacks) < 2:
        raise InsufficientStacks(f"need at least 2 stacks, got {len(stacks)}")

    def run(item):
        v, m, sid = item
        try:
            return assess(v, m, cfg, sid)
        except Exception as exc:
            raise StackError(sid, exc) from exc

    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(stacks))) as pool:
            reports = list(pool.map(run, stacks))
    else:
        reports = [run(item) for item in stacks]
    best = min(range(len(reports)), key=lambda i: (reports[i].mi, i))
    return reports[best].stack_id, reports
