"""2D parallel-beam projection, adjoint backprojection, ramp filtering and FBP.

The forward projector samples each ray with bilinear interpolation at a fixed
step of 0.5 pixel and scales by the step length; the backprojector scatters
with exactly the same indices and weights, so the pair is an exact discrete
adjoint up to float accumulation order.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import InvalidGeometry, ShapeMismatch

RAY_STEP = 0.5  # sampling step along rays, in pixels
HU_MIN = -1024.0
HU_MAX = 3071.0
HU_RANGE = HU_MAX - HU_MIN  # 4095


@dataclass(frozen=True, eq=False)
class ProjectionGeometry:
    """Angular/detector layout of a parallel-beam scan.

    ``view_angles`` (degrees) is the source of truth for projection
    directions; for geometries built by :func:`make_geometry` it is the
    uniform grid over ``[angle_start_deg, angle_start_deg + angle_range_deg)``.
    Degradation operators carry subsets of a parent's angles here.
    """

    num_views: int
    num_detectors: int
    angle_start_deg: float
    angle_range_deg: float
    detector_spacing: float
    view_angles: np.ndarray = field(repr=False)

    def __post_init__(self):
        angles = np.asarray(self.view_angles, dtype=np.float64)
        object.__setattr__(self, "view_angles", angles)
        if angles.shape != (self.num_views,):
            raise InvalidGeometry(
                f"view_angles length {angles.shape} != num_views {self.num_views}"
            )
        if self.num_views >= 2 and not np.all(np.diff(angles) > 0):
            raise InvalidGeometry("view_angles must be strictly increasing")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_views, self.num_detectors)

    def _cache_key(self) -> tuple:
        return (
            self.num_detectors,
            float(self.detector_spacing),
            self.view_angles.tobytes(),
        )


def make_geometry(
    num_views: int,
    num_detectors: int,
    angle_start_deg: float = 0.0,
    angle_range_deg: float = 180.0,
    detector_spacing: float = 1.0,
) -> ProjectionGeometry:
    """Build a uniform geometry: ``num_views`` angles equally spaced over
    ``[angle_start_deg, angle_start_deg + angle_range_deg)``."""
    if num_views < 1 or num_detectors < 1:
        raise InvalidGeometry(
            f"counts must be >= 1, got num_views={num_views}, num_detectors={num_detectors}"
        )
    if not (0.0 < angle_range_deg <= 180.0):
        raise InvalidGeometry(f"angle_range_deg must be in (0, 180], got {angle_range_deg}")
    if detector_spacing <= 0:
        raise InvalidGeometry(f"detector_spacing must be > 0, got {detector_spacing}")
    step = angle_range_deg / num_views
    angles = angle_start_deg + step * np.arange(num_views, dtype=np.float64)
    return ProjectionGeometry(
        num_views=int(num_views),
        num_detectors=int(num_detectors),
        angle_start_deg=float(angle_start_deg),
        angle_range_deg=float(angle_range_deg),
        detector_spacing=float(detector_spacing),
        view_angles=angles,
    )


def default_geometry(side: int, num_views: int = 720) -> ProjectionGeometry:
    """Full-coverage default: 180 degrees, detector row spanning the diagonal
    (ceil(sqrt(2)*side) rounded up to odd), unit spacing."""
    ndet = int(np.ceil(np.sqrt(2.0) * side))
    if ndet % 2 == 0:
        ndet += 1
    return make_geometry(num_views, ndet, 0.0, 180.0, 1.0)


@dataclass(frozen=True, eq=False)
class CtImage:
    """2D slice of attenuation values (HU on ingest paths)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 2:
            raise ShapeMismatch(f"CtImage expects 2D values, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("CtImage values must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @classmethod
    def ingest(cls, values) -> "CtImage":
        """Build an image from external data, clipping HU to [-1024, 3071]."""
        arr = np.asarray(values, dtype=np.float32)
        arr = np.nan_to_num(arr, nan=HU_MIN, posinf=HU_MAX, neginf=HU_MIN)
        return cls(np.clip(arr, HU_MIN, HU_MAX))


@dataclass(frozen=True, eq=False)
class Sinogram:
    """Line-integral array [num_views x num_detectors] plus its geometry."""

    geometry: ProjectionGeometry
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.shape != self.geometry.shape:
            raise ShapeMismatch(
                f"sinogram shape {arr.shape} != geometry shape {self.geometry.shape}"
            )
        if not np.isfinite(arr).all():
            raise ValueError("Sinogram values must be finite")
        object.__setattr__(self, "values", arr)


# ---------------------------------------------------------------------------
# Ray sampling tables
#
# For one view the sample points form a (ndet, nsamp) grid; each point takes
# bilinear weights on its 4 surrounding pixels.  The tables (flat pixel index,
# weight including the step length) are shared verbatim by the forward gather
# and the adjoint scatter.
# ---------------------------------------------------------------------------

_CACHE_MAX_ENTRIES = 120_000_000  # total cached (idx, weight) pairs across geometries
_table_cache: "OrderedDict[tuple, list]" = OrderedDict()


def _view_tables(geom: ProjectionGeometry, side: int) -> list:
    key = (side,) + geom._cache_key()
    if key in _table_cache:
        _table_cache.move_to_end(key)
        return _table_cache[key]
    tables = [_build_view_table(geom, side, v) for v in range(geom.num_views)]
    total = sum(t[0].size for t in tables)
    if total <= _CACHE_MAX_ENTRIES:
        while (
            _table_cache
            and sum(sum(t[0].size for t in ts) for ts in _table_cache.values()) + total
            > _CACHE_MAX_ENTRIES
        ):
            _table_cache.popitem(last=False)
        _table_cache[key] = tables
    return tables


def _build_view_table(geom: ProjectionGeometry, side: int, view: int):
    theta = np.deg2rad(geom.view_angles[view])
    dx, dy = np.float32(np.cos(theta)), np.float32(np.sin(theta))
    ux, uy = -dy, dx  # detector axis, perpendicular to the ray direction
    c = np.float32((side - 1) / 2.0)

    ndet = geom.num_detectors
    s = ((np.arange(ndet) - (ndet - 1) / 2.0) * geom.detector_spacing).astype(np.float32)
    ray_len = np.sqrt(2.0) * side + 2.0
    nsamp = int(np.ceil(ray_len / RAY_STEP))
    t = ((np.arange(nsamp) - (nsamp - 1) / 2.0) * RAY_STEP).astype(np.float32)

    x = c + s[:, None] * ux + t[None, :] * dx  # (ndet, nsamp)
    y = c + s[:, None] * uy + t[None, :] * dy

    ix0 = np.floor(x).astype(np.int32)
    iy0 = np.floor(y).astype(np.int32)
    fx = x - ix0
    fy = y - iy0
    valid = (ix0 >= 0) & (ix0 <= side - 2) & (iy0 >= 0) & (iy0 <= side - 2)

    # drop sample columns that miss the image for every detector
    keep = valid.any(axis=0)
    ix0, iy0, fx, fy, valid = (a[:, keep] for a in (ix0, iy0, fx, fy, valid))
    nkeep = ix0.shape[1]

    gx = 1.0 - fx
    gy = 1.0 - fy
    w = np.empty((ndet, nkeep, 4), dtype=np.float32)
    w[..., 0] = gx * gy
    w[..., 1] = fx * gy
    w[..., 2] = gx * fy
    w[..., 3] = fx * fy
    w *= np.float32(RAY_STEP)
    w[~valid] = 0.0

    base = iy0 * side + ix0
    base[~valid] = 0
    idx = np.empty((ndet, nkeep, 4), dtype=np.int32)
    idx[..., 0] = base
    idx[..., 1] = base + 1
    idx[..., 2] = base + side
    idx[..., 3] = base + side + 1
    return idx.reshape(ndet, -1), w.reshape(ndet, -1)


def forward_project(image: CtImage, geom: ProjectionGeometry) -> Sinogram:
    """Line integrals of ``image`` along every (view, detector) ray."""
    return Sinogram(geom, project_array(image.values, geom))


def project_array(values: np.ndarray, geom: ProjectionGeometry) -> np.ndarray:
    """forward_project on a bare array; returns the sinogram array."""
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ShapeMismatch(f"projection needs a square image, got {values.shape}")
    side = values.shape[0]
    flat = values.ravel()
    out = np.empty(geom.shape, dtype=np.float32)
    for v, (idx, w) in enumerate(_view_tables(geom, side)):
        contrib = flat[idx].astype(np.float64) * w
        out[v] = contrib.sum(axis=1)
    return out


def back_project(sino: Sinogram, side: Optional[int] = None) -> CtImage:
    """Unfiltered adjoint of :func:`forward_project`."""
    return CtImage(backproject_array(sino.values, sino.geometry, side))


def backproject_array(
    values: np.ndarray, geom: ProjectionGeometry, side: Optional[int] = None
) -> np.ndarray:
    """back_project on a bare array; returns the image array."""
    values = np.asarray(values, dtype=np.float32)
    if values.shape != geom.shape:
        raise ShapeMismatch(f"sinogram shape {values.shape} != geometry {geom.shape}")
    if side is None:
        side = geom.num_detectors
    acc = np.zeros(side * side, dtype=np.float64)
    for v, (idx, w) in enumerate(_view_tables(geom, side)):
        weights = w.astype(np.float64) * values[v].astype(np.float64)[:, None]
        acc += np.bincount(idx.ravel(), weights=weights.ravel(), minlength=side * side)
    return acc.reshape(side, side).astype(np.float32)


# ---------------------------------------------------------------------------
# Ramp filtering and FBP
# ---------------------------------------------------------------------------


def _fft_length(num_detectors: int) -> int:
    n = 1
    while n < 2 * num_detectors:
        n *= 2
    return n


def _ramp_response(pad: int, spacing: float, window: str) -> np.ndarray:
    """Frequency response of the band-limited ramp (discrete Ram-Lak kernel)."""
    m = np.fft.fftfreq(pad, d=1.0) * pad  # 0, 1, ..., -1 in fft order
    m = np.rint(m).astype(np.int64)
    h = np.zeros(pad, dtype=np.float64)
    h[m == 0] = 1.0 / (4.0 * spacing**2)
    odd = (m % 2) != 0
    h[odd] = -1.0 / (np.pi**2 * m[odd] ** 2 * spacing**2)
    resp = np.fft.rfft(h).real
    resp[0] = 0.0  # exact DC kill; the truncated kernel leaves a small residual
    if window == "hann":
        k = np.arange(resp.size)
        resp *= 0.5 * (1.0 + np.cos(np.pi * k / (resp.size - 1)))
    elif window != "ram-lak":
        raise ValueError(f"unknown filter window {window!r}")
    return resp


def ramp_filter(sino: Sinogram, window: str = "ram-lak") -> Sinogram:
    """Row-wise ramp filtering in the frequency domain.

    Output approximates the continuous convolution of each detector row with
    the ramp kernel (includes the detector-spacing scale).
    """
    geom = sino.geometry
    if geom.num_detectors < 2:
        raise ShapeMismatch("ramp_filter needs num_detectors >= 2")
    pad = _fft_length(geom.num_detectors)
    resp = _ramp_response(pad, geom.detector_spacing, window)
    rows = np.zeros((geom.num_views, pad), dtype=np.float64)
    rows[:, : geom.num_detectors] = sino.values
    filt = np.fft.irfft(np.fft.rfft(rows, axis=1) * resp, n=pad, axis=1)
    out = filt[:, : geom.num_detectors] * geom.detector_spacing
    return Sinogram(geom, out.astype(np.float32))


def _angular_step_rad(geom: ProjectionGeometry) -> float:
    # pi/num_views for full-range uniform geometries; the actual angular step
    # for degraded subsets (which stay uniform).
    if geom.num_views >= 2:
        step_deg = float(geom.view_angles[1] - geom.view_angles[0])
    else:
        step_deg = geom.angle_range_deg
    return np.deg2rad(step_deg)


def fbp(sino: Sinogram, window: str = "ram-lak", side: Optional[int] = None) -> CtImage:
    """Filtered backprojection: ramp filter, adjoint, angular weighting."""
    filtered = ramp_filter(sino, window)
    img = backproject_array(filtered.values, sino.geometry, side)
    scale = _angular_step_rad(sino.geometry) * sino.geometry.detector_spacing
    return CtImage(img * np.float32(scale))


def _subset_geometry(geom: ProjectionGeometry, angles: np.ndarray) -> ProjectionGeometry:
    """Geometry carrying a subset of a parent's view angles (used by nict_sim)."""
    return replace(
        geom,
        num_views=len(angles),
        view_angles=np.asarray(angles, dtype=np.float64),
    )
