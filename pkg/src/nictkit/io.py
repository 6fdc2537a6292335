"""Binary container formats and atomic file writes.

All integers and floats are little-endian. Formats:

* ``NICTIMG1`` -- u32 height, u32 width, f32 row-major HU payload.
* ``NICTSIN1`` -- u32 num_views, u32 num_detectors, f32 angle_start_deg,
  f32 angle_range_deg, f32 detector_spacing, f32 row-major payload.
* ``NICTVOL1`` -- u32 num_slices, u32 height, u32 width, slices row-major.
* ``NICTPR01`` -- NICTIMG1 blob (nict), NICTIMG1 blob (ict), u8 setting kind,
  f32 setting parameter, u64 seed.
* ``NICTCKPT`` -- u32 entry count; per entry u16 name length, UTF-8 name,
  u8 rank, rank x u32 dims, f32 payload. Entries sorted by name.
* ``NICTLORA`` -- u32 rank, f32 alpha, 32-byte SHA-256 of the base
  checkpoint, then a NICTCKPT-style entry table of bypass tensors.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import CorruptVolume, InvalidGeometry
from .geometry import CtImage, ProjectionGeometry, Sinogram, make_geometry

MAGIC_IMAGE = b"NICTIMG1"
MAGIC_SINO = b"NICTSIN1"
MAGIC_VOLUME = b"NICTVOL1"
MAGIC_PAIR = b"NICTPR01"
MAGIC_CKPT = b"NICTCKPT"
MAGIC_LORA = b"NICTLORA"


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def atomic_write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(path, text.encode("utf-8"))


# -- images -----------------------------------------------------------------


def image_to_bytes(image: CtImage) -> bytes:
    head = MAGIC_IMAGE + struct.pack("<II", image.height, image.width)
    return head + image.values.astype("<f4").tobytes()


def image_from_bytes(blob: bytes, offset: int = 0) -> tuple[CtImage, int]:
    """Parse one NICTIMG1 blob, returning the image and the next offset."""
    if blob[offset : offset + 8] != MAGIC_IMAGE:
        raise CorruptVolume("bad NICTIMG1 magic")
    h, w = struct.unpack_from("<II", blob, offset + 8)
    start = offset + 16
    end = start + 4 * h * w
    if end > len(blob):
        raise CorruptVolume("truncated NICTIMG1 payload")
    values = np.frombuffer(blob[start:end], dtype="<f4").reshape(h, w)
    return CtImage.ingest(values), end


def write_image(path, image: CtImage) -> None:
    atomic_write_bytes(path, image_to_bytes(image))


def read_image(path) -> CtImage:
    image, _ = image_from_bytes(Path(path).read_bytes())
    return image


# -- sinograms ---------------------------------------------------------------


def write_sinogram(path, sino: Sinogram) -> None:
    geom = sino.geometry
    if geom.num_views >= 2:
        steps = np.diff(geom.view_angles)
        if np.max(np.abs(steps - steps[0])) > 1e-4:
            raise InvalidGeometry("only uniformly spaced geometries are serializable")
        span = float(steps[0]) * geom.num_views
    else:
        span = geom.angle_range_deg
    if span > 180.0 + 1e-6:
        raise InvalidGeometry(f"serialized angle range {span:.4f} exceeds 180 degrees")
    head = MAGIC_SINO + struct.pack(
        "<IIfff",
        geom.num_views,
        geom.num_detectors,
        float(geom.view_angles[0]),
        span,
        geom.detector_spacing,
    )
    atomic_write_bytes(path, head + sino.values.astype("<f4").tobytes())


def read_sinogram(path) -> Sinogram:
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC_SINO:
        raise CorruptVolume("bad NICTSIN1 magic")
    nv, nd, start, rng, spacing = struct.unpack_from("<IIfff", blob, 8)
    values = np.frombuffer(blob[28 : 28 + 4 * nv * nd], dtype="<f4").reshape(nv, nd)
    geom = make_geometry(nv, nd, start, rng, spacing)
    return Sinogram(geom, values)


# -- volumes -----------------------------------------------------------------


def write_volume(path, slices: np.ndarray) -> None:
    arr = np.asarray(slices, dtype="<f4")
    if arr.ndim != 3:
        raise CorruptVolume(f"volume must be (slices, h, w), got {arr.shape}")
    head = MAGIC_VOLUME + struct.pack("<III", *arr.shape)
    atomic_write_bytes(path, head + arr.tobytes())


def read_volume(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC_VOLUME:
        raise CorruptVolume(f"bad NICTVOL1 magic in {path}")
    n, h, w = struct.unpack_from("<III", blob, 8)
    expect = 20 + 4 * n * h * w
    if len(blob) < expect:
        raise CorruptVolume(f"truncated NICTVOL1 payload in {path}")
    return np.frombuffer(blob[20:expect], dtype="<f4").reshape(n, h, w)


# -- checkpoints ---------------------------------------------------------------


def _entry_table(named: dict[str, np.ndarray]) -> bytes:
    out = [struct.pack("<I", len(named))]
    for name in sorted(named):
        arr = np.asarray(named[name], dtype="<f4")  # tobytes() emits C order
        enc = name.encode("utf-8")
        out.append(struct.pack("<H", len(enc)))
        out.append(enc)
        out.append(struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def _parse_entry_table(blob: bytes, offset: int) -> dict[str, np.ndarray]:
    (count,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    named = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset : offset + nlen].decode("utf-8")
        offset += nlen
        (rank,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        dims = struct.unpack_from(f"<{rank}I", blob, offset)
        offset += 4 * rank
        size = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(blob[offset : offset + 4 * size], dtype="<f4")
        offset += 4 * size
        named[name] = arr.reshape(dims).copy()
    return named


def checkpoint_to_bytes(named: dict[str, np.ndarray]) -> bytes:
    return MAGIC_CKPT + _entry_table(named)


def write_checkpoint(path, named: dict[str, np.ndarray]) -> None:
    atomic_write_bytes(path, checkpoint_to_bytes(named))


def read_checkpoint(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC_CKPT:
        raise CorruptVolume(f"bad NICTCKPT magic in {path}")
    return _parse_entry_table(blob, 8)


def write_lora_checkpoint(path, rank: int, alpha: float, base_hash: bytes,
                          bypasses: dict[str, np.ndarray]) -> None:
    head = MAGIC_LORA + struct.pack("<If", rank, alpha) + base_hash
    atomic_write_bytes(path, head + _entry_table(bypasses))


def read_lora_checkpoint(path):
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC_LORA:
        raise CorruptVolume(f"bad NICTLORA magic in {path}")
    rank, alpha = struct.unpack_from("<If", blob, 8)
    base_hash = blob[16:48]
    return rank, alpha, base_hash, _parse_entry_table(blob, 48)


def checkpoint_hash(named: dict[str, np.ndarray]) -> bytes:
    return hashlib.sha256(checkpoint_to_bytes(named)).digest()
