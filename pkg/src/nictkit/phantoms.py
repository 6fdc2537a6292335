"""Analytic test phantoms: Shepp-Logan, disks, and seeded ellipse slices."""

from __future__ import annotations

import numpy as np

from .geometry import CtImage

# (value, a, b, x0, y0, phi_deg) in the unit square [-1, 1]^2
_SHEPP_LOGAN = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
]


def _render_ellipses(side: int, ellipses, supersample: int = 2) -> np.ndarray:
    n = side * supersample
    coords = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    x, y = np.meshgrid(coords, coords)
    img = np.zeros((n, n), dtype=np.float64)
    for value, a, b, x0, y0, phi in ellipses:
        phi_r = np.deg2rad(phi)
        xr = (x - x0) * np.cos(phi_r) + (y - y0) * np.sin(phi_r)
        yr = -(x - x0) * np.sin(phi_r) + (y - y0) * np.cos(phi_r)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += value
    if supersample > 1:
        img = img.reshape(side, supersample, side, supersample).mean(axis=(1, 3))
    return img.astype(np.float32)


def shepp_logan(side: int, hu_scale: bool = True, supersample: int = 4) -> CtImage:
    """Modified Shepp-Logan phantom, compactly supported (zero background).

    With ``hu_scale`` (default) intensities [0, 1] are multiplied by 1000 so
    the phantom spans a realistic HU band (shell ~1000, soft tissue 100-400);
    otherwise raw [0, 1] intensities are returned.
    """
    img = _render_ellipses(side, _SHEPP_LOGAN, supersample=supersample)
    if hu_scale:
        img = img * 1000.0
    return CtImage(img)


def disk(side: int, radius: float, value: float = 1.0, supersample: int = 4) -> CtImage:
    """Centered uniform disk, antialiased by supersampling."""
    n = side * supersample
    c = (n - 1) / 2.0
    yy, xx = np.mgrid[0:n, 0:n]
    mask = ((xx - c) ** 2 + (yy - c) ** 2) <= (radius * supersample) ** 2
    img = mask.astype(np.float64) * value
    img = img.reshape(side, supersample, side, supersample).mean(axis=(1, 3))
    return CtImage(img.astype(np.float32))


def random_phantom(side: int, seed: int, hu_scale: bool = True) -> CtImage:
    """Seeded random ellipse slice, zero background.

    With ``hu_scale`` the body maps onto roughly [-400, 1000] HU.
    """
    rng = np.random.default_rng(seed)
    n_ell = int(rng.integers(4, 9))
    ellipses = [(1.0, 0.85, 0.85, 0.0, 0.0, 0.0)]
    for _ in range(n_ell):
        value = float(rng.uniform(-0.4, 0.6))
        a = float(rng.uniform(0.08, 0.45))
        b = float(rng.uniform(0.08, 0.45))
        x0 = float(rng.uniform(-0.45, 0.45))
        y0 = float(rng.uniform(-0.45, 0.45))
        phi = float(rng.uniform(0.0, 180.0))
        ellipses.append((value, a, b, x0, y0, phi))
    img = _render_ellipses(side, ellipses).astype(np.float64)
    if hu_scale:
        img = img * 1000.0
    return CtImage(np.clip(img, -1024.0, 3071.0).astype(np.float32))
