"""
Planar projective helpers shared by the mesher, raster and composite modules.

Image coordinates are continuous with pixel ``(i, j)`` covering the square
``[i, i+1) x [j, j+1)``; its center sits at ``(i + 0.5, j + 0.5)``. Corner
quadruples are always ordered top-left, top-right, bottom-right, bottom-left.
"""
from __future__ import annotations

import numpy as np


def square_to_quad(corners) -> np.ndarray:
    """
    Projective map taking the unit square onto a quadrilateral.

    Closed form of the square-to-quad mapping (Heckbert, 1989). The square
    corners ``(0,0), (1,0), (1,1), (0,1)`` go to ``corners[0..3]``.

    Parameters
    ----------
    corners : array_like, shape (4, 2)

    Returns
    -------
    H : ndarray, shape (3, 3)
        Acts on column vectors ``(u, v, 1)``; ``H[2, 2] == 1``.
    """
    (x0, y0), (x1, y1), (x2, y2), (x3, y3) = np.asarray(corners, dtype=np.float64)
    sx = x0 - x1 + x2 - x3
    sy = y0 - y1 + y2 - y3
    dx1, dx2 = x1 - x2, x3 - x2
    dy1, dy2 = y1 - y2, y3 - y2
    den = dx1 * dy2 - dx2 * dy1
    if den == 0.0:
        raise ZeroDivisionError("corners do not span a quadrilateral")
    g = (sx * dy2 - dx2 * sy) / den
    h = (dx1 * sy - sx * dy1) / den
    return np.array([
        [x1 - x0 + g * x1, x3 - x0 + h * x3, x0],
        [y1 - y0 + g * y1, y3 - y0 + h * y3, y0],
        [g, h, 1.0],
    ])


def fit_homography(src, dst) -> np.ndarray:
    """Homography sending the four ``src`` corners onto the four ``dst`` corners."""
    H = square_to_quad(dst) @ np.linalg.inv(square_to_quad(src))
    return H / H[2, 2]


def apply_homography(H, points) -> np.ndarray:
    """Map an ``(N, 2)`` point array through ``H``."""
    pts = np.asarray(points, dtype=np.float64)
    x = H[0, 0] * pts[..., 0] + H[0, 1] * pts[..., 1] + H[0, 2]
    y = H[1, 0] * pts[..., 0] + H[1, 1] * pts[..., 1] + H[1, 2]
    w = H[2, 0] * pts[..., 0] + H[2, 1] * pts[..., 1] + H[2, 2]
    return np.stack([x / w, y / w], axis=-1)


def corners_degenerate(corners, tol: float = 1e-9) -> bool:
    """True when two corners coincide or any three are collinear."""
    c = np.asarray(corners, dtype=np.float64)
    scale = max(float(np.ptp(c, axis=0).max()), 1.0)
    for i in range(4):
        for j in range(i + 1, 4):
            if np.hypot(*(c[i] - c[j])) <= tol * scale:
                return True
    for skip in range(4):
        a, b, d = c[[k for k in range(4) if k != skip]]
        cross = (b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0])
        if abs(cross) <= tol * scale * scale:
            return True
    return False


def bilinear_sample(img: np.ndarray, x, y) -> np.ndarray:
    """
    Sample ``img`` at fractional *index* coordinates with edge clamping.

    ``x`` indexes columns and ``y`` rows, so ``(0, 0)`` is the center of the
    top-left pixel. Works for ``(H, W)`` and ``(H, W, C)`` arrays and returns
    float64 values with the shape of ``x`` (plus the channel axis).
    """
    h, w = img.shape[:2]
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, w - 1)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, h - 1)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    src = img.astype(np.float64, copy=False)
    top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def to_uint8(values) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)
