"""
Put a rendered photo layer back into its source frame.

Deformation and projection change the rendered photo's size, so the layer is
first refitted onto the annotated quad so the synthetic photo hides the
original print: either by the print's own perspective followed by a uniform
scale about the quad center (``realign_cover``, keeps the rendered pose) or
by the homography that pins the four rendered corners onto the quad corners
(``realign_corners``).
``feather_blend`` then pastes it with a Gaussian alpha ramp across the
coverage boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import DegenerateCorners
from .geometry import apply_homography, bilinear_sample, corners_degenerate, fit_homography, to_uint8
from .raster import RenderLayer


REALIGN_MODES = ("cover", "corners", "off")


@dataclass(frozen=True)
class CompositeConfig:
    """
    ``realign`` selects how the layer is fitted back onto the quad:
    ``"cover"`` scales it uniformly about the quad center until it covers
    the quad, ``"corners"`` warps its corners onto the quad corners, and
    ``"off"`` pastes it as rendered. Booleans map to ``"cover"``/``"off"``.
    """

    feather_sigma: float = 2.0
    feather_band: Optional[float] = None  # None means 3 * sigma
    realign: str = "cover"

    def __post_init__(self):
        mode = self.realign
        if isinstance(mode, bool):
            mode = "cover" if mode else "off"
        mode = {"on": "cover", "true": "cover", "false": "off"}.get(str(mode).lower(), str(mode).lower())
        if mode not in REALIGN_MODES:
            raise ValueError(f"realign must be one of {REALIGN_MODES}, got {self.realign!r}")
        object.__setattr__(self, "realign", mode)
        if not self.feather_sigma >= 0:
            raise ValueError(f"feather_sigma must be >= 0, got {self.feather_sigma}")
        if self.feather_band is not None and not self.feather_band >= 0:
            raise ValueError(f"feather_band must be >= 0, got {self.feather_band}")

    @property
    def band(self) -> float:
        return 3.0 * self.feather_sigma if self.feather_band is None else float(self.feather_band)


def _warp_bbox(layer: RenderLayer, H, target) -> tuple:
    ox, oy = layer.origin
    rows, cols = np.nonzero(layer.coverage)
    tgt = np.asarray(target, dtype=np.float64)
    lo, hi = tgt.min(axis=0), tgt.max(axis=0)
    if rows.size:
        box = np.array([[cols.min(), rows.min()], [cols.max() + 1, rows.min()],
                        [cols.max() + 1, rows.max() + 1], [cols.min(), rows.max() + 1]], dtype=np.float64)
        box += (ox, oy)
        w = H[2, 0] * box[:, 0] + H[2, 1] * box[:, 1] + H[2, 2]
        if np.all(w > 0):
            warped = apply_homography(H, box)
            # keep the frame sane if the warp is close to a vanishing line
            span = max(layer.width, layer.height, *(hi - lo))
            lo = np.maximum(np.minimum(lo, warped.min(axis=0)), lo - span)
            hi = np.minimum(np.maximum(hi, warped.max(axis=0)), hi + span)
    lo = np.floor(lo).astype(int) - 1
    hi = np.ceil(hi).astype(int) + 1
    return int(lo[0]), int(lo[1]), int(hi[0] - lo[0]), int(hi[1] - lo[1])


def warp_layer(layer: RenderLayer, H, target) -> RenderLayer:
    """
    Resample ``layer`` through the image-space homography ``H``.

    Color and depth are interpolated bilinearly, weighted by coverage so
    uncovered texels never bleed in; a warped pixel is covered when at least
    half of its interpolation weight falls on covered texels. ``target``
    (points in image space) is guaranteed to lie inside the output frame.
    """
    Hinv = np.linalg.inv(H)
    x0, y0, W, Hh = _warp_bbox(layer, H, target)

    gy, gx = np.mgrid[0:Hh, 0:W]
    centers = np.stack([gx.ravel() + x0 + 0.5, gy.ravel() + y0 + 0.5], axis=1)
    back = apply_homography(Hinv, centers)
    # +1 for the zero border added below
    qx = (back[:, 0] - layer.origin[0] - 0.5 + 1.0).reshape(Hh, W)
    qy = (back[:, 1] - layer.origin[1] - 0.5 + 1.0).reshape(Hh, W)

    cov = np.pad(layer.coverage.astype(np.float64), 1)
    color = np.pad(layer.color.astype(np.float64) * cov[1:-1, 1:-1, None], ((1, 1), (1, 1), (0, 0)))
    depth = np.pad(np.where(layer.coverage, layer.zbuffer, 0.0), 1)

    wcov = bilinear_sample(cov, qx, qy)
    covered = wcov >= 0.5
    out_color = np.zeros((Hh, W, 3), dtype=np.uint8)
    out_z = np.full((Hh, W), np.inf)
    if covered.any():
        norm = wcov[covered]
        out_color[covered] = to_uint8(bilinear_sample(color, qx[covered], qy[covered]) / norm[:, None])
        out_z[covered] = bilinear_sample(depth, qx[covered], qy[covered]) / norm
    return RenderLayer(out_color, covered, out_z, (x0, y0))


def corner_homography(projected_corners, quad) -> np.ndarray:
    src = np.asarray(projected_corners, dtype=np.float64)
    dst = np.asarray(getattr(quad, "corners", quad), dtype=np.float64)
    if src.shape != (4, 2) or corners_degenerate(src):
        raise DegenerateCorners("projected corners are coincident or collinear")
    return fit_homography(src, dst)


def realign_corners(layer: RenderLayer, projected_corners, quad) -> RenderLayer:
    """Warp ``layer`` so the projected photo corners land on the quad corners."""
    H = corner_homography(projected_corners, quad)
    dst = np.asarray(getattr(quad, "corners", quad), dtype=np.float64)
    if np.max(np.abs(np.asarray(projected_corners, dtype=np.float64) - dst)) <= 1e-9:
        return layer
    return warp_layer(layer, H, dst)


def _ray_exit(center, dirs, outline) -> np.ndarray:
    """Distance from ``center`` along unit ``dirs`` to the first outline crossing."""
    a = np.asarray(outline, dtype=np.float64)
    b = np.roll(a, -1, axis=0)
    e = b - a  # (S, 2)
    w = a - center  # (S, 2)
    # center + t*d = a + s*e  ->  t*d - s*e = w
    den = dirs[:, None, 0] * (-e[None, :, 1]) - dirs[:, None, 1] * (-e[None, :, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[None, :, 0] * (-e[None, :, 1]) - w[None, :, 1] * (-e[None, :, 0])) / den
        s = (dirs[:, None, 0] * w[None, :, 1] - dirs[:, None, 1] * w[None, :, 0]) / den
    hit = (den != 0) & (t > 0) & (s >= 0) & (s <= 1)
    return np.where(hit, t, np.inf).min(axis=1)


def cover_scale(outline, quad, center=None, margin: float = 0.5, samples: int = 64) -> float:
    """
    Smallest uniform scale about ``center`` making ``outline`` contain the
    quad grown by ``margin`` pixels.

    The outline must be star-shaped around ``center``; the quad boundary is
    checked at ``samples`` points per edge.
    """
    q = np.asarray(getattr(quad, "corners", quad), dtype=np.float64)
    c = np.asarray(q.mean(axis=0) if center is None else center, dtype=np.float64)
    t = np.linspace(0.0, 1.0, samples, endpoint=False)[:, None]
    pts = np.concatenate([q[i] + t * (q[(i + 1) % 4] - q[i]) for i in range(4)])
    d = pts - c
    r = np.hypot(d[:, 0], d[:, 1])
    keep = r > 0
    dirs = d[keep] / r[keep, None]
    reach = _ray_exit(c, dirs, outline)
    if not np.all(np.isfinite(reach)):
        raise DegenerateCorners("rendered outline does not surround the quad center")
    return float(np.max((r[keep] + margin) / reach))


def realign_cover(layer: RenderLayer, outline, quad, center=None, base=None) -> RenderLayer:
    """
    Fit ``layer`` onto the quad without undoing its pose.

    ``base`` is the homography taking the flat, unposed render onto the
    quad (the print's own perspective in the source photo); it is applied
    first, then the smallest uniform scale about the quad center that
    makes the layer cover the whole quad. Both go through one resampling.
    """
    q = np.asarray(getattr(quad, "corners", quad), dtype=np.float64)
    c = q.mean(axis=0) if center is None else np.asarray(center, dtype=np.float64)
    B = np.eye(3) if base is None else np.asarray(base, dtype=np.float64)
    outline = apply_homography(B, outline)
    k = cover_scale(outline, q, c, margin=0.0)
    if abs(k - 1.0) > 1e-9:
        k = cover_scale(outline, q, c)
    else:
        k = 1.0
    H = np.array([[k, 0.0, (1.0 - k) * c[0]], [0.0, k, (1.0 - k) * c[1]], [0.0, 0.0, 1.0]]) @ B
    if np.max(np.abs(H / H[2, 2] - np.eye(3))) <= 1e-12:
        return layer
    return warp_layer(layer, H, q)


def paste_layer(shape, layer: RenderLayer):
    """Full-frame ``(coverage, color)`` of ``layer`` clipped to an ``(H, W)`` frame."""
    H, W = shape[:2]
    cov = np.zeros((H, W), dtype=bool)
    col = np.zeros((H, W, 3), dtype=np.uint8)
    ox, oy = layer.origin
    x0, y0 = max(ox, 0), max(oy, 0)
    x1, y1 = min(ox + layer.width, W), min(oy + layer.height, H)
    if x0 < x1 and y0 < y1:
        cov[y0:y1, x0:x1] = layer.coverage[y0 - oy:y1 - oy, x0 - ox:x1 - ox]
        col[y0:y1, x0:x1] = layer.color[y0 - oy:y1 - oy, x0 - ox:x1 - ox]
    return cov, col


def feather_alpha(coverage: np.ndarray, sigma: float, band: float) -> np.ndarray:
    """
    Alpha matte for ``coverage``: 0/1 away from the seam, Gaussian-blurred
    coverage within ``band`` pixels of it.
    """
    cov = coverage.astype(np.float64)
    if sigma <= 0 or band <= 0 or cov.all() or not cov.any():
        return cov
    blurred = ndimage.gaussian_filter(cov, sigma, truncate=3.0, mode="nearest")
    # pixel-center distance to the other class; the seam sits half a pixel closer
    dist = np.where(coverage, ndimage.distance_transform_edt(coverage),
                    ndimage.distance_transform_edt(~coverage))
    return np.where(dist - 0.5 <= band, blurred, cov)


def feather_blend(source: np.ndarray, layer: RenderLayer, cfg: CompositeConfig = CompositeConfig()) -> np.ndarray:
    """
    Blend ``layer`` over ``source`` with a feathered seam.

    Inside the seam band the layer color is extended past its coverage by the
    nearest covered pixel, so the ramp fades the photo into the background
    instead of into black.
    """
    src = np.asarray(source)
    out = src.copy()
    cov, col = paste_layer(src.shape, layer)
    if not cov.any():
        return out

    sigma, band = float(cfg.feather_sigma), cfg.band
    if sigma <= 0 or band <= 0:
        out[cov] = col[cov]
        return out

    # work in a window around the layer; the ramp cannot reach further
    H, W = cov.shape
    margin = int(np.ceil(band + 3.0 * sigma)) + 2
    rows, cols = np.nonzero(cov)
    r0, r1 = max(rows.min() - margin, 0), min(rows.max() + margin + 1, H)
    c0, c1 = max(cols.min() - margin, 0), min(cols.max() + margin + 1, W)
    wcov = cov[r0:r1, c0:c1]
    wsrc = src[r0:r1, c0:c1].astype(np.float64)

    _, (ir, ic) = ndimage.distance_transform_edt(~wcov, return_indices=True)
    ext = col[r0:r1, c0:c1][ir, ic].astype(np.float64)
    alpha = feather_alpha(wcov, sigma, band)

    blended = to_uint8(alpha[..., None] * ext + (1.0 - alpha[..., None]) * wsrc)
    blended = np.where((alpha == 1.0)[..., None], ext.astype(np.uint8), blended)
    blended = np.where((alpha == 0.0)[..., None], src[r0:r1, c0:c1], blended)
    out[r0:r1, c0:c1] = blended
    return out
