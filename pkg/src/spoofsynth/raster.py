"""
Z-buffered software rasterizer for textured triangle meshes.

Conventions: pixel ``(i, j)`` of a layer has its center at
``origin + (i + 0.5, j + 0.5)`` in source-image coordinates; a pixel belongs
to a triangle when its center is inside, with the top-left rule deciding
centers that fall exactly on an edge. Edge functions are evaluated from the
lower-indexed vertex of each edge so the two triangles sharing an edge see
exactly opposite values, which keeps the mesh watertight without
double-writes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import EmptyViewport
from .geometry import bilinear_sample, to_uint8


@dataclass(frozen=True)
class ProjectedMesh:
    points: np.ndarray  # (N, 2) px
    depths: np.ndarray  # (N,) mm
    uvs: np.ndarray  # (N, 2)
    triangles: np.ndarray  # (T, 3)
    grid_dims: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        z = np.asarray(self.depths, dtype=np.float64)
        uvs = np.asarray(self.uvs, dtype=np.float64)
        tri = np.asarray(self.triangles, dtype=np.intp).reshape(-1, 3)
        n = len(pts)
        if pts.shape != (n, 2) or z.shape != (n,) or uvs.shape != (n, 2):
            raise ValueError("points, depths and uvs must describe the same vertices")
        if np.any(z <= 0):
            raise ValueError("projected depths must be positive")
        if tri.size and (tri.min() < 0 or tri.max() >= n):
            raise ValueError("triangle index out of range")
        for name, arr in (("points", pts), ("depths", z), ("uvs", uvs), ("triangles", tri)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def translated(self, offset) -> "ProjectedMesh":
        return ProjectedMesh(self.points + np.asarray(offset, dtype=np.float64),
                             self.depths, self.uvs, self.triangles, self.grid_dims)

    def corner_points(self) -> np.ndarray:
        """Projected grid corners, TL, TR, BR, BL."""
        if self.grid_dims is None:
            raise ValueError("mesh carries no grid layout")
        m, n = self.grid_dims
        return self.points[[0, m - 1, m * n - 1, (n - 1) * m]]

    def boundary_points(self) -> np.ndarray:
        """Closed outline of the projected grid: top, right, bottom, left side."""
        if self.grid_dims is None:
            raise ValueError("mesh carries no grid layout")
        m, n = self.grid_dims
        top = np.arange(m)
        right = (np.arange(1, n) * m) + m - 1
        bottom = (n - 1) * m + np.arange(m - 2, -1, -1)
        left = np.arange(n - 2, 0, -1) * m
        return self.points[np.concatenate([top, right, bottom, left])]


class Viewport(NamedTuple):
    width: int
    height: int
    origin: Tuple[int, int] = (0, 0)


def viewport_for(points, pad: int = 1) -> Viewport:
    """Smallest integer-aligned viewport holding ``points`` plus ``pad`` pixels."""
    pts = np.asarray(points, dtype=np.float64)
    lo = np.floor(pts.min(axis=0)).astype(int) - pad
    hi = np.ceil(pts.max(axis=0)).astype(int) + pad
    return Viewport(int(hi[0] - lo[0]), int(hi[1] - lo[1]), (int(lo[0]), int(lo[1])))


@dataclass(frozen=True)
class RenderLayer:
    color: np.ndarray  # (H, W, 3) uint8
    coverage: np.ndarray  # (H, W) bool
    zbuffer: np.ndarray  # (H, W) float64, +inf where uncovered
    origin: Tuple[int, int] = (0, 0)

    @property
    def width(self) -> int:
        return self.coverage.shape[1]

    @property
    def height(self) -> int:
        return self.coverage.shape[0]


class Fragments(NamedTuple):
    triangle: np.ndarray  # (K,) triangle index of each fragment
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray  # (K, 3) barycentric, ordered like the triangle's stored vertices


_CHUNK = 1 << 21  # candidate pixels evaluated per batch


def _edge_values(pts, i, j, px, py):
    """Edge function of (i -> j) at (px, py), evaluated from the lower vertex index."""
    flip = i > j
    lo = np.where(flip, j, i)
    hi = np.where(flip, i, j)
    ax, ay = pts[lo, 0], pts[lo, 1]
    bx, by = pts[hi, 0], pts[hi, 1]
    e = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    return np.where(flip, -e, e)


def _top_left(pts, i, j):
    dx = pts[j, 0] - pts[i, 0]
    dy = pts[j, 1] - pts[i, 1]
    return ((dy == 0.0) & (dx > 0.0)) | (dy < 0.0)


def fragments(pm: ProjectedMesh, viewport: Viewport) -> Fragments:
    """
    Every (triangle, pixel) pair whose pixel center the triangle covers.

    Triangles of either winding are accepted; zero-area ones emit nothing.
    Fragments come out grouped by triangle index.
    """
    W, H, (ox, oy) = int(viewport.width), int(viewport.height), viewport.origin
    pts = pm.points - np.array([ox, oy], dtype=np.float64)
    tri = pm.triangles
    empty = Fragments(np.empty(0, np.intp), np.empty(0, np.intp), np.empty(0, np.intp), np.empty((0, 3)))
    if tri.size == 0:
        return empty
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    area = _edge_values(pts, a, b, pts[c, 0], pts[c, 1])
    swap = area < 0.0
    b, c = np.where(swap, c, b), np.where(swap, b, c)
    valid = (area != 0.0) & np.isfinite(area)

    corners = pts[np.stack([a, b, c], axis=1)]  # (T, 3, 2)
    x0 = np.maximum(np.floor(corners[..., 0].min(axis=1) - 0.5), 0).astype(np.int64)
    x1 = np.minimum(np.ceil(corners[..., 0].max(axis=1) - 0.5), W - 1).astype(np.int64)
    y0 = np.maximum(np.floor(corners[..., 1].min(axis=1) - 0.5), 0).astype(np.int64)
    y1 = np.minimum(np.ceil(corners[..., 1].max(axis=1) - 0.5), H - 1).astype(np.int64)
    bw = np.where(valid, np.maximum(x1 - x0 + 1, 0), 0)
    bh = np.where(valid, np.maximum(y1 - y0 + 1, 0), 0)
    counts = bw * bh

    out = []
    ids = np.nonzero(counts)[0]
    csum = np.cumsum(counts[ids])
    starts = np.searchsorted(csum, np.arange(0, csum[-1] if csum.size else 0, _CHUNK), side="right")
    bounds = list(starts) + [ids.size]
    for s0, s1 in zip(bounds[:-1], bounds[1:]):
        sel = ids[s0:s1]
        if sel.size == 0:
            continue
        n = counts[sel]
        t = np.repeat(sel, n)
        local = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
        px = x0[t] + local % bw[t]
        py = y0[t] + local // bw[t]
        cx = px + 0.5
        cy = py + 0.5
        ta, tb, tc = a[t], b[t], c[t]
        w = []
        inside = np.ones(t.shape, dtype=bool)
        for i, j in ((tb, tc), (tc, ta), (ta, tb)):
            e = _edge_values(pts, i, j, cx, cy)
            inside &= (e > 0.0) | ((e == 0.0) & _top_left(pts, i, j))
            w.append(e)
        w = np.stack(w, axis=1)[inside]
        w = w / w.sum(axis=1, keepdims=True)
        t = t[inside]
        # restore the stored vertex order where the winding was flipped
        flipped = swap[t]
        w[flipped] = w[flipped][:, [0, 2, 1]]
        out.append(Fragments(t, py[inside].astype(np.intp), px[inside].astype(np.intp), w))
    if not out:
        return empty
    return Fragments(*(np.concatenate(parts) for parts in zip(*out)))


def sample_texture(tex_pixels: np.ndarray, u, v) -> np.ndarray:
    """Bilinear texture lookup; texel ``(i, j)`` is centred at ``((i+.5)/W, (j+.5)/H)``."""
    h, w = tex_pixels.shape[:2]
    return bilinear_sample(tex_pixels, np.asarray(u) * w - 0.5, np.asarray(v) * h - 0.5)


def rasterize(pm: ProjectedMesh, tex, viewport: Viewport, perspective_correct: bool = False) -> RenderLayer:
    """
    Render ``pm`` textured with ``tex`` into a fresh layer.

    A fragment is kept only if its interpolated depth is strictly smaller
    than what the Z-buffer holds, so on exact ties the earlier triangle wins.
    UVs are interpolated affinely in screen space unless
    ``perspective_correct`` is set.
    """
    W, H = int(viewport.width), int(viewport.height)
    if W < 1 or H < 1:
        raise EmptyViewport(f"viewport must be at least 1x1, got {W}x{H}")
    pixels = getattr(tex, "pixels", tex)
    zbuf = np.full((H, W), np.inf)
    ubuf = np.zeros((H, W))
    vbuf = np.zeros((H, W))

    frag = fragments(pm, viewport)
    if frag.triangle.size:
        idx = pm.triangles[frag.triangle]
        w = frag.weights
        depth = np.einsum("kj,kj->k", w, pm.depths[idx])
        # per pixel: nearest fragment, earliest triangle on ties; this is what
        # drawing triangles in order with a strict less-than depth test keeps
        pix = frag.rows * W + frag.cols
        order = np.lexsort((frag.triangle, depth, pix))
        first = np.ones(order.size, dtype=bool)
        first[1:] = pix[order[1:]] != pix[order[:-1]]
        win = order[first]
        w, idx = w[win], idx[win]
        if perspective_correct:
            wz = w / pm.depths[idx]
            uv = np.einsum("kj,kjc->kc", wz, pm.uvs[idx]) / wz.sum(axis=1, keepdims=True)
        else:
            uv = np.einsum("kj,kjc->kc", w, pm.uvs[idx])
        r, c = frag.rows[win], frag.cols[win]
        zbuf[r, c] = depth[win]
        ubuf[r, c] = uv[:, 0]
        vbuf[r, c] = uv[:, 1]

    coverage = np.isfinite(zbuf)
    color = np.zeros((H, W, 3), dtype=np.uint8)
    if coverage.any():
        color[coverage] = to_uint8(sample_texture(pixels, ubuf[coverage], vbuf[coverage]))
    return RenderLayer(color, coverage, zbuf, tuple(int(o) for o in viewport.origin))
