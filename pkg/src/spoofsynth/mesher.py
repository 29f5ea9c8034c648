"""
Region rectification and planar triangle meshing.

A printed photo is annotated by four corners in the source image. The
region is resampled into a rectangular texture through the homography of
the unit square onto the quad, and a uniform grid of anchors is laid over a
flat rectangle of the same aspect and triangulated.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .errors import DegenerateQuad, EmptyOutput, InvalidExtent, InvalidGrid
from .geometry import bilinear_sample, square_to_quad, to_uint8

DEFAULT_GRID = (32, 32)
LABELS = ("live", "print", "replay")


def _frozen(arr, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Quad:
    """Four corners in source-image pixels, ordered TL, TR, BR, BL."""

    corners: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=np.float64)
        if c.shape != (4, 2) or not np.all(np.isfinite(c)):
            raise DegenerateQuad(f"expected 4 finite (x, y) corners, got shape {c.shape}")
        for i in range(4):
            for j in range(i + 1, 4):
                if np.hypot(*(c[i] - c[j])) <= 1.0:
                    raise DegenerateQuad(f"corners {i} and {j} are within 1 px of each other")
        # y points down, so TL -> TR -> BR turns with a positive cross product
        for k in range(4):
            a, b, d = c[k], c[(k + 1) % 4], c[(k + 2) % 4]
            cross = (b[0] - a[0]) * (d[1] - b[1]) - (b[1] - a[1]) * (d[0] - b[0])
            if cross <= 0.0:
                raise DegenerateQuad("corners must form a strictly convex quad ordered TL, TR, BR, BL")
        object.__setattr__(self, "corners", _frozen(c, np.float64))

    @property
    def area(self) -> float:
        x, y = self.corners[:, 0], self.corners[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def center(self) -> np.ndarray:
        """Image of the rectangle center, i.e. the diagonals' intersection."""
        H = square_to_quad(self.corners)
        p = H @ np.array([0.5, 0.5, 1.0])
        return p[:2] / p[2]

    def mean_edge_lengths(self) -> Tuple[float, float]:
        """Mean lengths of the top/bottom and left/right edge pairs."""
        c = self.corners
        edge = lambda a, b: float(np.hypot(*(c[b] - c[a])))
        return 0.5 * (edge(0, 1) + edge(3, 2)), 0.5 * (edge(0, 3) + edge(1, 2))

    def default_texture_dims(self) -> Tuple[int, int]:
        w, h = self.mean_edge_lengths()
        return max(int(round(w)), 2), max(int(round(h)), 2)


@dataclass(frozen=True)
class Texture:
    pixels: np.ndarray  # (H, W, 3) uint8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"texture must be (H, W, 3), got {px.shape}")
        if px.shape[0] < 2 or px.shape[1] < 2:
            raise EmptyOutput(f"texture must be at least 2x2, got {px.shape[1]}x{px.shape[0]}")
        object.__setattr__(self, "pixels", _frozen(px, np.uint8))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Mesh3D:
    """
    Gridded triangle mesh standing in for the printed photo.

    Vertex ``(i, j)`` (column ``i`` of ``m``, row ``j`` of ``n``) is stored at
    index ``j * m + i``. Coordinates use x right, y down, z toward the camera;
    units are whatever ``extent`` is expressed in.
    """

    vertices: np.ndarray  # (m*n, 3)
    uvs: np.ndarray  # (m*n, 2)
    triangles: np.ndarray  # (2(m-1)(n-1), 3)
    grid_dims: Tuple[int, int]
    extent: Tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "vertices", _frozen(self.vertices, np.float64))
        object.__setattr__(self, "uvs", _frozen(self.uvs, np.float64))
        object.__setattr__(self, "triangles", _frozen(self.triangles, np.intp))

    def with_vertices(self, vertices) -> "Mesh3D":
        return Mesh3D(vertices, self.uvs, self.triangles, self.grid_dims, self.extent)

    def corner_indices(self) -> np.ndarray:
        """Vertex indices of the grid corners, TL, TR, BR, BL."""
        m, n = self.grid_dims
        return np.array([0, m - 1, m * n - 1, (n - 1) * m])

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def surface_area(self) -> float:
        v = self.vertices[self.triangles]
        return float(0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1).sum())


def rectify_region(image: np.ndarray, quad: Quad, out_dims: Optional[Tuple[int, int]] = None) -> Texture:
    """
    Resample the quad region of ``image`` into a ``(W, H)`` texture.

    Texel ``(i, j)`` has its center at ``((i+.5)/W, (j+.5)/H)`` in the unit
    square, which the quad homography carries into the source image where it
    is sampled bilinearly. Samples falling outside the image clamp to the
    nearest edge pixel.
    """
    if not isinstance(quad, Quad):
        quad = Quad(quad)
    W, H = out_dims if out_dims is not None else quad.default_texture_dims()
    if W < 2 or H < 2:
        raise EmptyOutput(f"output dims must be at least 2x2, got {W}x{H}")
    img = np.asarray(image)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    img = img[:, :, :3]

    Hm = square_to_quad(quad.corners)
    u = (np.arange(W) + 0.5) / W
    v = (np.arange(H) + 0.5) / H
    uu, vv = np.meshgrid(u, v)
    den = Hm[2, 0] * uu + Hm[2, 1] * vv + 1.0
    x = (Hm[0, 0] * uu + Hm[0, 1] * vv + Hm[0, 2]) / den
    y = (Hm[1, 0] * uu + Hm[1, 1] * vv + Hm[1, 2]) / den
    return Texture(to_uint8(bilinear_sample(img, x - 0.5, y - 0.5)))


def build_planar_mesh(extent: Tuple[float, float], grid: Tuple[int, int] = DEFAULT_GRID) -> Mesh3D:
    """
    Uniform ``m x n`` anchor grid on ``[0, l] x [0, h]`` at ``z = 0``.

    Every cell is split along its top-left to bottom-right diagonal into
    ``(a, b, c)`` and ``(a, c, d)``, both counter-clockwise in uv space.
    """
    m, n = (int(g) for g in grid)
    if m < 2 or n < 2:
        raise InvalidGrid(f"grid needs at least 2x2 anchors, got {m}x{n}")
    l, h = (float(e) for e in extent)
    if not (l > 0 and h > 0) or not np.isfinite(l) or not np.isfinite(h):
        raise InvalidExtent(f"extent must be positive, got ({l}, {h})")

    s = np.arange(m) / (m - 1)
    t = np.arange(n) / (n - 1)
    ss, tt = np.meshgrid(s, t)
    uvs = np.stack([ss.ravel(), tt.ravel()], axis=1)
    vertices = np.stack([uvs[:, 0] * l, uvs[:, 1] * h, np.zeros(m * n)], axis=1)

    ii, jj = np.meshgrid(np.arange(m - 1), np.arange(n - 1))
    a = (jj * m + ii).ravel()
    b, c, d = a + 1, a + m + 1, a + m
    triangles = np.empty((2 * a.size, 3), dtype=np.intp)
    triangles[0::2] = np.stack([a, b, c], axis=1)
    triangles[1::2] = np.stack([a, c, d], axis=1)
    return Mesh3D(vertices, uvs, triangles, (m, n), (l, h))


@dataclass(frozen=True)
class RegionAnnotation:
    """One line of a region annotation file."""

    image: str
    corners: Quad
    eye_px_dist: float
    label: str
    id: Optional[str] = None
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RegionAnnotation":
        known = {"image", "corners", "eye_px_dist", "label", "id"}
        label = d["label"]
        if label not in LABELS:
            raise ValueError(f"unknown label {label!r}; expected one of {LABELS}")
        return cls(
            image=str(d["image"]),
            corners=Quad(d["corners"]),
            eye_px_dist=float(d["eye_px_dist"]),
            label=label,
            id=None if d.get("id") is None else str(d["id"]),
            extra={k: v for k, v in d.items() if k not in known},
        )

    def to_dict(self) -> dict:
        out = {
            "image": self.image,
            "corners": self.corners.corners.tolist(),
            "eye_px_dist": self.eye_px_dist,
            "label": self.label,
        }
        if self.id is not None:
            out["id"] = self.id
        out.update(self.extra)
        return out


def load_annotation(path) -> RegionAnnotation:
    return RegionAnnotation.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def mesh_to_obj(mesh: Mesh3D) -> str:
    """Wavefront OBJ text with texture coordinates (v flipped to OBJ's bottom-up)."""
    lines = [f"# {mesh.grid_dims[0]}x{mesh.grid_dims[1]} grid, extent {mesh.extent[0]:g}x{mesh.extent[1]:g}"]
    lines += [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in mesh.vertices]
    lines += [f"vt {u:.6f} {1.0 - v:.6f}" for u, v in mesh.uvs]
    lines += ["f " + " ".join(f"{i + 1}/{i + 1}" for i in tri) for tri in mesh.triangles]
    return "\n".join(lines) + "\n"
