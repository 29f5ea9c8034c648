"""
Image-to-world calibration and pinhole projection.

World frame: camera at the origin looking down +z, x right, y down. The
principal point is the optical axis, on which ``to_world`` centres the mesh,
so projected coordinates are offsets from the projected mesh centroid.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BehindCamera, NonPositiveDistance
from .mesher import Mesh3D
from .raster import ProjectedMesh

DEFAULT_D_R_MM = 63.0
DEFAULT_D_Z_MM = 400.0


def pixel_scale(d_p: float, d_r: float) -> float:
    """Pixels per millimetre from the eye distance in pixels and in mm."""
    if not d_p > 0 or not d_r > 0:
        raise NonPositiveDistance(f"eye distances must be positive, got d_p={d_p}, d_r={d_r}")
    return d_p / d_r


@dataclass(frozen=True)
class CameraModel:
    f: float  # px
    d_z: float  # mm
    d_r: float  # mm
    s: float  # px / mm

    def __post_init__(self):
        for name in ("f", "d_z", "d_r", "s"):
            if not getattr(self, name) > 0:
                raise NonPositiveDistance(f"{name} must be positive, got {getattr(self, name)}")

    @classmethod
    def calibrate(cls, eye_px_dist: float, d_r: float = DEFAULT_D_R_MM,
                  d_z: float = DEFAULT_D_Z_MM, f: Optional[float] = None) -> "CameraModel":
        """
        Build a camera for one photo. Without an explicit ``f`` the focal
        length is ``s * d_z``, which reprojects the flat, facing photo onto
        exactly its original pixel footprint.
        """
        s = pixel_scale(eye_px_dist, d_r)
        return cls(f=s * d_z if f is None else float(f), d_z=float(d_z), d_r=float(d_r), s=s)


def to_world(mesh: Mesh3D, s: float, d_z: float) -> Mesh3D:
    """
    Convert a mesh in image-derived pixel units into camera space (mm).

    Coordinates shrink by ``1/s``; the centroid moves onto the optical axis
    at depth ``d_z``. Object z (toward the camera) becomes depth (away), so a
    bulge toward the camera ends up nearer.
    """
    if not s > 0 or not d_z > 0:
        raise NonPositiveDistance(f"s and d_z must be positive, got s={s}, d_z={d_z}")
    v = mesh.vertices
    c = mesh.centroid()
    out = np.empty_like(v)
    out[:, 0] = (v[:, 0] - c[0]) / s
    out[:, 1] = (v[:, 1] - c[1]) / s
    out[:, 2] = d_z - (v[:, 2] - c[2]) / s
    l, h = mesh.extent
    return Mesh3D(out, mesh.uvs, mesh.triangles, mesh.grid_dims, (l / s, h / s))


def _projected(mesh: Mesh3D, points, depths) -> ProjectedMesh:
    return ProjectedMesh(points, depths, mesh.uvs, mesh.triangles, mesh.grid_dims)


def project_perspective(mesh: Mesh3D, f: float) -> ProjectedMesh:
    """``b = v_xy * f / z`` with each vertex's own depth."""
    z = mesh.vertices[:, 2]
    if np.any(z <= 0):
        raise BehindCamera(f"{int(np.sum(z <= 0))} vertices at or behind the camera plane")
    return _projected(mesh, mesh.vertices[:, :2] * (f / z)[:, None], z)


def project_weak(mesh: Mesh3D, f: float) -> ProjectedMesh:
    """``b = v_xy * f / mean(z)``: one shared scale for the whole mesh."""
    z = mesh.vertices[:, 2]
    zbar = z[0] if np.all(z == z[0]) else z.mean()
    if not zbar > 0:
        raise BehindCamera(f"mean depth {zbar} is not in front of the camera")
    scale = np.full_like(z, f / zbar)
    return _projected(mesh, mesh.vertices[:, :2] * scale[:, None], z)


def project(mesh: Mesh3D, f: float, mode: str = "perspective") -> ProjectedMesh:
    if mode == "perspective":
        return project_perspective(mesh, f)
    if mode == "weak":
        return project_weak(mesh, f)
    raise ValueError(f"unknown projection {mode!r}")
