"""
Cylindrical bending and rigid rotation of a photo mesh.

Bending wraps the flat sheet around a cylinder of radius ``l / theta`` so the
sheet's arc length is kept. The output is centred on the bend axis: the
middle column lands on ``x = 0`` and both edge columns on ``z = 0``, with the
middle bulging toward the camera by ``r (1 - cos(theta / 2))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InvalidTheta, NotPlanar
from .mesher import Mesh3D

Axis = Literal["vertical", "horizontal"]


@dataclass(frozen=True)
class BendSpec:
    axis: Axis
    theta: float  # radians

    def __post_init__(self):
        if self.axis not in ("vertical", "horizontal"):
            raise ValueError(f"unknown bend axis {self.axis!r}")
        _check_theta(self.theta)


@dataclass(frozen=True)
class RotationSpec:
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.yaw, self.pitch, self.roll])):
            raise ValueError("rotation angles must be finite")

    @classmethod
    def from_degrees(cls, yaw=0.0, pitch=0.0, roll=0.0) -> "RotationSpec":
        return cls(np.radians(yaw), np.radians(pitch), np.radians(roll))


def _check_theta(theta):
    if not (0.0 < theta < 2.0 * np.pi):
        raise InvalidTheta(f"bending angle must lie in (0, 2*pi), got {theta}")


def cylinder_coords(t, length: float, theta: float):
    """
    Bend coordinate ``t`` in ``[0, length]`` onto the arc.

    Returns ``(t', z')``. The depth offset uses the product form of
    ``cos(phi) - cos(theta/2)`` so it stays accurate as ``theta -> 0``.
    """
    t = np.asarray(t, dtype=np.float64)
    r = length / theta
    phi = (t - length / 2.0) / length * theta
    half = theta / 2.0
    along = r * np.sin(phi)
    depth = 2.0 * r * np.sin((half + phi) / 2.0) * np.sin((half - phi) / 2.0)
    return along, depth


def _bend(mesh: Mesh3D, theta: float, axis: int, allow_nonplanar: bool) -> Mesh3D:
    _check_theta(theta)
    v = mesh.vertices
    length = mesh.extent[axis]
    z = v[:, 2]
    if not allow_nonplanar and np.ptp(z) > 1e-9 * max(mesh.extent):
        raise NotPlanar("mesh must be flat in z before bending; pass allow_nonplanar to stack bends")
    along, depth = cylinder_coords(v[:, axis], length, theta)
    out = v.copy()
    out[:, axis] = along
    out[:, 2] = z + depth
    return mesh.with_vertices(out)


def bend_vertical(mesh: Mesh3D, theta: float, allow_nonplanar: bool = False) -> Mesh3D:
    """Bend about a vertical axis: x and z change, y is left untouched."""
    return _bend(mesh, theta, 0, allow_nonplanar)


def bend_horizontal(mesh: Mesh3D, theta: float, allow_nonplanar: bool = False) -> Mesh3D:
    """Bend about a horizontal axis: y and z change, x is left untouched."""
    return _bend(mesh, theta, 1, allow_nonplanar)


def bend(mesh: Mesh3D, spec: BendSpec, allow_nonplanar: bool = False) -> Mesh3D:
    fn = bend_vertical if spec.axis == "vertical" else bend_horizontal
    return fn(mesh, spec.theta, allow_nonplanar=allow_nonplanar)


def rotation_matrix(rot: RotationSpec) -> np.ndarray:
    """``R_yaw @ R_pitch @ R_roll`` about the y, x and z axes respectively."""
    cy, sy = np.cos(rot.yaw), np.sin(rot.yaw)
    cp, sp = np.cos(rot.pitch), np.sin(rot.pitch)
    cr, sr = np.cos(rot.roll), np.sin(rot.roll)
    r_yaw = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    r_pitch = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    r_roll = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    return r_yaw @ r_pitch @ r_roll


def rotate(mesh: Mesh3D, rot: RotationSpec) -> Mesh3D:
    """Rotate every vertex about the mesh centroid."""
    if rot.yaw == 0.0 and rot.pitch == 0.0 and rot.roll == 0.0:
        return mesh
    c = mesh.centroid()
    R = rotation_matrix(rot)
    return mesh.with_vertices((mesh.vertices - c) @ R.T + c)
