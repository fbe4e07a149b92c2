"""Camera pose algebra and the two pairwise translation representations.

Convention used throughout: a pose maps world points to the camera frame
as X^c = R @ X^w + t, so the camera center is -R.T @ t and the optical
axis points along R.T @ (0, 0, 1) in world coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import DegenerateAxesError

ROTATION_TOL = 1e-9
UNIT_TOL = 1e-12
EPS_PARALLEL = 1e-8


class AxisStatus(str, Enum):
    INTERSECTING = "intersecting"
    SKEW = "skew"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {R.shape}")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ROTATION_TOL:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(R) - 1.0) > ROTATION_TOL:
            raise ValueError("rotation determinant differs from +1 beyond 1e-9")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    def transform(self, points):
        """Map world points (…, 3) into this camera's frame."""
        return np.asarray(points) @ self.rotation.T + self.translation


@dataclass(frozen=True)
class Ray:
    """Origin plus unit direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float).reshape(3)
        d = np.asarray(self.direction, dtype=float).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > UNIT_TOL:
            raise ValueError("direction must have unit norm within 1e-12")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class PairT:
    """Per-pair translation payload: the axis intersection point expressed
    in each camera's own frame."""

    t_ki: np.ndarray
    t_kj: np.ndarray
    gap: float
    status: AxisStatus


def camera_center(pose: CameraPose) -> np.ndarray:
    """World-frame camera center, -R.T @ t."""
    return -pose.rotation.T @ pose.translation


def optical_axis(pose: CameraPose) -> Ray:
    """Ray from the camera center along the camera's +z viewing direction."""
    d = pose.rotation.T @ np.array([0.0, 0.0, 1.0])
    return Ray(camera_center(pose), d / np.linalg.norm(d))


def intersection_tolerance(a: Ray, b: Ray) -> float:
    """Scale-aware gap threshold below which two axes count as intersecting."""
    return 1e-6 * max(1.0, float(np.linalg.norm(a.origin - b.origin)))


def closest_point_between_axes(a: Ray, b: Ray, eps_par: float = EPS_PARALLEL):
    """Point minimizing summed squared distance to the two infinite lines.

    Returns (point, gap, status) where point is the midpoint of the common
    perpendicular segment and gap the line-to-line distance.

    Raises DegenerateAxesError when the directions are parallel within
    eps_par (the minimizer is then not unique).
    """
    points, gaps, degenerate = _kernels.closest_points_batch(
        a.origin[None, :], a.direction[None, :],
        b.origin[None, :], b.direction[None, :], eps_par)
    if degenerate[0]:
        raise DegenerateAxesError("optical axes are parallel within tolerance")
    gap = float(gaps[0])
    status = AxisStatus.INTERSECTING if gap <= intersection_tolerance(a, b) else AxisStatus.SKEW
    return points[0], gap, status


def relative_t(pose_i: CameraPose, pose_j: CameraPose):
    """Relative pose of camera j in camera i's frame: (R_rel, t_rel) with
    R_rel = R_j @ R_i.T and t_rel = t_j - R_rel @ t_i."""
    R_rel = pose_j.rotation @ pose_i.rotation.T
    t_rel = pose_j.translation - R_rel @ pose_i.translation
    return R_rel, t_rel


def pair_t(pose_i: CameraPose, pose_j: CameraPose, eps_par: float = EPS_PARALLEL) -> PairT:
    """Pairwise translation via the optical-axis intersection point.

    The world origin is placed at the point minimizing distance to both
    optical axes; each camera's translation is that point's coordinates
    in its own frame. With intersecting axes and positive depths this
    reduces to (0, 0, D) per camera.
    """
    k, gap, status = closest_point_between_axes(optical_axis(pose_i), optical_axis(pose_j), eps_par)
    t_ki = pose_i.rotation @ k + pose_i.translation
    t_kj = pose_j.rotation @ k + pose_j.translation
    return PairT(t_ki=t_ki, t_kj=t_kj, gap=gap, status=status)


def scene_scale(centers) -> float:
    """Distance from the centroid of the centers to the farthest center."""
    centers = np.asarray(centers, dtype=float)
    if centers.ndim != 2 or centers.shape[0] < 2 or centers.shape[1] != 3:
        raise ValueError("scene_scale needs at least two 3-vectors")
    centroid = centers.mean(axis=0)
    return float(np.max(np.linalg.norm(centers - centroid, axis=1)))


def look_at_pose(center, target, up=(0.0, 1.0, 0.0)) -> CameraPose:
    """Pose of a camera at `center` whose optical axis passes through `target`."""
    center = np.asarray(center, dtype=float)
    target = np.asarray(target, dtype=float)
    fwd = target - center
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise ValueError("camera center coincides with the look target")
    fwd = fwd / n
    up = np.asarray(up, dtype=float)
    right = np.cross(up, fwd)
    if np.linalg.norm(right) < 1e-9:
        # viewing direction parallel to up: pick any perpendicular fallback
        alt = np.array([1.0, 0.0, 0.0]) if abs(fwd[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        right = np.cross(alt, fwd)
    right = right / np.linalg.norm(right)
    down = np.cross(fwd, right)
    R = np.stack([right, down, fwd])
    return CameraPose(rotation=R, translation=-R @ center)


def roll_camera(pose: CameraPose, angle_rad: float) -> CameraPose:
    """Rotate a camera about its own optical axis; center and axis unchanged."""
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    Rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return CameraPose(rotation=Rz @ pose.rotation, translation=Rz @ pose.translation)
