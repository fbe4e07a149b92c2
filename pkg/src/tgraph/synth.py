"""Synthetic camera configurations for the three scenario regimes, feature
encoding, and intersection-stability analysis."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from math import ceil

import numpy as np

from . import _kernels
from .geometry import (CameraPose, look_at_pose, optical_axis,
                       AxisStatus, EPS_PARALLEL)

MIN_VIEWS = 2
MAX_VIEWS = 8
MIN_FEATURE_DIM = 12  # flattened rotation (9) + translation (3)
_PROJECTION_SEED = 915237


class Scenario(str, Enum):
    CENTER_FACING = "center-facing"
    MIXED = "mixed"
    PARALLEL = "parallel"


@dataclass(frozen=True)
class SceneSample:
    """One training/eval instance: poses, per-camera features, provenance."""

    poses: list
    features: np.ndarray  # (n, d_f)
    scenario: Scenario
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.poses)
        if not MIN_VIEWS <= n <= MAX_VIEWS:
            raise ValueError(f"camera count {n} outside [{MIN_VIEWS}, {MAX_VIEWS}]")
        features = np.asarray(self.features, dtype=float)
        if features.shape[0] != n:
            raise ValueError("one feature vector per camera required")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "scenario", Scenario(self.scenario))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.value,
            "seed": self.seed,
            "params": self.params,
            "cameras": [{"R": p.rotation.ravel().tolist(),
                         "t": p.translation.tolist()} for p in self.poses],
            "features": self.features.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSample":
        poses = [CameraPose(rotation=np.array(c["R"]).reshape(3, 3),
                            translation=np.array(c["t"]))
                 for c in data["cameras"]]
        return cls(poses=poses, features=np.array(data["features"]),
                   scenario=Scenario(data["scenario"]), seed=int(data["seed"]),
                   params=dict(data["params"]))


def save_scene(scene: SceneSample, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(scene.to_dict(), fh, sort_keys=True)
    os.replace(tmp, path)


def load_scene(path) -> SceneSample:
    with open(path) as fh:
        return SceneSample.from_dict(json.load(fh))


def _check_n(n):
    if not MIN_VIEWS <= n <= MAX_VIEWS:
        raise ValueError(f"camera count must lie in [{MIN_VIEWS}, {MAX_VIEWS}]")


def _jitter_direction(d, jitter_deg, rng):
    """Rotate a unit vector by a uniform angle in [0, jitter_deg] about a
    random axis perpendicular to it."""
    if jitter_deg <= 0:
        return d
    perp = np.cross(d, rng.normal(size=3))
    norm = np.linalg.norm(perp)
    if norm < 1e-12:
        perp = np.cross(d, np.array([1.0, 0.0, 0.0]))
        norm = np.linalg.norm(perp)
    perp /= norm
    angle = np.radians(rng.uniform(0.0, jitter_deg))
    return np.cos(angle) * d + np.sin(angle) * np.cross(perp, d)


def _center_facing_poses(n, radius, look_jitter_deg, radial_jitter, rng):
    """Centers on a +/-30 degree elevation band of a sphere, axes through
    the origin before jitter; radii drawn per camera from
    radius * U[1 - radial_jitter, 1 + radial_jitter]."""
    poses = []
    for _ in range(n):
        azimuth = rng.uniform(0.0, 2.0 * np.pi)
        elevation = rng.uniform(-np.pi / 6.0, np.pi / 6.0)
        r = radius * rng.uniform(1.0 - radial_jitter, 1.0 + radial_jitter)
        c = r * np.array([np.cos(elevation) * np.cos(azimuth),
                          np.sin(elevation),
                          np.cos(elevation) * np.sin(azimuth)])
        d = _jitter_direction(-c / np.linalg.norm(c), look_jitter_deg, rng)
        poses.append(look_at_pose(c, c + d))
    return poses


def _parallel_poses(n, spacing, axis_jitter_deg, rng, axis=(0.0, 0.0, 1.0)):
    """Centers jittered on a planar grid, optical axes near one shared
    direction."""
    side = ceil(np.sqrt(n))
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    poses = []
    for m in range(n):
        gx, gy = m % side, m // side
        offset = rng.uniform(-0.2, 0.2, size=2)
        c = np.array([(gx - (side - 1) / 2.0 + offset[0]) * spacing,
                      (gy - (side - 1) / 2.0 + offset[1]) * spacing,
                      0.0])
        d = _jitter_direction(axis, axis_jitter_deg, rng)
        poses.append(look_at_pose(c, c + d))
    return poses


def gen_center_facing(n, radius=2.0, look_jitter_deg=0.0, radial_jitter=0.0,
                      seed=0, d_f=16, noise_sigma=0.0) -> SceneSample:
    _check_n(n)
    if radius <= 0 or look_jitter_deg < 0:
        raise ValueError("radius must be positive and jitter nonnegative")
    if not 0.0 <= radial_jitter < 1.0:
        raise ValueError("radial_jitter must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    poses = _center_facing_poses(n, radius, look_jitter_deg, radial_jitter, rng)
    params = {"radius": radius, "look_jitter_deg": look_jitter_deg,
              "radial_jitter": radial_jitter,
              "d_f": d_f, "noise_sigma": noise_sigma}
    return SceneSample(poses=poses, features=_scene_features(poses, d_f, noise_sigma, rng),
                       scenario=Scenario.CENTER_FACING, seed=seed, params=params)


def gen_parallel(n, spacing=1.0, axis_jitter_deg=0.0, seed=0,
                 d_f=16, noise_sigma=0.0) -> SceneSample:
    _check_n(n)
    if spacing <= 0 or axis_jitter_deg < 0:
        raise ValueError("spacing must be positive and jitter nonnegative")
    rng = np.random.default_rng(seed)
    poses = _parallel_poses(n, spacing, axis_jitter_deg, rng)
    params = {"spacing": spacing, "axis_jitter_deg": axis_jitter_deg,
              "d_f": d_f, "noise_sigma": noise_sigma}
    return SceneSample(poses=poses, features=_scene_features(poses, d_f, noise_sigma, rng),
                       scenario=Scenario.PARALLEL, seed=seed, params=params)


def gen_mixed(n, parallel_fraction=0.25, seed=0, radius=2.0, look_jitter_deg=0.0,
              radial_jitter=0.0, spacing=1.0, axis_jitter_deg=1.0,
              d_f=16, noise_sigma=0.0) -> SceneSample:
    """ceil(parallel_fraction * n) parallel-style cameras, the rest
    center-facing, merged into one scene."""
    _check_n(n)
    if not 0.0 <= parallel_fraction <= 1.0:
        raise ValueError("parallel_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n_par = ceil(parallel_fraction * n)
    poses = (_center_facing_poses(n - n_par, radius, look_jitter_deg,
                                  radial_jitter, rng)
             if n - n_par else [])
    if n_par:
        poses = poses + _parallel_poses(n_par, spacing, axis_jitter_deg, rng)
    params = {"parallel_fraction": parallel_fraction, "radius": radius,
              "look_jitter_deg": look_jitter_deg, "radial_jitter": radial_jitter,
              "spacing": spacing, "axis_jitter_deg": axis_jitter_deg,
              "d_f": d_f, "noise_sigma": noise_sigma}
    return SceneSample(poses=poses, features=_scene_features(poses, d_f, noise_sigma, rng),
                       scenario=Scenario.MIXED, seed=seed, params=params)


GENERATORS = {
    Scenario.CENTER_FACING: gen_center_facing,
    Scenario.PARALLEL: gen_parallel,
    Scenario.MIXED: gen_mixed,
}


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def _projection(d_f: int) -> np.ndarray:
    """Fixed random projection from raw pose parameters to d_f dims; depends
    only on d_f so the pose-to-feature map is shared across scenes."""
    rng = np.random.default_rng(_PROJECTION_SEED + d_f)
    return rng.normal(size=(d_f, MIN_FEATURE_DIM)) / np.sqrt(MIN_FEATURE_DIM)


def encode_features(pose: CameraPose, d_f=16, noise_sigma=0.0, seed=0) -> np.ndarray:
    """Deterministic pose embedding plus Gaussian noise; the image-feature
    stand-in that makes the regression task learnable at desk scale."""
    rng = np.random.default_rng(seed)
    return _encode(pose, d_f, noise_sigma, rng)


def _encode(pose, d_f, noise_sigma, rng):
    if d_f < MIN_FEATURE_DIM:
        raise ValueError(f"d_f must be at least {MIN_FEATURE_DIM}")
    base = np.concatenate([pose.rotation.ravel(), pose.translation])
    values = _projection(d_f) @ base
    if noise_sigma > 0:
        values = values + noise_sigma * rng.normal(size=d_f)
    return values


def _scene_features(poses, d_f, noise_sigma, rng):
    return np.array([_encode(p, d_f, noise_sigma, rng) for p in poses])


# ---------------------------------------------------------------------------
# intersection stability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityReport:
    points: np.ndarray          # (C(n,2), 3); NaN rows for degenerate pairs
    gaps: np.ndarray
    statuses: list
    point_variance: float       # trace of the covariance of the finite points
    frac_degenerate: float
    frac_skew: float


def intersection_stability(scene: SceneSample) -> StabilityReport:
    """Per-pair optical-axis intersection summary for one scene."""
    n = len(scene.poses)
    if n < 3:
        raise ValueError("stability analysis needs at least three cameras")
    axes = [optical_axis(p) for p in scene.poses]
    idx = [(i, j) for i in range(n) for j in range(i + 1, n)]
    oa = np.array([axes[i].origin for i, _ in idx])
    da = np.array([axes[i].direction for i, _ in idx])
    ob = np.array([axes[j].origin for _, j in idx])
    db = np.array([axes[j].direction for _, j in idx])
    points, gaps, degenerate = _kernels.closest_points_batch(oa, da, ob, db, EPS_PARALLEL)

    statuses = []
    for row, (is_deg, gap) in enumerate(zip(degenerate, gaps)):
        if is_deg:
            statuses.append(AxisStatus.DEGENERATE)
        else:
            tol = 1e-6 * max(1.0, float(np.linalg.norm(oa[row] - ob[row])))
            statuses.append(AxisStatus.INTERSECTING if gap <= tol else AxisStatus.SKEW)

    finite = points[~degenerate]
    if len(finite) >= 2:
        variance = float(np.trace(np.cov(finite.T)))
    elif len(finite) == 1:
        variance = 0.0
    else:
        variance = float("nan")
    n_pairs = len(idx)
    return StabilityReport(
        points=points, gaps=gaps, statuses=statuses,
        point_variance=variance,
        frac_degenerate=float(np.sum(degenerate)) / n_pairs,
        frac_skew=sum(s is AxisStatus.SKEW for s in statuses) / n_pairs,
    )
