"""Least-squares similarity alignment and similarity-invariant accuracy metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentDegeneracyError
from .geometry import CameraPose, camera_center, scene_scale

RANK_TOL = 1e-9


@dataclass(frozen=True)
class SimilarityTransform:
    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        R = np.asarray(self.rotation, dtype=float)
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation must be orthonormal with det +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    def apply(self, points):
        return self.scale * (np.asarray(points) @ self.rotation.T) + self.translation


@dataclass(frozen=True)
class MetricReport:
    n_views: int
    rotation_acc_15: float
    center_acc_02: float
    translation_acc_02: float

    CSV_HEADER = "n_views,rotation_acc_15,center_acc_02,translation_acc_02,representation,seed"

    def to_csv_row(self, representation: str, seed: int) -> str:
        return (f"{self.n_views},{self.rotation_acc_15:.6f},{self.center_acc_02:.6f},"
                f"{self.translation_acc_02:.6f},{representation},{seed}")


def umeyama_align(src, dst) -> SimilarityTransform:
    """Similarity transform minimizing sum ||s R src_k + t - dst_k||^2.

    Requires >= 3 points and a source set spanning at least a plane
    (collinear sources leave the rotation about the line unresolved).
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.shape != dst.shape:
        raise ValueError("point sets must have matching shapes")
    if src.ndim != 2 or src.shape[1] != 3 or src.shape[0] < 3:
        raise ValueError("need at least three 3D points")
    n = src.shape[0]
    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    src_c = src - mu_src
    dst_c = dst - mu_dst
    sv = np.linalg.svd(src_c, compute_uv=False)
    if sv[0] < 1e-12 or sv[1] < RANK_TOL * max(1.0, sv[0]):
        raise AlignmentDegeneracyError("source points are (near) collinear")
    cov = dst_c.T @ src_c / n
    U, D, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    var_src = float(np.sum(src_c ** 2) / n)
    s = float(np.trace(np.diag(D) @ S)) / var_src
    if s <= 0:
        raise AlignmentDegeneracyError("recovered non-positive scale")
    t = mu_dst - s * R @ mu_src
    return SimilarityTransform(scale=s, rotation=R, translation=t)


def rotation_angle_deg(Ra, Rb) -> float:
    """Geodesic angle of Ra @ Rb.T in degrees, in [0, 180]."""
    Ra = np.asarray(Ra, dtype=float)
    Rb = np.asarray(Rb, dtype=float)
    cos = (np.trace(Ra @ Rb.T) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))


def _check_lengths(pred, gt):
    if len(pred) != len(gt):
        raise ValueError("prediction and ground-truth lists differ in length")
    if len(pred) < 2:
        raise ValueError("need at least two views")


def rotation_accuracy(pred, gt, threshold_deg: float = 15.0) -> float:
    """Fraction of camera pairs (i < j) whose relative-rotation error is
    within the threshold."""
    _check_lengths(pred, gt)
    n = len(pred)
    hits = 0
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            rel_pred = pred[j].rotation @ pred[i].rotation.T
            rel_gt = gt[j].rotation @ gt[i].rotation.T
            hits += rotation_angle_deg(rel_pred, rel_gt) <= threshold_deg
            total += 1
    return hits / total


def camera_center_accuracy(pred, gt, frac: float = 0.2) -> float:
    """Fraction of similarity-aligned predicted camera centers within
    frac * scene scale of their ground-truth counterparts.

    Two views always score 1.0: a similarity aligning two points exactly
    always exists, so the comparison carries no information.
    """
    _check_lengths(pred, gt)
    if len(pred) == 2:
        return 1.0
    pred_centers = np.array([camera_center(p) for p in pred])
    gt_centers = np.array([camera_center(p) for p in gt])
    aligned = umeyama_align(pred_centers, gt_centers).apply(pred_centers)
    threshold = frac * scene_scale(gt_centers)
    dists = np.linalg.norm(aligned - gt_centers, axis=1)
    return float(np.mean(dists <= threshold))


def translation_accuracy(pred, gt, frac: float = 0.2) -> float:
    """As camera_center_accuracy but aligning the translation vectors t
    directly; the scene scale still comes from the ground-truth centers."""
    _check_lengths(pred, gt)
    gt_centers = np.array([camera_center(p) for p in gt])
    threshold = frac * scene_scale(gt_centers)
    pred_t = np.array([p.translation for p in pred])
    gt_t = np.array([p.translation for p in gt])
    if len(pred) == 2:
        # an exact two-point similarity exists whenever the predicted pair
        # is non-coincident; fall back to centroid alignment otherwise
        if np.linalg.norm(pred_t[1] - pred_t[0]) > 1e-12:
            return 1.0
        aligned = pred_t + (gt_t.mean(axis=0) - pred_t.mean(axis=0))
    else:
        aligned = umeyama_align(pred_t, gt_t).apply(pred_t)
    dists = np.linalg.norm(aligned - gt_t, axis=1)
    return float(np.mean(dists <= threshold))


def evaluate(pred, gt) -> MetricReport:
    """All three accuracy metrics for one scene."""
    return MetricReport(
        n_views=len(gt),
        rotation_acc_15=rotation_accuracy(pred, gt),
        center_acc_02=camera_center_accuracy(pred, gt),
        translation_acc_02=translation_accuracy(pred, gt),
    )
