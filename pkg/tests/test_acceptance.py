"""Acceptance gate: one test per release criterion, each printing an
explicit PASS line with its measured quantity."""
import time
from math import comb

import numpy as np
import pytest

from tgraph.errors import DegenerateAxesError
from tgraph.geometry import (CameraPose, Ray, camera_center,
                             closest_point_between_axes, look_at_pose,
                             pair_t, relative_t, roll_camera)
from tgraph.graph import TranslationGraph, k_factors, t_graph_loss
from tgraph.metrics import (SimilarityTransform, camera_center_accuracy,
                            rotation_accuracy, translation_accuracy,
                            umeyama_align)
from tgraph.mlp import Mlp, mlp_grad
from tgraph.synth import gen_center_facing, gen_parallel, intersection_stability

from conftest import random_rotation


def oracle_closest_point(oa, da, ob, db):
    """Independent least-squares solution of the two-line closest-point
    problem: minimize ||(oa + s da) - (ob + u db)|| over (s, u) via lstsq."""
    A = np.stack([da, -db], axis=1)
    (s, u), *_ = np.linalg.lstsq(A, ob - oa, rcond=None)
    p = oa + s * da
    q = ob + u * db
    return 0.5 * (p + q), np.linalg.norm(p - q)


def test_geometry_oracle_suite():
    """Criterion 1: closest point matches a brute-force minimization oracle
    within 1e-6 on 1,000 random ray pairs; parallel pairs Degenerate; < 10 s."""
    rng = np.random.default_rng(20240)
    start = time.perf_counter()
    worst = 0.0
    for trial in range(1000):
        oa, ob = 2 * rng.normal(size=3), 2 * rng.normal(size=3)
        da = rng.normal(size=3)
        da /= np.linalg.norm(da)
        if trial % 10 == 0:
            db = da if trial % 20 == 0 else -da  # exact (anti)parallel
            with pytest.raises(DegenerateAxesError):
                closest_point_between_axes(Ray(oa, da), Ray(ob, db))
            continue
        db = rng.normal(size=3)
        db /= np.linalg.norm(db)
        try:
            point, gap, _ = closest_point_between_axes(Ray(oa, da), Ray(ob, db))
        except DegenerateAxesError:
            continue  # a random draw can be near-parallel; not part of the check
        point_o, gap_o = oracle_closest_point(oa, da, ob, db)
        err = max(float(np.max(np.abs(point - point_o))), abs(gap - gap_o))
        worst = max(worst, err)
        assert err < 1e-6
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print(f"PASS geometry oracle: max error {worst:.2e} over 1000 pairs "
          f"in {elapsed:.2f}s")


def test_point_transfer_identity():
    """Criterion 2: R_rel X^c_i + t_rel = X^c_j within 1e-9, 1,000 pose
    pairs x 10 points."""
    rng = np.random.default_rng(20241)
    worst = 0.0
    for _ in range(1000):
        poses = [CameraPose(rotation=random_rotation(rng),
                            translation=2 * rng.normal(size=3)) for _ in range(2)]
        R_rel, t_rel = relative_t(poses[0], poses[1])
        x = rng.normal(size=(10, 3)) * 3
        xi = poses[0].transform(x)
        xj = poses[1].transform(x)
        err = float(np.max(np.abs((R_rel @ xi.T).T + t_rel - xj)))
        worst = max(worst, err)
        assert err < 1e-9
    print(f"PASS point-transfer identity: max residual {worst:.2e}")


def test_pair_t_roll_disentanglement():
    """Criterion 3: over 500 center-facing pairs, rolling either camera
    leaves pair_t unchanged (< 1e-9) while shifting relative_t's rotation
    by exactly the roll angle (within 1e-6 deg)."""
    from tgraph.metrics import rotation_angle_deg
    rng = np.random.default_rng(20242)
    worst_pair = 0.0
    worst_rot = 0.0
    done = 0
    while done < 500:
        c_i = 2.0 * rng.normal(size=3)
        c_j = 2.0 * rng.normal(size=3)
        if min(np.linalg.norm(c_i), np.linalg.norm(c_j)) < 0.3:
            continue
        pose_i = look_at_pose(c_i, np.zeros(3))
        pose_j = look_at_pose(c_j, np.zeros(3))
        try:
            base = pair_t(pose_i, pose_j)
        except DegenerateAxesError:
            continue
        roll = rng.uniform(0.1, 3.0)
        which = done % 2
        rolled = [pose_i, pose_j]
        rolled[which] = roll_camera(rolled[which], roll)
        after = pair_t(rolled[0], rolled[1])
        dev = max(float(np.max(np.abs(after.t_ki - base.t_ki))),
                  float(np.max(np.abs(after.t_kj - base.t_kj))))
        worst_pair = max(worst_pair, dev)
        assert dev < 1e-9

        R_before, _ = relative_t(pose_i, pose_j)
        R_after, _ = relative_t(rolled[0], rolled[1])
        shift = rotation_angle_deg(R_after, R_before)
        rot_err = abs(shift - np.degrees(roll))
        worst_rot = max(worst_rot, rot_err)
        assert rot_err < 1e-6
        done += 1
    print(f"PASS pair-t disentanglement: max pair-t drift {worst_pair:.2e}, "
          f"max rotation-shift error {worst_rot:.2e} deg over 500 pairs")


def test_loss_balancing():
    """Criterion 4: k1*2*C(n,2) = n and k2*C(n,2) = n exactly for n in 2..8;
    t_graph_loss matches a scalar recomputation within 1e-12."""
    for n in range(2, 9):
        pairs = comb(n, 2)
        assert k_factors(n, "pair-t") * 2 * pairs == n
        assert k_factors(n, "relative-t") * pairs == n

    rng = np.random.default_rng(20243)
    for rep, width in (("relative-t", 3), ("pair-t", 6)):
        for n in (2, 4, 7):
            gt_payloads = rng.normal(size=(comb(n, 2), width))
            gt_payloads /= np.max(np.linalg.norm(gt_payloads.reshape(-1, 3), axis=1))
            gt = TranslationGraph(n=n, representation=rep, payloads=gt_payloads,
                                  normalized=True, norm_divisor=1.0)
            pred = TranslationGraph(n=n, representation=rep,
                                    payloads=rng.normal(size=gt_payloads.shape))
            expected = 0.0
            k = n / (2 * comb(n, 2)) if rep == "pair-t" else n / comb(n, 2)
            for a, b in zip(pred.payloads, gt.payloads):
                for va, vb in zip(a, b):
                    expected += k * abs(va - vb)
            assert abs(t_graph_loss(pred, gt) - expected) < 1e-12
    print("PASS loss balancing: k identities exact for n in 2..8; "
          "loss matches scalar recomputation within 1e-12")


def test_umeyama_roundtrip():
    """Criterion 5: random similarities (s in [0.1, 10]) recovered from >= 4
    points within 1e-9 in 1,000/1,000 trials."""
    rng = np.random.default_rng(20244)
    worst = 0.0
    for _ in range(1000):
        n_pts = int(rng.integers(4, 12))
        src = rng.normal(size=(n_pts, 3)) * 2
        sim = SimilarityTransform(scale=float(rng.uniform(0.1, 10.0)),
                                  rotation=random_rotation(rng),
                                  translation=3 * rng.normal(size=3))
        rec = umeyama_align(src, sim.apply(src))
        err = max(abs(rec.scale - sim.scale) / sim.scale,
                  float(np.max(np.abs(rec.rotation - sim.rotation))),
                  float(np.max(np.abs(rec.translation - sim.translation)))
                  / max(1.0, float(np.linalg.norm(sim.translation))))
        worst = max(worst, err)
        assert err < 1e-9
    print(f"PASS umeyama round-trip: max recovery error {worst:.2e} "
          f"over 1000 trials")


def _noisy_ring(rng, n=6):
    gt = []
    pred = []
    for m in range(n):
        theta = 2 * np.pi * m / n + 0.4
        c = 2 * np.array([np.cos(theta), 0.3 * np.sin(3 * theta), np.sin(theta)])
        target = 0.4 * rng.normal(size=3)
        pose = look_at_pose(c, target)
        gt.append(pose)
        R_noise, _ = np.linalg.qr(np.eye(3) + 0.05 * rng.normal(size=(3, 3)))
        R_noise *= np.sign(np.linalg.det(R_noise))
        pred.append(CameraPose(rotation=R_noise @ pose.rotation,
                               translation=pose.translation + 0.15 * rng.normal(size=3)))
    return pred, gt


def test_metric_similarity_invariance():
    """Criterion 6: the three metrics are invariant (exact fraction equality)
    under 100 random global similarity transforms of the predictions;
    2-view camera-center accuracy is identically 1.0."""
    rng = np.random.default_rng(20245)
    pred, gt = _noisy_ring(rng)
    base = (rotation_accuracy(pred, gt),
            camera_center_accuracy(pred, gt),
            translation_accuracy(pred, gt))
    assert 0.0 < base[1] <= 1.0
    for _ in range(100):
        sim = SimilarityTransform(scale=float(rng.uniform(0.1, 10.0)),
                                  rotation=random_rotation(rng),
                                  translation=3 * rng.normal(size=3))
        # world-frame change of the predicted cameras: centers move by the
        # similarity, relative rotations stay fixed
        moved = []
        for p in pred:
            R = p.rotation @ sim.rotation.T
            c = sim.apply(camera_center(p))
            moved.append(CameraPose(rotation=R, translation=-R @ c))
        assert rotation_accuracy(moved, gt) == base[0]
        assert camera_center_accuracy(moved, gt) == base[1]
        # the translation metric aligns the t vectors themselves, so its
        # gauge freedom is a similarity applied directly to those vectors
        moved_t = [CameraPose(rotation=p.rotation,
                              translation=sim.apply(p.translation))
                   for p in pred]
        assert translation_accuracy(moved_t, gt) == base[2]

    for _ in range(20):
        pred2 = [CameraPose(rotation=random_rotation(rng),
                            translation=rng.normal(size=3)) for _ in range(2)]
        gt2 = [look_at_pose([2.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
               look_at_pose([0.0, 2.0, 0.5], [0.0, 0.0, 0.0])]
        assert camera_center_accuracy(pred2, gt2) == 1.0
    print(f"PASS metric invariance: fractions {base} stable under 100 "
          f"similarities; 2-view center accuracy == 1.0")


def test_gradient_check_six_layer_model():
    """Criterion 7: analytic gradients vs central finite differences,
    relative error < 1e-4, on a 24-128x5-6 model over 20 random batches
    that jointly cover every parameter. Runtime < 60 s."""
    start = time.perf_counter()
    rng = np.random.default_rng(20246)
    model = Mlp([24, 128, 128, 128, 128, 128, 6], rng=rng)

    # flat index over every scalar parameter, split into 20 groups; each
    # batch checks one group so all parameters are covered exactly once
    arrays = [arr for W, b in model.params for arr in (W, b)]
    total = sum(a.size for a in arrays)
    flat_ids = rng.permutation(total)
    groups = np.array_split(flat_ids, 20)

    offsets = np.cumsum([0] + [a.size for a in arrays])
    eps = 1e-6
    worst = 0.0
    for batch_id, group in enumerate(groups):
        inputs = rng.normal(size=(8, 24)) + 0.05
        targets = 2.0 * rng.normal(size=(8, 6))
        _, analytic = mlp_grad(model, inputs, targets)
        flat_analytic = [a for pair in analytic for a in pair]
        for fid in group:
            arr_id = int(np.searchsorted(offsets, fid, side="right")) - 1
            local = int(fid - offsets[arr_id])
            arr = arrays[arr_id].ravel()
            orig = arr[local]
            arr[local] = orig + eps
            lp, _ = mlp_grad(model, inputs, targets)
            arr[local] = orig - eps
            lm, _ = mlp_grad(model, inputs, targets)
            arr[local] = orig
            numeric = (lp - lm) / (2 * eps)
            a_val = flat_analytic[arr_id].ravel()[local]
            # denominator floored at 1e-4: below that the central
            # difference is dominated by cancellation noise (~1e-9 at
            # this loss magnitude), so the check becomes absolute there
            rel = abs(a_val - numeric) / max(abs(numeric), 1e-4)
            worst = max(worst, rel)
            assert rel < 1e-4, (batch_id, arr_id, local, a_val, numeric)
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    print(f"PASS gradient check: {total} parameters over 20 batches, "
          f"max relative error {worst:.2e}, {elapsed:.1f}s")


@pytest.mark.slow
def test_directional_training_experiment():
    """Criterion 8 (soft, reported): 5-seed mean camera-center accuracy
    satisfies pair-t >= relative-t >= none on center-facing scenes and
    relative-t >= pair-t on near-parallel scenes; per-seed reversals are
    reported as flagged regressions. Runtime < 15 min."""
    from tgraph.experiment import run_directional
    start = time.perf_counter()
    result = run_directional()
    elapsed = time.perf_counter() - start
    print(result.table())
    assert elapsed < 900.0
    assert result.center_ordering_holds
    assert result.parallel_ordering_holds
    print(f"PASS directional experiment: both mean orderings hold "
          f"({elapsed / 60:.1f} min)")


def test_stability_ordering():
    """Criterion 9: intersection-point variance of near-parallel scenes
    exceeds matched-extent center-facing scenes in >= 9/10 seed pairs."""
    wins = 0
    for seed in range(10):
        cf = intersection_stability(
            gen_center_facing(6, radius=2.0, look_jitter_deg=5.0,
                              radial_jitter=0.3, seed=seed))
        par = intersection_stability(
            gen_parallel(6, spacing=1.6, axis_jitter_deg=3.0, seed=seed))
        if par.point_variance > cf.point_variance:
            wins += 1
    assert wins >= 9
    print(f"PASS stability ordering: parallel variance larger in {wins}/10 seeds")
