"""Joint training of a toy pose-regression baseline with the graph branch.

The model is a shared encoder MLP feeding two heads. The pose head
regresses, for each camera, its pose relative to the first camera (9 raw
values: 6 for a Gram-Schmidt rotation, 3 for translation) from the
concatenation of the first camera's latent with its own, mirroring how
the reference baselines condition every prediction on the first frame.
During training only, a shared pairwise-translation head is evaluated on
every camera pair; it is dropped at inference.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .errors import TrainingDivergedError
from .geometry import CameraPose, relative_t
from .graph import Representation, build_graph, edge_pairs, k_factors, normalize_graph
from .mlp import (AdamWState, Mlp, adamw_step, flatten_grads, flatten_params,
                  rotation_from_6d, rotation_from_6d_backward)

logger = logging.getLogger(__name__)

TGRAPH_DEPTH = 6  # weight layers in the pairwise-translation regressor

LOG_COLUMNS = ("epoch", "l_ori", "l_tgraph", "l_full", "val_metric")


@dataclass
class TrainConfig:
    representation: str = "pair-t"  # 'relative-t', 'pair-t', or 'none'
    epochs: int = 200
    lr: float = 1e-3
    seed: int = 0
    weight_decay: float = 0.0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    d_latent: int = 12
    encoder_hidden: tuple = (64,)
    baseline_hidden: tuple = (64,)
    tgraph_hidden: int = 64
    val_fraction: float = 0.125
    patience: int = 20

    def __post_init__(self):
        if self.representation not in ("relative-t", "pair-t", "none"):
            raise ValueError(f"unknown representation {self.representation!r}")
        if self.epochs < 1 or self.lr < 0 or not (0 <= self.val_fraction < 1):
            raise ValueError("invalid training hyperparameters")


@dataclass
class JointModel:
    encoder: Mlp
    baseline_head: Mlp
    tgraph_head: Mlp | None
    representation: str

    @property
    def d_raw(self):
        return self.encoder.in_width

    def copy(self):
        return JointModel(self.encoder.copy(), self.baseline_head.copy(),
                          None if self.tgraph_head is None else self.tgraph_head.copy(),
                          self.representation)


def init_model(d_raw: int, config: TrainConfig) -> JointModel:
    rng = np.random.default_rng(config.seed)
    encoder = Mlp([d_raw, *config.encoder_hidden, config.d_latent], rng=rng)
    baseline_head = Mlp([2 * config.d_latent, *config.baseline_hidden, 9], rng=rng)
    tgraph_head = None
    if config.representation != "none":
        width = Representation(config.representation).payload_width
        hidden = [config.tgraph_hidden] * (TGRAPH_DEPTH - 1)
        tgraph_head = Mlp([2 * config.d_latent, *hidden, width], rng=rng)
    return JointModel(encoder, baseline_head, tgraph_head, config.representation)


def tgraph_forward(model: Mlp, f_i, f_j, representation):
    """Pairwise translation payload for one latent-feature pair."""
    width = Representation(representation).payload_width
    f_i = np.asarray(f_i, dtype=float).reshape(-1)
    f_j = np.asarray(f_j, dtype=float).reshape(-1)
    if model.in_width != f_i.size + f_j.size:
        raise ValueError(f"model expects input width {model.in_width}, "
                         f"got features of total width {f_i.size + f_j.size}")
    if model.out_width != width:
        raise ValueError(f"model output width {model.out_width} does not match "
                         f"{representation} payload width {width}")
    return model.forward(np.concatenate([f_i, f_j])[None, :])[0]


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class _Batch:
    """All scenes of one camera count, stacked for vectorized passes."""

    n: int
    n_scenes: int
    features: np.ndarray       # (S*n, d_raw)
    rot_targets: np.ndarray    # (S*n, 3, 3)
    t_targets: np.ndarray      # (S*n, 3)
    graph_targets: np.ndarray | None  # (S*E, w)
    pair_i: np.ndarray
    pair_j: np.ndarray


def _make_batch(scenes, representation: str) -> _Batch:
    n = len(scenes[0].poses)
    S = len(scenes)
    features = np.concatenate([np.asarray(s.features, dtype=float) for s in scenes])
    rot_targets = []
    t_targets = []
    for s in scenes:
        for p in s.poses:
            R_rel, t_rel = relative_t(s.poses[0], p)
            rot_targets.append(R_rel)
            t_targets.append(t_rel)
    rot_targets = np.array(rot_targets)
    t_targets = np.array(t_targets)
    graph_targets = None
    if representation != "none":
        graph_targets = np.concatenate([
            normalize_graph(build_graph(s.poses, representation)).payloads
            for s in scenes])
    pairs = np.array(edge_pairs(n)) if n >= 2 else np.zeros((0, 2), dtype=int)
    return _Batch(n=n, n_scenes=S, features=features, rot_targets=rot_targets,
                  t_targets=t_targets, graph_targets=graph_targets,
                  pair_i=pairs[:, 0], pair_j=pairs[:, 1])


def _batch_losses(model: JointModel, batch: _Batch, total_scenes: int,
                  with_grads: bool):
    """Loss contributions of one batch (weighted by its scene share) and,
    optionally, matching parameter gradients."""
    w_scene = batch.n_scenes / total_scenes
    n_cams = batch.features.shape[0]

    Z, enc_acts = model.encoder.forward(batch.features, cache=True)
    d = Z.shape[1]
    Zr = Z.reshape(batch.n_scenes, batch.n, d)
    anchor = np.repeat(Zr[:, :1], batch.n, axis=1)  # first-camera latent per row
    head_in = np.concatenate([anchor, Zr], axis=2).reshape(-1, 2 * d)
    raw, head_acts = model.baseline_head.forward(head_in, cache=True)
    R_pred, gs_cache = rotation_from_6d(raw[:, :6])
    t_pred = raw[:, 6:9]
    res_R = R_pred - batch.rot_targets
    res_t = t_pred - batch.t_targets
    l_ori = w_scene * (np.sum(np.abs(res_R)) + np.sum(np.abs(res_t))) / n_cams

    l_tg = 0.0
    tg_out = tg_acts = None
    if model.tgraph_head is not None:
        edge_in = np.concatenate([Zr[:, batch.pair_i], Zr[:, batch.pair_j]],
                                 axis=2).reshape(-1, 2 * d)
        tg_out, tg_acts = model.tgraph_head.forward(edge_in, cache=True)
        k = k_factors(batch.n, model.representation)
        l_tg = w_scene * k * np.sum(np.abs(tg_out - batch.graph_targets)) / batch.n_scenes

    if not with_grads:
        return l_ori, l_tg, None

    scale = w_scene / n_cams
    grad_raw = np.empty_like(raw)
    grad_raw[:, :6] = rotation_from_6d_backward(gs_cache, scale * np.sign(res_R))
    grad_raw[:, 6:9] = scale * np.sign(res_t)
    head_grads, grad_head_in = model.baseline_head.backward(head_acts, grad_raw)
    grad_head_in = grad_head_in.reshape(batch.n_scenes, batch.n, 2 * d)
    grad_Zr = grad_head_in[:, :, d:].copy()
    grad_Zr[:, 0] += grad_head_in[:, :, :d].sum(axis=1)  # anchor latent feeds every row

    tg_grads = None
    if model.tgraph_head is not None:
        k = k_factors(batch.n, model.representation)
        grad_out = (w_scene * k / batch.n_scenes) * np.sign(tg_out - batch.graph_targets)
        tg_grads, grad_edges = model.tgraph_head.backward(tg_acts, grad_out)
        grad_edges = grad_edges.reshape(batch.n_scenes, len(batch.pair_i), 2 * d)
        np.add.at(grad_Zr, (slice(None), batch.pair_i), grad_edges[:, :, :d])
        np.add.at(grad_Zr, (slice(None), batch.pair_j), grad_edges[:, :, d:])

    enc_grads, _ = model.encoder.backward(enc_acts, grad_Zr.reshape(-1, d))
    return l_ori, l_tg, (enc_grads, head_grads, tg_grads)


def _accumulate(total, part):
    if part is None:
        return total
    if total is None:
        return part
    for (tW, tb), (pW, pb) in zip(total, part):
        tW += pW
        tb += pb
    return total


def _epoch(model, batches, total_scenes, with_grads):
    l_ori = 0.0
    l_tg = 0.0
    grad_sets = [None, None, None]
    for batch in batches:
        lo, lt, grads = _batch_losses(model, batch, total_scenes, with_grads)
        l_ori += lo
        l_tg += lt
        if grads is not None:
            for idx in range(3):
                grad_sets[idx] = _accumulate(grad_sets[idx], grads[idx])
    return l_ori, l_tg, grad_sets


def train_joint(dataset, config: TrainConfig):
    """Train encoder + heads on the summed objective.

    Returns (model, log): the trained JointModel (its tgraph_head is None
    in ablation mode) and one log row per epoch with keys LOG_COLUMNS.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    d_raw = np.asarray(dataset[0].features).shape[1]
    model = init_model(d_raw, config)

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(dataset))
    n_val = int(round(config.val_fraction * len(dataset)))
    val_scenes = [dataset[i] for i in order[:n_val]]
    train_scenes = [dataset[i] for i in order[n_val:]]
    if not train_scenes:
        raise ValueError("validation split left no training scenes")

    def group(scenes):
        by_n = {}
        for s in scenes:
            by_n.setdefault(len(s.poses), []).append(s)
        return [_make_batch(v, config.representation) for v in by_n.values()]

    train_batches = group(train_scenes)
    val_batches = group(val_scenes)

    opt = AdamWState(lr=config.lr, betas=config.betas, eps=config.eps,
                     weight_decay=config.weight_decay)
    params = flatten_params([model.encoder, model.baseline_head, model.tgraph_head])

    log = []
    best_val = np.inf
    best_model = model.copy()
    stale = 0
    for epoch in range(config.epochs):
        try:
            l_ori, l_tg, grads = _epoch(model, train_batches, len(train_scenes), True)
        except FloatingPointError as exc:
            raise TrainingDivergedError(f"non-finite values at epoch {epoch}") from exc
        l_full = l_ori + l_tg
        if not np.isfinite(l_full):
            raise TrainingDivergedError(f"loss diverged at epoch {epoch}: {l_full}")

        if val_batches:
            v_ori, v_tg, _ = _epoch(model, val_batches, len(val_scenes), False)
            val_metric = v_ori + v_tg
        else:
            val_metric = l_full
        log.append({"epoch": epoch, "l_ori": l_ori, "l_tgraph": l_tg,
                    "l_full": l_full, "val_metric": val_metric})

        if val_metric < best_val - 1e-12:
            best_val = val_metric
            best_model = model.copy()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

        adamw_step(opt, params, flatten_grads(grads))
    return best_model, log


def baseline_predict(model: JointModel, features):
    """Per-camera poses from the baseline head, first camera canonicalized
    to the identity frame. The pairwise head plays no part here."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    Z = model.encoder.forward(features)
    anchor = np.repeat(Z[:1], Z.shape[0], axis=0)
    raw = model.baseline_head.forward(np.concatenate([anchor, Z], axis=1))
    R, cache = rotation_from_6d(raw[:, :6])
    bad = cache[-1]
    if np.any(bad):
        logger.warning("degenerate rotation output for %d camera(s); using identity",
                       int(np.sum(bad)))
    t = raw[:, 6:9]
    R0, t0 = R[0], t[0]
    poses = []
    for Rm, tm in zip(R, t):
        R_rel = Rm @ R0.T
        poses.append(CameraPose(rotation=R_rel, translation=tm - R_rel @ t0))
    return poses


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def _mlp_to_dict(m: Mlp):
    return {"layer_dims": m.layer_dims,
            "weights": [W.tolist() for W, _ in m.params],
            "biases": [b.tolist() for _, b in m.params]}


def _mlp_from_dict(d):
    params = [(np.array(W), np.array(b)) for W, b in zip(d["weights"], d["biases"])]
    return Mlp(d["layer_dims"], params=params)


def save_checkpoint(model: JointModel, path):
    data = {
        "representation": model.representation,
        "encoder": _mlp_to_dict(model.encoder),
        "baseline_head": _mlp_to_dict(model.baseline_head),
        "tgraph_head": None if model.tgraph_head is None else _mlp_to_dict(model.tgraph_head),
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(data, fh)
    os.replace(tmp, path)


def load_checkpoint(path, with_tgraph_head: bool = False) -> JointModel:
    with open(path) as fh:
        data = json.load(fh)
    tgraph_head = None
    if with_tgraph_head and data.get("tgraph_head") is not None:
        tgraph_head = _mlp_from_dict(data["tgraph_head"])
    return JointModel(encoder=_mlp_from_dict(data["encoder"]),
                      baseline_head=_mlp_from_dict(data["baseline_head"]),
                      tgraph_head=tgraph_head,
                      representation=data["representation"])
