"""Fully connected translation graph, normalization, and the balanced loss."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from math import comb

import numpy as np

from .errors import DegenerateAxesError, DegenerateScaleError
from .geometry import CameraPose, pair_t, relative_t

NORM_EPS = 1e-12


class Representation(str, Enum):
    RELATIVE_T = "relative-t"
    PAIR_T = "pair-t"

    @property
    def payload_width(self) -> int:
        return 3 if self is Representation.RELATIVE_T else 6


def edge_pairs(n: int):
    """Canonical (i, j) ordering with i < j."""
    return list(itertools.combinations(range(n), 2))


@dataclass(frozen=True)
class TranslationGraph:
    n: int
    representation: Representation
    payloads: np.ndarray  # (C(n,2), 3 or 6), row order matches edge_pairs(n)
    normalized: bool = False
    norm_divisor: float | None = None

    def __post_init__(self):
        rep = Representation(self.representation)
        payloads = np.asarray(self.payloads, dtype=float)
        expected = (comb(self.n, 2), rep.payload_width)
        if payloads.shape != expected:
            raise ValueError(f"payloads shape {payloads.shape}, expected {expected}")
        object.__setattr__(self, "representation", rep)
        object.__setattr__(self, "payloads", payloads)

    def component_vectors(self) -> np.ndarray:
        """All constituent 3-vectors as an (E * w/3, 3) array."""
        return self.payloads.reshape(-1, 3)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "representation": self.representation.value,
            "normalized": self.normalized,
            "norm_divisor": self.norm_divisor,
            "edges": [
                {"i": i, "j": j, "payload": row.tolist()}
                for (i, j), row in zip(edge_pairs(self.n), self.payloads)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TranslationGraph":
        n = int(data["n"])
        rep = Representation(data["representation"])
        payloads = np.zeros((comb(n, 2), rep.payload_width))
        index = {pair: row for row, pair in enumerate(edge_pairs(n))}
        for edge in data["edges"]:
            payloads[index[(edge["i"], edge["j"])]] = edge["payload"]
        divisor = data.get("norm_divisor")
        return cls(n=n, representation=rep, payloads=payloads,
                   normalized=bool(data["normalized"]),
                   norm_divisor=None if divisor is None else float(divisor))


def build_graph(poses: list[CameraPose], representation) -> TranslationGraph:
    """Ground-truth graph over all camera pairs, payloads per the chosen
    representation, not yet normalized."""
    rep = Representation(representation)
    n = len(poses)
    if n < 2:
        raise ValueError("a translation graph needs at least two cameras")
    rows = []
    for i, j in edge_pairs(n):
        if rep is Representation.RELATIVE_T:
            _, t_rel = relative_t(poses[i], poses[j])
            rows.append(t_rel)
        else:
            try:
                pt = pair_t(poses[i], poses[j])
            except DegenerateAxesError as exc:
                raise DegenerateAxesError(
                    f"camera pair ({i}, {j}) has parallel optical axes") from exc
            rows.append(np.concatenate([pt.t_ki, pt.t_kj]))
    return TranslationGraph(n=n, representation=rep, payloads=np.array(rows))


def normalize_graph(g: TranslationGraph) -> TranslationGraph:
    """Divide every constituent 3-vector by the maximum L2 norm in the graph."""
    if g.normalized:
        raise ValueError("graph is already normalized")
    max_norm = float(np.max(np.linalg.norm(g.component_vectors(), axis=1)))
    if max_norm < NORM_EPS:
        raise DegenerateScaleError("all payloads are near zero; cannot normalize")
    return TranslationGraph(n=g.n, representation=g.representation,
                            payloads=g.payloads / max_norm,
                            normalized=True, norm_divisor=max_norm)


def k_factors(n: int, representation) -> float:
    """Balancing coefficient making the graph loss comparable to the n-term
    translation loss of the main branch: n / (2*C(n,2)) for pair payloads,
    n / C(n,2) for relative payloads."""
    if n < 2:
        raise ValueError("need at least two cameras")
    rep = Representation(representation)
    pairs = comb(n, 2)
    if rep is Representation.PAIR_T:
        return n / (2 * pairs)
    return n / pairs


def t_graph_loss(pred: TranslationGraph, gt: TranslationGraph) -> float:
    """Balanced L1 loss between predicted and ground-truth graphs."""
    if pred.n != gt.n or pred.representation != gt.representation:
        raise ValueError("graphs differ in camera count or representation")
    if not gt.normalized:
        raise ValueError("ground-truth graph must be normalized first")
    k = k_factors(gt.n, gt.representation)
    return k * float(np.sum(np.abs(pred.payloads - gt.payloads)))


def total_loss(l_ori: float, l_tgraph: float) -> float:
    """Joint objective: original branch loss plus the graph loss."""
    for name, value in (("l_ori", l_ori), ("l_tgraph", l_tgraph)):
        if not np.isfinite(value):
            raise ValueError(f"{name} must be finite")
        if value < 0:
            raise ValueError(f"{name} must be nonnegative")
    return float(l_ori) + float(l_tgraph)
