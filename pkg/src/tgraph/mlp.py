"""Plain-numpy MLP with analytic gradients, AdamW, and the 6D rotation head."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels


def relu(x):
    return np.maximum(x, 0.0)


class Mlp:
    """Fully connected net, ReLU on all but the last layer.

    Parameters are a list of (W, b) with W of shape (d_in, d_out).
    """

    def __init__(self, layer_dims, rng=None, params=None):
        if len(layer_dims) < 2 or any(d <= 0 for d in layer_dims):
            raise ValueError("layer_dims must hold at least two positive sizes")
        self.layer_dims = list(layer_dims)
        if params is not None:
            self.params = [(np.asarray(W, dtype=float), np.asarray(b, dtype=float))
                           for W, b in params]
            for (W, b), (d_in, d_out) in zip(self.params, zip(layer_dims, layer_dims[1:])):
                if W.shape != (d_in, d_out) or b.shape != (d_out,):
                    raise ValueError("parameter shapes do not match layer_dims")
        else:
            if rng is None:
                rng = np.random.default_rng(0)
            self.params = []
            for d_in, d_out in zip(layer_dims, layer_dims[1:]):
                lim = np.sqrt(6.0 / d_in)  # He-style uniform for ReLU
                self.params.append((rng.uniform(-lim, lim, size=(d_in, d_out)),
                                    np.zeros(d_out)))

    @property
    def n_layers(self):
        return len(self.params)

    @property
    def in_width(self):
        return self.layer_dims[0]

    @property
    def out_width(self):
        return self.layer_dims[-1]

    def forward(self, x, cache=False):
        """Forward pass on a (batch, in_width) array.

        With cache=True also returns the per-layer activations needed by
        backward().
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.in_width:
            raise ValueError(f"input width {x.shape[1]}, model expects {self.in_width}")
        acts = [x]
        h = x
        for k, (W, b) in enumerate(self.params):
            h = h @ W + b
            if k < self.n_layers - 1:
                h = relu(h)
            acts.append(h)
        if not np.all(np.isfinite(h)):
            raise FloatingPointError("non-finite activations in forward pass")
        return (h, acts) if cache else h

    def backward(self, acts, grad_out):
        """Backpropagate d(loss)/d(output) through the cached activations.

        Returns (grads, grad_input) with grads shaped like self.params.
        """
        grads = [None] * self.n_layers
        g = np.asarray(grad_out, dtype=float)
        for k in range(self.n_layers - 1, -1, -1):
            W, _ = self.params[k]
            if k < self.n_layers - 1:
                g = g * (acts[k + 1] > 0)  # ReLU mask; subgradient 0 at the kink
            grads[k] = (acts[k].T @ g, g.sum(axis=0))
            g = g @ W.T
        return grads, g

    def zero_like_grads(self):
        return [(np.zeros_like(W), np.zeros_like(b)) for W, b in self.params]

    def copy(self):
        return Mlp(self.layer_dims, params=[(W.copy(), b.copy()) for W, b in self.params])


def l1_loss_grad(pred, target, weight: float = 1.0):
    """Mean-per-row L1 loss and its (sub)gradient; gradient is 0 at zero residual."""
    residual = pred - target
    batch = residual.shape[0]
    loss = weight * float(np.sum(np.abs(residual))) / batch
    grad = weight * np.sign(residual) / batch
    return loss, grad


def mlp_grad(model: Mlp, inputs, targets, weight: float = 1.0):
    """Analytic parameter gradients of the batch-averaged L1 loss.

    Returns (loss, grads) with grads shaped like model.params.
    """
    out, acts = model.forward(inputs, cache=True)
    loss, grad_out = l1_loss_grad(out, np.atleast_2d(targets), weight)
    grads, _ = model.backward(acts, grad_out)
    return loss, grads


# ---------------------------------------------------------------------------
# 6D rotation parameterization (Gram-Schmidt of two 3-vectors)
# ---------------------------------------------------------------------------

GS_EPS = 1e-8


def rotation_from_6d(raw):
    """Map (batch, 6) raw values to rotations via Gram-Schmidt.

    The two 3-vectors become the first two rows of R; the third row is
    their cross product. Returns (R, cache) for the backward pass, plus a
    boolean mask of rows that were degenerate and fell back to identity.
    """
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    a = raw[:, :3]
    b = raw[:, 3:6]
    na = np.linalg.norm(a, axis=1)
    e1 = a / np.where(na < GS_EPS, 1.0, na)[:, None]
    proj = np.sum(e1 * b, axis=1)
    u = b - proj[:, None] * e1
    nu = np.linalg.norm(u, axis=1)
    e2 = u / np.where(nu < GS_EPS, 1.0, nu)[:, None]
    e3 = np.cross(e1, e2)
    R = np.stack([e1, e2, e3], axis=1)
    bad = (na < GS_EPS) | (nu < GS_EPS)
    R[bad] = np.eye(3)
    cache = (a, b, na, e1, proj, u, nu, e2, bad)
    return R, cache


def rotation_from_6d_backward(cache, grad_R):
    """Gradient of rotation_from_6d w.r.t. the raw 6 values.

    Degenerate rows get zero gradient (their output was clamped to I).
    """
    a, b, na, e1, proj, u, nu, e2, bad = cache
    g1 = grad_R[:, 0, :].copy()
    g2 = grad_R[:, 1, :].copy()
    g3 = grad_R[:, 2, :]
    # e3 = e1 x e2
    g1 += np.cross(e2, g3)
    g2 += np.cross(g3, e1)
    # e2 = u / |u|
    nu_safe = np.where(nu < GS_EPS, 1.0, nu)[:, None]
    gu = (g2 - e2 * np.sum(e2 * g2, axis=1)[:, None]) / nu_safe
    # u = b - (e1.b) e1
    gb = gu - e1 * np.sum(e1 * gu, axis=1)[:, None]
    g1 += -np.sum(gu * e1, axis=1)[:, None] * b - proj[:, None] * gu
    # e1 = a / |a|
    na_safe = np.where(na < GS_EPS, 1.0, na)[:, None]
    ga = (g1 - e1 * np.sum(e1 * g1, axis=1)[:, None]) / na_safe
    grad = np.concatenate([ga, gb], axis=1)
    grad[bad] = 0.0
    return grad


# ---------------------------------------------------------------------------
# AdamW
# ---------------------------------------------------------------------------

@dataclass
class AdamWState:
    """Optimizer state for one flat list of parameter arrays."""

    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def ensure_moments(self, params):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        for p, m in zip(params, self.m):
            if p.shape != m.shape:
                raise ValueError("parameter and moment shapes disagree")


def adamw_step(state: AdamWState, params, grads):
    """One decoupled-weight-decay Adam update, in place on params.

    params and grads are flat lists of same-shaped arrays.
    """
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    state.ensure_moments(params)
    state.step += 1
    b1, b2 = state.betas
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("parameter and gradient shapes disagree")
        _kernels.adamw_update(p.ravel(), np.ascontiguousarray(g, dtype=float).ravel(),
                              m.ravel(), v.ravel(),
                              state.lr, b1, b2, state.eps, state.weight_decay,
                              state.step)
    return params, state


def flatten_params(models):
    """Concatenated parameter list over several Mlps (skipping None)."""
    out = []
    for model in models:
        if model is None:
            continue
        for W, b in model.params:
            out.append(W)
            out.append(b)
    return out


def flatten_grads(grad_sets):
    out = []
    for grads in grad_sets:
        if grads is None:
            continue
        for gW, gb in grads:
            out.append(gW)
            out.append(gb)
    return out
