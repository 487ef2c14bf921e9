"""Dense neural-net primitives with analytic gradients.

Everything is double precision numpy. Shapes follow the convention
weights[l]: (fan_out, fan_in), biases[l]: (fan_out,); batched inputs are
(batch, fan_in). Training code in the model modules composes these pieces;
`grad_check` verifies any (loss, grads) closure against central finite
differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(v: np.ndarray) -> np.ndarray:
    """Probability vector of a nonempty score vector, max-subtracted for stability."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("softmax of empty vector")
    e = np.exp(v - v.max())
    return e / e.sum()


def log_softmax(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    m = v.max()
    return v - m - np.log(np.exp(v - m).sum())


def cross_entropy(scores: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Softmax cross-entropy of a score vector against one target index.

    Returns (loss, dloss/dscores).
    """
    p = softmax(scores)
    loss = -float(log_softmax(scores)[target])
    grad = p.copy()
    grad[target] -= 1.0
    return loss, grad


def binary_cross_entropy(p: float, label: int, eps: float = 1e-12) -> tuple[float, float]:
    """BCE of one probability; returns (loss, dloss/dp)."""
    p = min(max(p, eps), 1.0 - eps)
    if label:
        return -float(np.log(p)), -1.0 / p
    return -float(np.log(1.0 - p)), 1.0 / (1.0 - p)


def entropy(p: np.ndarray) -> float:
    """Natural-log entropy with the 0*log(0) = 0 convention."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def glorot(fan_out: int, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_out, fan_in))


def hinge_rank_loss(s_t: float, s_f: float, delta: float) -> tuple[float, float, float]:
    """max(0, delta - s_t + s_f) with subgradients w.r.t. s_t and s_f.

    Inside the margin the subgradients are (-1, +1); outside, and exactly at
    the hinge, they are zero.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    margin = delta - s_t + s_f
    if margin > 0.0:
        return margin, -1.0, 1.0
    return 0.0, 0.0, 0.0


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: units drop with probability `rate`, survivors
    are scaled by 1/(1-rate). Training only; inference never applies masks."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def sgd_step(params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> list[np.ndarray]:
    """In-place p <- p - lr * g over parallel lists; returns params."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    if len(params) != len(grads):
        raise ValueError("params/grads length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
        p -= lr * g
    return params


_ACTIVATIONS = {"relu", "sigmoid", "linear"}


@dataclass
class Mlp:
    """Fully connected net: per layer z = x @ W.T + b, then the named activation."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("layer list lengths differ")
        for act in self.activations:
            if act not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        for l in range(1, len(self.weights)):
            if self.weights[l].shape[1] != self.weights[l - 1].shape[0]:
                raise ValueError("adjacent layer dimensions do not chain")

    @classmethod
    def create(cls, sizes: list[int], activations: list[str], rng: np.random.Generator) -> "Mlp":
        """sizes = [in, h1, ..., out]; one activation per layer."""
        ws = [glorot(sizes[l + 1], sizes[l], rng) for l in range(len(sizes) - 1)]
        bs = [np.zeros(sizes[l + 1]) for l in range(len(sizes) - 1)]
        return cls(ws, bs, list(activations))

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def forward(self, x: np.ndarray, masks: list[np.ndarray] | None = None):
        """Batched forward pass.

        x: (batch, in_dim). `masks` optionally holds one dropout mask per
        *hidden* layer (applied to that layer's activation); pass None at
        inference. Returns (out, cache) where cache feeds `backward`.
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.in_dim:
            raise ValueError(f"input dim {x.shape[1]} != {self.in_dim}")
        zs, acts = [], [x]
        a = x
        for l, (w, b, name) in enumerate(zip(self.weights, self.biases, self.activations)):
            z = a @ w.T + b
            zs.append(z)
            if name == "relu":
                a = relu(z)
            elif name == "sigmoid":
                a = sigmoid(z)
            else:
                a = z
            if masks is not None and l < len(self.weights) - 1:
                a = a * masks[l]
            acts.append(a)
        return acts[-1], (zs, acts, masks)

    def backward(self, cache, dout: np.ndarray):
        """Gradients of a scalar loss given dloss/dout. Returns (grads, dx)
        with grads parallel to `params()`."""
        zs, acts, masks = cache
        dout = np.atleast_2d(np.asarray(dout, dtype=np.float64))
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        da = dout
        for l in range(len(self.weights) - 1, -1, -1):
            if masks is not None and l < len(self.weights) - 1:
                da = da * masks[l]
            name = self.activations[l]
            if name == "relu":
                dz = da * (zs[l] > 0)
            elif name == "sigmoid":
                s = sigmoid(zs[l])
                dz = da * s * (1.0 - s)
            else:
                dz = da
            grads_w[l] = dz.T @ acts[l]
            grads_b[l] = dz.sum(axis=0)
            da = dz @ self.weights[l]
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.extend((gw, gb))
        return grads, da

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases], list(self.activations))


@dataclass
class GradCheckReport:
    max_rel_err: float
    n_checked: int
    worst: tuple[int, tuple] = field(default=(0, ()))  # (array index, coordinate)

    @property
    def ok(self) -> bool:
        return self.max_rel_err < 1e-4


def grad_check(
    loss_and_grads,
    arrays: list[np.ndarray],
    step: float = 1e-5,
    max_coords: int = 10_000,
    sample: int = 2_000,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    `loss_and_grads()` evaluates the objective at the current contents of
    `arrays` and returns (loss, grads) with grads parallel to `arrays`.
    Every coordinate is checked unless the total exceeds `max_coords`, in
    which case `sample` coordinates are drawn (seeded via `rng`).
    """
    _, analytic = loss_and_grads()
    coords = [(i, idx) for i, a in enumerate(arrays) for idx in np.ndindex(a.shape)]
    if len(coords) > max_coords:
        rng = rng or np.random.default_rng(0)
        picks = rng.choice(len(coords), size=sample, replace=False)
        coords = [coords[int(p)] for p in picks]
    worst = (0.0, (0, ()))
    for i, idx in coords:
        orig = arrays[i][idx]
        arrays[i][idx] = orig + step
        lp, _ = loss_and_grads()
        arrays[i][idx] = orig - step
        lm, _ = loss_and_grads()
        arrays[i][idx] = orig
        fd = (lp - lm) / (2.0 * step)
        an = float(analytic[i][idx])
        rel = abs(an - fd) / max(abs(an), abs(fd), 1e-8)
        if rel > worst[0]:
            worst = (rel, (i, idx))
    return GradCheckReport(max_rel_err=worst[0], n_checked=len(coords), worst=worst[1])
