"""From-scratch regression networks for rolling-ratio prediction.

Two networks share one architecture and differ only in their scalar input:
the rectification network conditions on the commanded angular velocity, the
policy network on the desired one. Both predict the ratio of true to
commanded angular velocity.

Input features are fixed average-pool summaries of the two depth maps
(32x24 cells each, normalized by the depth clamp) plus one scaled scalar,
total 1537; at quarter-scale maps each pooled cell spans ~1.4 mm, enough to
tell a circle's print from a polygon corner's, which a coarser grid blurs.
The from-scratch implementation keeps gradients exactly checkable
against central finite differences; the hidden nonlinearity is the smooth
rectifier softplus for the same reason (a hard kink breaks a finite
difference that straddles it). The output is a sigmoid scaled to (0, 1.2]:
ratio labels live near (0, 1] and the headroom tolerates solver noise.

Everything is float64 and deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .world import DepthMap

POOL_W = 32
POOL_H = 24
FEATURE_LEN = 2 * POOL_W * POOL_H + 1
HIDDEN_DIMS = (64, 32)
OUT_SCALE = 1.2
ROLE_RECTIFY = "N"   # scalar input: commanded angular velocity
ROLE_POLICY = "pi"   # scalar input: desired angular velocity

CHECKPOINT_MAGIC = "DTACTIVE-MODEL v1"


@dataclass
class TrainConfig:
    lr: float = 3e-3
    epochs: int = 200
    batch: int = 64
    momentum: float = 0.9
    seed: int = 0
    omega_floor: float = 0.02   # rad/s; frames with |omega_c| below have no label
    lr_decay: float = 0.1       # learning-rate factor for the fine-tune phase
    decay_frac: float = 0.25    # final fraction of epochs run at lr * lr_decay

    def validate(self) -> None:
        for name, ok in [("lr", self.lr > 0), ("epochs", self.epochs >= 1),
                         ("batch", self.batch >= 1), ("momentum", 0 <= self.momentum < 1),
                         ("omega_floor", self.omega_floor >= 0),
                         ("lr_decay", 0 < self.lr_decay <= 1),
                         ("decay_frac", 0 <= self.decay_frac < 1)]:
            if not ok:
                raise ValueError(f"training.{name}: out of range")


@dataclass
class Sample:
    features: np.ndarray  # (FEATURE_LEN,) or custom length in tests
    label: float


@dataclass
class ModelParams:
    role: str
    dims: tuple
    weights: list          # [W1 (h1,in), W2 (h2,h1), W3 (1,h2)]
    biases: list
    hidden: str = "softplus"      # 'identity' variant is test-only
    output: str = "scaled_sigmoid"

    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def _pool(values: np.ndarray) -> np.ndarray:
    """Average-pool a (H, W) map onto the fixed POOL_H x POOL_W grid."""
    h, w = values.shape
    rb = (np.arange(POOL_H + 1) * h) // POOL_H
    cb = (np.arange(POOL_W + 1) * w) // POOL_W
    sums = np.add.reduceat(np.add.reduceat(values, rb[:-1], axis=0), cb[:-1], axis=1)
    counts = np.outer(np.diff(rb), np.diff(cb))
    return sums / counts


def pool_blocks(d_left, d_right, d_max: float = 1.5) -> np.ndarray:
    """The 384 image entries of the feature vector (both maps pooled, normalized)."""
    vl = d_left.values if isinstance(d_left, DepthMap) else np.asarray(d_left, dtype=float)
    vr = d_right.values if isinstance(d_right, DepthMap) else np.asarray(d_right, dtype=float)
    if vl.shape != vr.shape:
        raise ValueError(f"depth map dimensions differ: {vl.shape} vs {vr.shape}")
    return np.concatenate([(_pool(vl) / d_max).ravel(), (_pool(vr) / d_max).ravel()])


def compose_features(blocks: np.ndarray, omega: float, omega_max: float = 1.0) -> np.ndarray:
    """Attach the scalar channel to pooled blocks (shared between both networks)."""
    return np.concatenate([blocks, [omega / omega_max]])


def featurize(
    d_left: DepthMap | np.ndarray,
    d_right: DepthMap | np.ndarray,
    omega: float,
    d_max: float = 1.5,
    omega_max: float = 1.0,
) -> np.ndarray:
    """[pool(D_L), pool(D_R), omega/omega_max] as a flat float64 vector."""
    f = compose_features(pool_blocks(d_left, d_right, d_max), omega, omega_max)
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite feature vector")
    return f


def init_model(role: str, seed: int, in_dim: int = FEATURE_LEN, hidden=HIDDEN_DIMS,
               hidden_act: str = "softplus", output_act: str = "scaled_sigmoid") -> ModelParams:
    """Uniform +-1/sqrt(fan_in) weights, zero biases, fixed draw order."""
    if role not in (ROLE_RECTIFY, ROLE_POLICY):
        raise ValueError(f"unknown role: {role}")
    rng = np.random.default_rng(seed)
    dims = (in_dim, *hidden, 1)
    weights, biases = [], []
    for a, b in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(a)
        weights.append(rng.uniform(-bound, bound, size=(b, a)))
        biases.append(np.zeros(b))
    return ModelParams(role=role, dims=dims, weights=weights, biases=biases,
                       hidden=hidden_act, output=output_act)


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _act(model: ModelParams, z):
    return _softplus(z) if model.hidden == "softplus" else z


def _act_grad(model: ModelParams, z):
    return _sigmoid(z) if model.hidden == "softplus" else np.ones_like(z)


def _forward_pass(model: ModelParams, x: np.ndarray):
    """Batched forward; x is (B, in). Returns (prediction (B,), cache)."""
    a = x
    cache = [x]
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = a @ w.T + b
        a = _act(model, z)
        cache.extend([z, a])
    z_out = a @ model.weights[-1].T + model.biases[-1]
    cache.append(z_out)
    if model.output == "scaled_sigmoid":
        pred = OUT_SCALE * _sigmoid(z_out[:, 0])
    else:
        pred = z_out[:, 0]
    return pred, cache


def forward(model: ModelParams, features: np.ndarray) -> float:
    """Single-vector prediction, strictly inside (0, OUT_SCALE] for the sigmoid head."""
    f = np.asarray(features, dtype=float)
    if f.shape != (model.dims[0],):
        raise ValueError(f"feature length {f.shape} does not match model input {model.dims[0]}")
    pred, _ = _forward_pass(model, f[None, :])
    p = float(pred[0])
    if not np.isfinite(p):
        raise ArithmeticError("non-finite network output")
    return p


def loss_and_grad(model: ModelParams, batch: list[Sample]):
    """Mean squared error over the batch and its exact gradient.

    Returns (loss, grads) with grads = {'weights': [...], 'biases': [...]}.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    x = np.stack([np.asarray(s.features, dtype=float) for s in batch])
    y = np.array([s.label for s in batch])
    pred, cache = _forward_pass(model, x)
    resid = pred - y
    loss = float(np.mean(resid ** 2))
    n = len(batch)
    if model.output == "scaled_sigmoid":
        sig = pred / OUT_SCALE
        dz = (2.0 * resid / n) * OUT_SCALE * sig * (1.0 - sig)
    else:
        dz = 2.0 * resid / n
    delta = dz[:, None]
    g_w = [None] * len(model.weights)
    g_b = [None] * len(model.biases)
    # cache layout: [x, z1, a1, z2, a2, ..., z_out]
    acts = [cache[0]] + cache[2::2]
    zs = cache[1::2]
    for li in range(len(model.weights) - 1, -1, -1):
        a_in = acts[li]
        g_w[li] = delta.T @ a_in
        g_b[li] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ model.weights[li]) * _act_grad(model, zs[li - 1])
    return loss, {"weights": g_w, "biases": g_b}


def train(dataset: list[Sample], cfg: TrainConfig, role: str) -> ModelParams:
    """Seeded minibatch gradient descent with momentum, fixed epoch count.

    The last `decay_frac` of the epochs run at lr * lr_decay; the fine-tune
    phase settles the tight low-variance clusters (circle prints) that the
    full-rate phase keeps rattling.
    """
    cfg.validate()
    data = [s for s in dataset if np.isfinite(s.label)]
    if len(data) == 0:
        raise ValueError("no trainable samples (all filtered)")
    in_dim = len(data[0].features)
    model = init_model(role, cfg.seed, in_dim=in_dim)
    rng = np.random.default_rng(cfg.seed + 1)
    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    n = len(data)
    decay_start = int(math.ceil(cfg.epochs * (1.0 - cfg.decay_frac)))
    for epoch in range(cfg.epochs):
        lr = cfg.lr * (cfg.lr_decay if epoch >= decay_start else 1.0)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch):
            batch = [data[i] for i in order[start:start + cfg.batch]]
            _, grads = loss_and_grad(model, batch)
            for k in range(len(model.weights)):
                vel_w[k] = cfg.momentum * vel_w[k] - lr * grads["weights"][k]
                vel_b[k] = cfg.momentum * vel_b[k] - lr * grads["biases"][k]
                model.weights[k] = model.weights[k] + vel_w[k]
                model.biases[k] = model.biases[k] + vel_b[k]
    return model


def dataset_loss(model: ModelParams, dataset: list[Sample], batch: int = 1024) -> float:
    total, count = 0.0, 0
    for start in range(0, len(dataset), batch):
        chunk = dataset[start:start + batch]
        loss, _ = loss_and_grad(model, chunk)
        total += loss * len(chunk)
        count += len(chunk)
    return total / max(count, 1)


def _flatten_params(model: ModelParams) -> np.ndarray:
    parts = []
    for w, b in zip(model.weights, model.biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)


def _set_flat_param(model: ModelParams, idx: int, value: float) -> float:
    """Set one flat-indexed parameter, returning its previous value."""
    off = 0
    for w, b in zip(model.weights, model.biases):
        for arr in (w, b):
            if idx < off + arr.size:
                flat = arr.ravel()
                old = flat[idx - off]
                flat[idx - off] = value
                return old
            off += arr.size
    raise IndexError(idx)


def grad_check(model: ModelParams, sample: Sample, eps: float = 1e-5,
               param_indices: np.ndarray | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks every parameter by default; pass param_indices to spot-check a
    subset on large models.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    _, grads = loss_and_grad(model, [sample])
    analytic = np.concatenate(
        [np.concatenate([gw.ravel(), gb.ravel()])
         for gw, gb in zip(grads["weights"], grads["biases"])]
    )
    idx = np.arange(analytic.size) if param_indices is None else np.asarray(param_indices)
    worst = 0.0
    for i in idx:
        i = int(i)
        base = _set_flat_param(model, i, 0.0)
        _set_flat_param(model, i, base + eps)
        lp, _ = loss_and_grad(model, [sample])
        _set_flat_param(model, i, base - eps)
        lm, _ = loss_and_grad(model, [sample])
        _set_flat_param(model, i, base)
        numeric = (lp - lm) / (2.0 * eps)
        denom = max(1e-8, abs(analytic[i]) + abs(numeric))
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst


def save_model(model: ModelParams, path, extra_comment: str | None = None) -> None:
    """Text checkpoint: magic+role line, layer dims, then per-layer weight rows
    and a bias row, shortest-repr decimals (bit-exact round trip)."""
    lines = [f"{CHECKPOINT_MAGIC} {model.role}", " ".join(str(int(d)) for d in model.dims)]
    for w, b in zip(model.weights, model.biases):
        for row in w:
            lines.append(" ".join(repr(float(v)) for v in row))
        lines.append(" ".join(repr(float(v)) for v in b))
    if extra_comment:
        lines.append(f"# {extra_comment}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> ModelParams:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    head = lines[0].rsplit(" ", 1)
    if head[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"bad checkpoint magic in {path}")
    role = head[1]
    dims = tuple(int(v) for v in lines[1].split())
    weights, biases = [], []
    ln = 2
    for a, b in zip(dims[:-1], dims[1:]):
        rows = [np.array([float(v) for v in lines[ln + r].split()]) for r in range(b)]
        ln += b
        weights.append(np.stack(rows))
        biases.append(np.array([float(v) for v in lines[ln].split()]))
        ln += 1
    return ModelParams(role=role, dims=dims, weights=weights, biases=biases)
