"""MLP regressors for the flow and score fields, trained from scratch.

Everything is float64 numpy: forward pass, exact reverse-mode gradients,
Adam with linear warmup and global-norm clipping, and an exponential
moving average of the weights. The smooth x*sigmoid(x) activation keeps
finite-difference gradient checks clean.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError, NumericError, ShapeError

__all__ = [
    "MLPParams",
    "OptimState",
    "net_init",
    "time_features",
    "net_forward",
    "loss_grads",
    "opt_init",
    "opt_step",
]


@dataclass
class MLPParams:
    """Layered weights/biases; weights[i] has shape (fan_in, fan_out)."""

    weights: list
    biases: list
    activation: str = "silu"

    def __post_init__(self):
        if self.activation != "silu":
            raise InputError(f"unsupported activation {self.activation!r}")
        for W, b in zip(self.weights, self.biases):
            if W.shape[1] != b.shape[0]:
                raise ShapeError("weight/bias shapes do not chain")
        for Wa, Wb in zip(self.weights, self.weights[1:]):
            if Wa.shape[1] != Wb.shape[0]:
                raise ShapeError("consecutive layer dimensions do not chain")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    def copy(self) -> "MLPParams":
        return MLPParams([W.copy() for W in self.weights],
                         [b.copy() for b in self.biases], self.activation)


@dataclass
class OptimState:
    """Adam moments, EMA shadow, and schedule settings for one net."""

    step: int
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    ema_w: list
    ema_b: list
    lr: float = 2e-4
    warmup: int = 256
    clip_norm: float = 1.0
    ema_decay: float = 0.999
    ema_start: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def ema_params(self, activation: str = "silu") -> MLPParams:
        return MLPParams([W.copy() for W in self.ema_w],
                         [b.copy() for b in self.ema_b], activation)


def net_init(input_dim: int, hidden_sizes, output_dim: int, seed: int) -> MLPParams:
    """Fan-in-scaled uniform weights, zero biases; deterministic per seed."""
    if input_dim < 1 or output_dim < 1 or any(h < 1 for h in hidden_sizes):
        raise InputError("all layer dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    sizes = [input_dim, *hidden_sizes, output_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPParams(weights, biases)


def time_features(t) -> np.ndarray:
    """[t, sin(2*pi*t), cos(2*pi*t)] per sample."""
    t = np.asarray(t, dtype=float)
    return np.stack([t, np.sin(2 * np.pi * t), np.cos(2 * np.pi * t)], axis=-1)


def _silu(z):
    s = 1.0 / (1.0 + np.exp(-z))
    return z * s


def _silu_grad(z):
    s = 1.0 / (1.0 + np.exp(-z))
    return s * (1.0 + z * (1.0 - s))


def _assemble_input(params: MLPParams, x, t, context):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    tf = np.atleast_2d(time_features(t))
    if tf.shape[0] == 1 and x.shape[0] > 1:
        tf = np.repeat(tf, x.shape[0], axis=0)
    parts = [x, tf]
    if context is not None:
        ctx = np.atleast_2d(np.asarray(context, dtype=float))
        if ctx.shape[0] == 1 and x.shape[0] > 1:
            ctx = np.repeat(ctx, x.shape[0], axis=0)
        parts.append(ctx)
    inp = np.concatenate(parts, axis=1)
    if inp.shape[1] != params.weights[0].shape[0]:
        raise ShapeError(
            f"assembled input dim {inp.shape[1]} != net input dim "
            f"{params.weights[0].shape[0]}"
        )
    return inp


def _forward_cached(params: MLPParams, inp):
    """Forward pass keeping pre-activations for the backward sweep."""
    acts = [inp]
    pre = []
    h = inp
    last = len(params.weights) - 1
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ W + b
        pre.append(z)
        h = z if i == last else _silu(z)
        acts.append(h)
    return h, (acts, pre)


def _backward(params: MLPParams, cache, grad_out):
    """Exact reverse-mode gradients for all weights and biases."""
    acts, pre = cache
    dW = [None] * len(params.weights)
    db = [None] * len(params.biases)
    delta = grad_out
    for i in range(len(params.weights) - 1, -1, -1):
        if i != len(params.weights) - 1:
            delta = delta * _silu_grad(pre[i])
        dW[i] = acts[i].T @ delta
        db[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params.weights[i].T
    return dW, db


def net_forward(params: MLPParams, x, t, context=None) -> np.ndarray:
    """Deterministic forward pass on concat(x, t-features, context).

    Accepts a single sample (1-D x) or a batch (2-D x); the output shape
    follows the input.
    """
    single = np.asarray(x).ndim == 1
    out, _ = _forward_cached(params, _assemble_input(params, x, t, context))
    return out[0] if single else out


def _stack_batch(batch):
    """Accept either a list of BridgeSample or pre-stacked arrays."""
    if isinstance(batch, (tuple, list)) and len(batch) == 5 and \
            isinstance(batch[0], np.ndarray):
        return batch
    t = np.array([s.t for s in batch])
    x_t = np.stack([s.x_t for s in batch])
    noise = np.stack([s.noise for s in batch])
    flow_target = np.stack([s.flow_target for s in batch])
    lam = np.array([s.lambda_t for s in batch])
    return t, x_t, noise, flow_target, lam


def loss_grads(v_params: MLPParams, s_params: MLPParams, batch, context=None):
    """Combined flow + weighted-score loss and its exact gradients.

    loss = mean_i [ ||v(t_i, x_i) - flow_target_i||^2
                    + ||lambda_i * s(t_i, x_i) + noise_i||^2 ]

    Returns (loss, (v_dW, v_db), (s_dW, s_db)).
    """
    t, x_t, noise, flow_target, lam = _stack_batch(batch)
    n = x_t.shape[0]
    if n == 0:
        raise InputError("loss_grads requires a nonempty batch")

    v_in = _assemble_input(v_params, x_t, t, context)
    s_in = _assemble_input(s_params, x_t, t, context)
    v_out, v_cache = _forward_cached(v_params, v_in)
    s_out, s_cache = _forward_cached(s_params, s_in)

    flow_res = v_out - flow_target
    score_res = lam[:, None] * s_out + noise
    per_sample = (flow_res**2).sum(axis=1) + (score_res**2).sum(axis=1)
    if not np.isfinite(per_sample).all():
        bad = int(np.argmax(~np.isfinite(per_sample)))
        raise NumericError(f"non-finite loss at sample index {bad}")
    loss = float(per_sample.mean())

    v_grads = _backward(v_params, v_cache, 2.0 * flow_res / n)
    s_grads = _backward(s_params, s_cache, 2.0 * lam[:, None] * score_res / n)
    return loss, v_grads, s_grads


def opt_init(params: MLPParams, lr: float = 2e-4, warmup: int = 256,
             clip_norm: float = 1.0, ema_decay: float = 0.999,
             ema_start: int = 0) -> OptimState:
    zeros_w = lambda: [np.zeros_like(W) for W in params.weights]
    zeros_b = lambda: [np.zeros_like(b) for b in params.biases]
    return OptimState(
        step=0, m_w=zeros_w(), v_w=zeros_w(), m_b=zeros_b(), v_b=zeros_b(),
        ema_w=[W.copy() for W in params.weights],
        ema_b=[b.copy() for b in params.biases],
        lr=lr, warmup=warmup, clip_norm=clip_norm,
        ema_decay=ema_decay, ema_start=ema_start,
    )


def _global_norm(arrays) -> float:
    return float(np.sqrt(sum(float((a * a).sum()) for a in arrays)))


def opt_step(params: MLPParams, grads, state: OptimState):
    """Clip, warm up, Adam-update, then refresh the EMA shadow.

    Functional: returns (new_params, new_state) without mutating inputs.
    """
    dW, db = grads
    flat = list(dW) + list(db)
    if not all(np.isfinite(g).all() for g in flat):
        raise NumericError("non-finite gradient passed to opt_step")

    norm = _global_norm(flat)
    scale = state.clip_norm / norm if norm > state.clip_norm else 1.0
    dW = [g * scale for g in dW]
    db = [g * scale for g in db]

    step = state.step + 1
    lr_eff = state.lr * min(1.0, step / state.warmup) if state.warmup > 0 else state.lr
    b1, b2, eps = state.beta1, state.beta2, state.adam_eps
    bc1 = 1 - b1**step
    bc2 = 1 - b2**step

    def adam(p, g, m, v):
        m_new = b1 * m + (1 - b1) * g
        v_new = b2 * v + (1 - b2) * g * g
        p_new = p - lr_eff * (m_new / bc1) / (np.sqrt(v_new / bc2) + eps)
        return p_new, m_new, v_new

    new_w, m_w, v_w = [], [], []
    for p, g, m, v in zip(params.weights, dW, state.m_w, state.v_w):
        pn, mn, vn = adam(p, g, m, v)
        new_w.append(pn); m_w.append(mn); v_w.append(vn)
    new_b, m_b, v_b = [], [], []
    for p, g, m, v in zip(params.biases, db, state.m_b, state.v_b):
        pn, mn, vn = adam(p, g, m, v)
        new_b.append(pn); m_b.append(mn); v_b.append(vn)

    new_params = MLPParams(new_w, new_b, params.activation)
    if step <= state.ema_start:
        ema_w = [W.copy() for W in new_w]
        ema_b = [b.copy() for b in new_b]
    else:
        d = state.ema_decay
        ema_w = [d * e + (1 - d) * W for e, W in zip(state.ema_w, new_w)]
        ema_b = [d * e + (1 - d) * b for e, b in zip(state.ema_b, new_b)]
    new_state = replace(state, step=step, m_w=m_w, v_w=v_w, m_b=m_b, v_b=v_b,
                        ema_w=ema_w, ema_b=ema_b)
    return new_params, new_state
