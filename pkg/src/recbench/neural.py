"""Minimal neural stack with hand-derived gradients.

Dense layers (ReLU/sigmoid/linear, inverted dropout after the
activation), binary cross-entropy, Adam with bias correction, Gaussian
sampling, and the two-hidden-layer perceptron block (Mlp2) every neural
model is built from. Everything is float64 and deterministic given a
seeded numpy Generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError

BCE_EPS = 1e-7

_ACTIVATIONS = ("relu", "sigmoid", "linear")


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class DenseLayer:
    """Affine map plus activation; dropout (train mode only) follows the
    activation with inverted scaling."""

    w: np.ndarray
    b: np.ndarray
    activation: str
    dropout_p: float = 0.0

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in [0, 1)")

    @property
    def in_dim(self) -> int:
        return self.w.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w.shape[1]


@dataclass
class Mlp2:
    """Two hidden layers plus an output layer with a task-dependent activation."""

    layer1: DenseLayer
    layer2: DenseLayer
    out_layer: DenseLayer

    def __post_init__(self):
        if self.layer1.out_dim != self.layer2.in_dim or self.layer2.out_dim != self.out_layer.in_dim:
            raise ValueError("consecutive layer widths do not match")

    @property
    def layers(self) -> tuple[DenseLayer, DenseLayer, DenseLayer]:
        return (self.layer1, self.layer2, self.out_layer)

    @property
    def in_dim(self) -> int:
        return self.layer1.in_dim

    @property
    def out_dim(self) -> int:
        return self.out_layer.out_dim


@dataclass
class LayerCache:
    x: np.ndarray          # layer input
    pre: np.ndarray        # pre-activation
    act: np.ndarray        # activation output, before dropout
    mask: np.ndarray | None


@dataclass
class ForwardCache:
    """Per-layer bookkeeping from one train-mode forward pass."""

    layers: list[LayerCache]


def mlp_params(mlp: Mlp2) -> list[np.ndarray]:
    """Live parameter arrays in a fixed order (w, b per layer)."""
    out = []
    for layer in mlp.layers:
        out.append(layer.w)
        out.append(layer.b)
    return out


def forward(mlp: Mlp2, x: np.ndarray, mode: str = "train", rng=None):
    """Run a batch through the block.

    Train mode applies inverted dropout after each activation (drawing
    masks from rng) and returns a ForwardCache for backward; eval mode is
    deterministic, applies no dropout, and returns None for the cache.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != mlp.in_dim:
        raise ValueError(f"input width {x.shape} does not match layer width {mlp.in_dim}")
    caches = []
    h = x
    for layer in mlp.layers:
        pre = h @ layer.w + layer.b
        if layer.activation == "relu":
            act = np.maximum(pre, 0.0)
        elif layer.activation == "sigmoid":
            act = _stable_sigmoid(pre)
        else:
            act = pre
        mask = None
        out = act
        if mode == "train" and layer.dropout_p > 0.0:
            if rng is None:
                raise ValueError("train-mode forward with dropout requires an rng")
            mask = rng.random(act.shape) >= layer.dropout_p
            out = act * mask / (1.0 - layer.dropout_p)
        if mode == "train":
            caches.append(LayerCache(x=h, pre=pre, act=act, mask=mask))
        h = out
    if mode == "train":
        return h, ForwardCache(layers=caches)
    return h, None


def backward(mlp: Mlp2, cache: ForwardCache, grad_out: np.ndarray):
    """Backpropagate grad_out through a cached train-mode forward.

    Returns (grads, grad_input) where grads aligns with mlp_params(mlp).
    """
    if cache is None or len(cache.layers) != len(mlp.layers):
        raise ValueError("cache does not match this network")
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != cache.layers[-1].act.shape:
        raise ValueError(
            f"grad_out shape {grad_out.shape} does not match output "
            f"{cache.layers[-1].act.shape}"
        )
    grads: list[np.ndarray | None] = [None] * (2 * len(mlp.layers))
    g = grad_out
    for i in reversed(range(len(mlp.layers))):
        layer = mlp.layers[i]
        lc = cache.layers[i]
        if lc.mask is not None:
            g = g * lc.mask / (1.0 - layer.dropout_p)
        if layer.activation == "relu":
            g = g * (lc.pre > 0.0)
        elif layer.activation == "sigmoid":
            g = g * lc.act * (1.0 - lc.act)
        grads[2 * i] = lc.x.T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ layer.w.T
    return grads, g


def bce(pred: np.ndarray, target: np.ndarray):
    """Mean binary cross-entropy and its gradient w.r.t. pred.

    Predictions are clamped to [BCE_EPS, 1 - BCE_EPS] before the logs; the
    gradient is taken at the clamped values.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    loss = float(-np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)))
    grad = (-(target / p) + (1.0 - target) / (1.0 - p)) / p.size
    return loss, grad


@dataclass
class AdamState:
    """Optimizer moments for one fixed parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0

    @classmethod
    def for_params(cls, params, lr: float = 0.001, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            lr=lr, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update, applied to params in place."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("parameter, gradient, and state lengths differ")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise DivergenceError("optimizer step", "non-finite gradient")
    state.step_count += 1
    b1c = 1.0 - state.beta1 ** state.step_count
    b2c = 1.0 - state.beta2 ** state.step_count
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / b1c
        v_hat = state.v[i] / b2c
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def sample_gaussian(rows: int, cols: int, rng) -> np.ndarray:
    """I.i.d. standard-normal batch, deterministic under the generator."""
    return rng.standard_normal((rows, cols))


def init_mlp2(in_dim: int, hidden_dim: int, out_dim: int, out_activation: str,
              dropout_p: float = 0.2, rng=None) -> Mlp2:
    """Glorot-uniform weights, zero biases, ReLU hidden layers.

    Dropout applies to the two hidden layers only; the output layer never
    drops units.
    """
    if min(in_dim, hidden_dim, out_dim) < 1:
        raise ValueError("all dimensions must be >= 1")
    if rng is None:
        raise ValueError("init_mlp2 requires an rng")

    def dense(fan_in, fan_out, activation, p):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-a, a, size=(fan_in, fan_out))
        return DenseLayer(w=w, b=np.zeros(fan_out), activation=activation, dropout_p=p)

    return Mlp2(
        layer1=dense(in_dim, hidden_dim, "relu", dropout_p),
        layer2=dense(hidden_dim, hidden_dim, "relu", dropout_p),
        out_layer=dense(hidden_dim, out_dim, out_activation, 0.0),
    )


def _quadratic_loss(out: np.ndarray, target: np.ndarray):
    diff = out - target
    return 0.5 * float(np.mean(diff * diff)), diff / diff.size


def gradient_check(seed: int = 0, n_configs: int = 20, h: float = 1e-5) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Runs n_configs randomly shaped small networks (dims <= 10, dropout
    disabled) under a quadratic loss and checks every parameter entry.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_configs):
        in_d, hid_d, out_d = (int(v) for v in rng.integers(1, 11, size=3))
        out_act = _ACTIVATIONS[int(rng.integers(len(_ACTIVATIONS)))]
        mlp = init_mlp2(in_d, hid_d, out_d, out_act, dropout_p=0.0, rng=rng)
        for layer in mlp.layers:
            # zero biases make dead ReLU rows land exactly on the kink,
            # where finite differences are meaningless
            layer.b += 0.1 * rng.standard_normal(layer.b.shape)
        x = rng.standard_normal((4, in_d))
        target = rng.standard_normal((4, out_d))

        out, cache = forward(mlp, x, mode="train")
        _, grad_out = _quadratic_loss(out, target)
        analytic, _ = backward(mlp, cache, grad_out)

        params = mlp_params(mlp)
        for p, a in zip(params, analytic):
            flat = p.reshape(-1)
            aflat = a.reshape(-1)
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + h
                lp, _ = _quadratic_loss(forward(mlp, x, mode="eval")[0], target)
                flat[idx] = orig - h
                lm, _ = _quadratic_loss(forward(mlp, x, mode="eval")[0], target)
                flat[idx] = orig
                numeric = (lp - lm) / (2.0 * h)
                denom = max(abs(aflat[idx]), abs(numeric), 1e-8)
                worst = max(worst, abs(aflat[idx] - numeric) / denom)
    return worst
