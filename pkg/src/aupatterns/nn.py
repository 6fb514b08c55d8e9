"""A compact, deterministic neural-network engine on float64 numpy.

Layer vocabulary: 3x3 same-padding convolutions, 2x2 max pooling, relu,
inverted dropout, flatten, dense, and exactly one sigmoid or softmax head as
the last layer. Backprop is explicit and finite-difference checked; training
is plain SGD with momentum, a pure function of (spec, data, config) including
all RNG use. Layers can be frozen: frozen parameters receive no gradient
slots and are never touched by an update.

Numerical conventions: head pre-activations are clamped to +-30 before the
nonlinearity and log terms use eps = 1e-12, so losses stay finite on
saturated outputs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import as_strided

__all__ = [
    "Conv2d",
    "MaxPool",
    "Relu",
    "Dropout",
    "Flatten",
    "Dense",
    "SigmoidHead",
    "SoftmaxHead",
    "ModelSpec",
    "ModelState",
    "TrainConfig",
    "TrainingDiverged",
    "init_state",
    "forward",
    "forward_cached",
    "backward",
    "loss_value",
    "train",
    "freeze_and_split",
    "preset_compact_cnn",
    "preset_wide_cnn",
    "save_checkpoint",
    "load_checkpoint",
    "spec_digest",
    "CHECKPOINT_MAGIC",
]

_CLAMP = 30.0
_EPS = 1e-12
CHECKPOINT_MAGIC = b"AUPAT1"


@dataclass(frozen=True)
class Conv2d:
    out_channels: int
    kernel: int = 3  # stride 1, same padding


@dataclass(frozen=True)
class MaxPool:
    pass  # 2x2, stride 2


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class Dropout:
    rate: float


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Dense:
    units: int


@dataclass(frozen=True)
class SigmoidHead:
    units: int


@dataclass(frozen=True)
class SoftmaxHead:
    units: int


_HEADS = (SigmoidHead, SoftmaxHead)
_PARAM_LAYERS = (Conv2d, Dense, SigmoidHead, SoftmaxHead)


@dataclass(frozen=True)
class ModelSpec:
    input_shape: tuple[int, int, int]  # (channels, height, width)
    layers: tuple
    seed: int = 0

    def __post_init__(self):
        if len(self.input_shape) != 3:
            raise ValueError("input_shape must be (channels, height, width)")
        heads = [i for i, l in enumerate(self.layers) if isinstance(l, _HEADS)]
        if len(heads) != 1 or heads[0] != len(self.layers) - 1:
            raise ValueError("spec needs exactly one head layer, in last position")
        for l in self.layers:
            if isinstance(l, Dropout) and not 0.0 <= l.rate < 1.0:
                raise ValueError("dropout rate must lie in [0, 1)")
            if isinstance(l, Conv2d) and l.kernel != 3:
                raise ValueError("only 3x3 kernels are supported")
        self.layer_shapes()  # validates the chain

    def layer_shapes(self) -> list[tuple]:
        """Output shape after each layer (excluding the batch axis)."""
        shape: tuple = self.input_shape
        out = []
        for l in self.layers:
            if isinstance(l, Conv2d):
                if len(shape) != 3:
                    raise ValueError("conv2d needs a (c, h, w) input")
                shape = (l.out_channels, shape[1], shape[2])
            elif isinstance(l, MaxPool):
                c, h, w = shape
                if h < 2 or w < 2 or h % 2 or w % 2:
                    raise ValueError(
                        f"input {h}x{w} too small or odd for a 2x2 pool"
                    )
                shape = (c, h // 2, w // 2)
            elif isinstance(l, (Relu, Dropout)):
                pass
            elif isinstance(l, Flatten):
                shape = (int(np.prod(shape)),)
            elif isinstance(l, (Dense, SigmoidHead, SoftmaxHead)):
                if len(shape) != 1:
                    raise ValueError("dense layers need a flattened input")
                shape = (l.units,)
            else:
                raise ValueError(f"unknown layer {l!r}")
            out.append(shape)
        return out

    @property
    def head(self):
        return self.layers[-1]


@dataclass
class ModelState:
    """Parameters and per-layer trainable flags, aligned with spec.layers."""

    params: list  # dict {"W","b"} for parameterized layers, else None
    trainable: list
    rng_state: dict | None = None

    def copy(self) -> "ModelState":
        return ModelState(
            params=[
                None if p is None else {k: v.copy() for k, v in p.items()}
                for p in self.params
            ],
            trainable=list(self.trainable),
            rng_state=self.rng_state,
        )

    def n_parameters(self) -> int:
        return sum(
            int(v.size) for p in self.params if p is not None for v in p.values()
        )


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_state(spec: ModelSpec) -> ModelState:
    """Seeded zero-mean uniform init with bound sqrt(6 / (fan_in + fan_out))."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.seed])))
    params = []
    shape: tuple = spec.input_shape
    for l, out_shape in zip(spec.layers, spec.layer_shapes()):
        if isinstance(l, Conv2d):
            in_c = shape[0]
            k = l.kernel
            W = _glorot(rng, (l.out_channels, in_c, k, k), in_c * k * k, l.out_channels * k * k)
            params.append({"W": W, "b": np.zeros(l.out_channels)})
        elif isinstance(l, (Dense, SigmoidHead, SoftmaxHead)):
            in_d = shape[0]
            W = _glorot(rng, (in_d, l.units), in_d, l.units)
            params.append({"W": W, "b": np.zeros(l.units)})
        else:
            params.append(None)
        shape = out_shape
    return ModelState(params=params, trainable=[True] * len(spec.layers))


# ---------------------------------------------------------------------------
# layer math

def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(B, C, H, W) -> (B, H*W, C*k*k) patches of the 1-padded input."""
    B, C, H, W = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    s = xp.strides
    win = as_strided(
        xp,
        shape=(B, C, H, W, k, k),
        strides=(s[0], s[1], s[2], s[3], s[2], s[3]),
    )
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(B, H * W, C * k * k)


def _col2im(dcols: np.ndarray, x_shape: tuple, k: int) -> np.ndarray:
    B, C, H, W = x_shape
    dxp = np.zeros((B, C, H + 2, W + 2))
    d = dcols.reshape(B, H, W, C, k, k).transpose(0, 3, 1, 2, 4, 5)
    for di in range(k):
        for dj in range(k):
            dxp[:, :, di : di + H, dj : dj + W] += d[:, :, :, :, di, dj]
    return dxp[:, :, 1 : H + 1, 1 : W + 1]


def _conv_forward(x, W, b):
    B, C, H, Wd = x.shape
    oc, _, k, _ = W.shape
    cols = _im2col(x, k)
    out = cols @ W.reshape(oc, -1).T + b
    return out.reshape(B, H, Wd, oc).transpose(0, 3, 1, 2), cols


def _conv_backward(dout, cols, x_shape, W):
    B, C, H, Wd = x_shape
    oc, _, k, _ = W.shape
    dflat = dout.transpose(0, 2, 3, 1).reshape(B, H * Wd, oc)
    dW = np.einsum("bpc,bpo->co", cols, dflat).T.reshape(W.shape)
    db = dflat.sum(axis=(0, 1))
    dcols = dflat @ W.reshape(oc, -1)
    dx = _col2im(dcols, x_shape, k)
    return dx, dW, db


def _pool_forward(x):
    B, C, H, W = x.shape
    win = x.reshape(B, C, H // 2, 2, W // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(B, C, H // 2, W // 2, 4)
    idx = win.argmax(axis=-1)  # first max wins ties
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def _pool_backward(dout, idx, x_shape):
    B, C, H, W = x_shape
    dwin = np.zeros((B, C, H // 2, W // 2, 4))
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    dwin = dwin.reshape(B, C, H // 2, W // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return dwin.reshape(B, C, H, W)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def forward_cached(spec: ModelSpec, state: ModelState, x: np.ndarray, mode: str = "eval",
                   rng: np.random.Generator | None = None):
    """Run the stack; returns (head outputs, cache). In eval mode dropout is
    the identity (inverted-dropout convention); cache is only usable for
    backward when mode == 'train'."""
    if x.ndim != 4 or x.shape[1:] != spec.input_shape:
        raise ValueError(
            f"batch shape {x.shape} does not match input shape {spec.input_shape}"
        )
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    cache = []
    h = x
    for i, l in enumerate(spec.layers):
        p = state.params[i]
        if isinstance(l, Conv2d):
            out, cols = _conv_forward(h, p["W"], p["b"])
            cache.append(("conv", h.shape, cols))
            h = out
        elif isinstance(l, MaxPool):
            out, idx = _pool_forward(h)
            cache.append(("pool", h.shape, idx))
            h = out
        elif isinstance(l, Relu):
            mask = h > 0
            cache.append(("relu", mask))
            h = h * mask
        elif isinstance(l, Dropout):
            if mode == "train" and l.rate > 0.0:
                if rng is None:
                    raise ValueError("train-mode dropout needs an rng")
                mask = (rng.random(h.shape) >= l.rate) / (1.0 - l.rate)
                cache.append(("dropout", mask))
                h = h * mask
            else:
                cache.append(("dropout", None))
        elif isinstance(l, Flatten):
            cache.append(("flatten", h.shape))
            h = h.reshape(h.shape[0], -1)
        elif isinstance(l, Dense):
            cache.append(("dense", h))
            h = h @ p["W"] + p["b"]
        elif isinstance(l, SigmoidHead):
            z = h @ p["W"] + p["b"]
            zc = np.clip(z, -_CLAMP, _CLAMP)
            probs = _sigmoid(zc)
            cache.append(("sigmoid", h, np.abs(z) < _CLAMP, probs))
            h = probs
        elif isinstance(l, SoftmaxHead):
            z = h @ p["W"] + p["b"]
            zc = np.clip(z, -_CLAMP, _CLAMP)
            probs = _softmax(zc)
            cache.append(("softmax", h, np.abs(z) < _CLAMP, probs))
            h = probs
    return h, (cache if mode == "train" else None)


def forward(spec, state, x, mode="eval", rng=None) -> np.ndarray:
    out, _ = forward_cached(spec, state, x, mode, rng)
    return out


def loss_value(spec: ModelSpec, probs: np.ndarray, targets: np.ndarray) -> float:
    """BCE (mean over batch and units) for a sigmoid head, CCE (mean over
    batch) for a softmax head."""
    if isinstance(spec.head, SigmoidHead):
        t = np.asarray(targets, dtype=np.float64)
        if t.shape != probs.shape:
            raise ValueError(f"targets {t.shape} do not match outputs {probs.shape}")
        return float(-(t * np.log(probs + _EPS) + (1 - t) * np.log(1 - probs + _EPS)).mean())
    t = np.asarray(targets)
    if t.ndim != 1 or t.shape[0] != probs.shape[0]:
        raise ValueError("softmax head needs one class index per sample")
    picked = probs[np.arange(len(t)), t.astype(int)]
    return float(-np.log(picked + _EPS).mean())


def _head_grad(spec, probs, targets):
    """dLoss/dprobs for the head's paired loss."""
    if isinstance(spec.head, SigmoidHead):
        t = np.asarray(targets, dtype=np.float64)
        return (-(t / (probs + _EPS)) + (1 - t) / (1 - probs + _EPS)) / probs.size
    t = np.asarray(targets).astype(int)
    g = np.zeros_like(probs)
    rows = np.arange(len(t))
    g[rows, t] = -1.0 / (probs[rows, t] + _EPS) / len(t)
    return g


def backward(spec: ModelSpec, state: ModelState, cache, targets):
    """Gradients of the head's loss for every trainable parameter.

    Returns a list aligned with spec.layers; frozen or parameterless layers
    hold None (frozen layers get no gradient slot at all).
    """
    if cache is None:
        raise ValueError("backward needs the cache of a train-mode forward pass")
    grads: list = [None] * len(spec.layers)
    dh = None
    for i in range(len(spec.layers) - 1, -1, -1):
        l = spec.layers[i]
        entry = cache[i]
        p = state.params[i]
        if isinstance(l, (SigmoidHead, SoftmaxHead)):
            _, x_in, in_range, probs = entry
            gp = _head_grad(spec, probs, targets)
            if isinstance(l, SigmoidHead):
                dz = gp * probs * (1 - probs)
            else:
                dz = probs * (gp - (gp * probs).sum(axis=1, keepdims=True))
            dz = dz * in_range  # clamped logits have zero gradient
            if state.trainable[i]:
                grads[i] = {"W": x_in.T @ dz, "b": dz.sum(axis=0)}
            dh = dz @ p["W"].T
        elif isinstance(l, Dense):
            _, x_in = entry
            if state.trainable[i]:
                grads[i] = {"W": x_in.T @ dh, "b": dh.sum(axis=0)}
            dh = dh @ p["W"].T
        elif isinstance(l, Flatten):
            _, in_shape = entry
            dh = dh.reshape(in_shape)
        elif isinstance(l, Dropout):
            _, mask = entry
            if mask is not None:
                dh = dh * mask
        elif isinstance(l, Relu):
            _, mask = entry
            dh = dh * mask
        elif isinstance(l, MaxPool):
            _, in_shape, idx = entry
            dh = _pool_backward(dh, idx, in_shape)
        elif isinstance(l, Conv2d):
            _, in_shape, cols = entry
            dx, dW, db = _conv_backward(dh, cols, in_shape, p["W"])
            if state.trainable[i]:
                grads[i] = {"W": dW, "b": db}
            dh = dx
    return grads


# ---------------------------------------------------------------------------
# training

class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    loss: str  # "bce" or "cce"
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 5
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.loss not in ("bce", "cce"):
            raise ValueError("loss must be 'bce' or 'cce'")
        # learning_rate 0 is allowed so no-op training stays expressible
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def _check_labels(spec: ModelSpec, y: np.ndarray, cfg: TrainConfig):
    head = spec.head
    if isinstance(head, SigmoidHead):
        if cfg.loss != "bce":
            raise ValueError("sigmoid head trains with loss='bce'")
        if y.ndim != 2 or y.shape[1] != head.units:
            raise ValueError(f"sigmoid head expects (n, {head.units}) bit labels")
    else:
        if cfg.loss != "cce":
            raise ValueError("softmax head trains with loss='cce'")
        if y.ndim != 1:
            raise ValueError("softmax head expects a vector of class indices")
        if y.size and (y.min() < 0 or y.max() >= head.units):
            raise ValueError("class indices outside head range")


def train(
    spec: ModelSpec,
    data: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    state: ModelState | None = None,
) -> tuple[ModelState, list[float]]:
    """Mini-batch SGD with momentum; returns (state, per-epoch mean loss).

    Deterministic in (spec, data, cfg): epoch shuffling and dropout masks come
    from a PCG64 stream seeded with cfg.seed. The input state is not mutated;
    frozen layers are never updated. Aborts on a non-finite loss.
    """
    X, Y = data
    X = np.asarray(X, dtype=np.float64)
    _check_labels(spec, np.asarray(Y), cfg)
    st = (state.copy() if state is not None else init_state(spec))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed])))
    velocity = [
        None
        if p is None or not st.trainable[i]
        else {k: np.zeros_like(v) for k, v in p.items()}
        for i, p in enumerate(st.params)
    ]
    n = X.shape[0]
    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            xb, yb = X[batch], np.asarray(Y)[batch]
            probs, cache = forward_cached(spec, st, xb, mode="train", rng=rng)
            loss = loss_value(spec, probs, yb)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch}, batch offset {start}"
                )
            grads = backward(spec, st, cache, yb)
            for i, g in enumerate(grads):
                if g is None:
                    continue
                for k in g:
                    v = velocity[i][k]
                    v *= cfg.momentum
                    v -= cfg.learning_rate * g[k]
                    st.params[i][k] += v
            total += loss * len(batch)
        history.append(total / n)
    st.rng_state = rng.bit_generator.state
    return st, history


def freeze_and_split(
    spec: ModelSpec,
    state: ModelState,
    dense_units: int = 400,
    head_units: int = 12,
    seed: int | None = None,
) -> tuple[ModelSpec, ModelState]:
    """Reuse the convolutional stack frozen, under a fresh dense head.

    The split point is after the last conv/pool layer; everything kept is
    marked frozen (byte-identical through any retraining), and a
    dense(dense_units) + relu + sigmoid(head_units) head is freshly
    initialized on top.
    """
    conv_idx = [i for i, l in enumerate(spec.layers) if isinstance(l, Conv2d)]
    if not conv_idx:
        raise ValueError("freeze_and_split needs at least one conv layer")
    split = max(
        i for i, l in enumerate(spec.layers) if isinstance(l, (Conv2d, MaxPool))
    )
    kept = spec.layers[: split + 1]
    new_spec = ModelSpec(
        input_shape=spec.input_shape,
        layers=kept + (Flatten(), Dense(dense_units), Relu(), SigmoidHead(head_units)),
        seed=spec.seed + 1 if seed is None else seed,
    )
    new_state = init_state(new_spec)
    for i in range(split + 1):
        src = state.params[i]
        new_state.params[i] = None if src is None else {k: v.copy() for k, v in src.items()}
        new_state.trainable[i] = False
    return new_spec, new_state


# ---------------------------------------------------------------------------
# presets

def preset_compact_cnn(
    input_shape: tuple[int, int, int],
    head_units: int,
    head: str = "sigmoid",
    conv_channels: Sequence[int] = (8, 16),
    dense_units: Sequence[int] = (64,),
    dropout_rate: float = 0.0,
    seed: int = 0,
) -> ModelSpec:
    """Small conv-pool stack with a narrow dense layer; the fast workhorse."""
    layers: list = []
    for c in conv_channels:
        layers += [Conv2d(c), Relu(), MaxPool()]
    layers.append(Flatten())
    for u in dense_units:
        layers += [Dense(u), Relu()]
        if dropout_rate > 0:
            layers.append(Dropout(dropout_rate))
    layers.append(_make_head(head, head_units))
    return ModelSpec(tuple(input_shape), tuple(layers), seed=seed)


def preset_wide_cnn(
    input_shape: tuple[int, int, int],
    head_units: int,
    head: str = "sigmoid",
    width_multiplier: float = 1 / 16,
    dropout_rate: float = 0.4,
    seed: int = 0,
) -> ModelSpec:
    """Conv blocks of 8/16 filters with pools, then 16/20 filters and a third
    pool, then a three-layer dense stack of 4096/4096/512 units scaled by
    ``width_multiplier`` (the default 1/16 gives 256/256/32), dropout after
    each of the first two dense layers."""
    d1 = max(1, round(4096 * width_multiplier))
    d2 = max(1, round(4096 * width_multiplier))
    d3 = max(1, round(512 * width_multiplier))
    layers = (
        Conv2d(8), Relu(), MaxPool(),
        Conv2d(16), Relu(), MaxPool(),
        Conv2d(16), Relu(),
        Conv2d(20), Relu(), MaxPool(),
        Flatten(),
        Dense(d1), Relu(), Dropout(dropout_rate),
        Dense(d2), Relu(), Dropout(dropout_rate),
        Dense(d3), Relu(),
        _make_head(head, head_units),
    )
    return ModelSpec(tuple(input_shape), layers, seed=seed)


def _make_head(head: str, units: int):
    if head == "sigmoid":
        return SigmoidHead(units)
    if head == "softmax":
        return SoftmaxHead(units)
    raise ValueError("head must be 'sigmoid' or 'softmax'")


# ---------------------------------------------------------------------------
# checkpoints

_LAYER_TAGS = {
    Conv2d: "conv2d",
    MaxPool: "maxpool",
    Relu: "relu",
    Dropout: "dropout",
    Flatten: "flatten",
    Dense: "dense",
    SigmoidHead: "sigmoid_head",
    SoftmaxHead: "softmax_head",
}


def _layer_to_dict(l) -> dict:
    d = {"type": _LAYER_TAGS[type(l)]}
    if isinstance(l, Conv2d):
        d["out_channels"] = l.out_channels
    elif isinstance(l, Dropout):
        d["rate"] = l.rate
    elif isinstance(l, (Dense, SigmoidHead, SoftmaxHead)):
        d["units"] = l.units
    return d


def _layer_from_dict(d: dict):
    t = d["type"]
    if t == "conv2d":
        return Conv2d(d["out_channels"])
    if t == "maxpool":
        return MaxPool()
    if t == "relu":
        return Relu()
    if t == "dropout":
        return Dropout(d["rate"])
    if t == "flatten":
        return Flatten()
    if t == "dense":
        return Dense(d["units"])
    if t == "sigmoid_head":
        return SigmoidHead(d["units"])
    if t == "softmax_head":
        return SoftmaxHead(d["units"])
    raise ValueError(f"unknown layer type {t!r} in checkpoint")


def spec_digest(spec: ModelSpec) -> str:
    """Stable SHA-256 of the architecture description."""
    import hashlib

    meta = {
        "input_shape": list(spec.input_shape),
        "seed": spec.seed,
        "layers": [_layer_to_dict(l) for l in spec.layers],
    }
    return hashlib.sha256(json.dumps(meta, sort_keys=True).encode()).hexdigest()


def save_checkpoint(path, spec: ModelSpec, state: ModelState) -> None:
    """Versioned binary: magic, JSON spec, then parameter tensors as
    little-endian float32 with shape headers."""
    meta = {
        "version": 1,
        "input_shape": list(spec.input_shape),
        "seed": spec.seed,
        "layers": [_layer_to_dict(l) for l in spec.layers],
        "trainable": [bool(t) for t in state.trainable],
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for p in state.params:
            if p is None:
                continue
            for name in ("W", "b"):
                arr = p[name]
                fh.write(struct.pack("<B", arr.ndim))
                for dim in arr.shape:
                    fh.write(struct.pack("<I", dim))
                fh.write(arr.astype("<f4").tobytes(order="C"))


def load_checkpoint(path) -> tuple[ModelSpec, ModelState]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a model checkpoint (magic {magic!r})")
        (blen,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(blen).decode("utf-8"))
        if meta.get("version") != 1:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        spec = ModelSpec(
            input_shape=tuple(meta["input_shape"]),
            layers=tuple(_layer_from_dict(d) for d in meta["layers"]),
            seed=meta["seed"],
        )
        params = []
        for l in spec.layers:
            if not isinstance(l, _PARAM_LAYERS):
                params.append(None)
                continue
            p = {}
            for name in ("W", "b"):
                (ndim,) = struct.unpack("<B", fh.read(1))
                shape = tuple(
                    struct.unpack("<I", fh.read(4))[0] for _ in range(ndim)
                )
                count = int(np.prod(shape)) if shape else 1
                raw = fh.read(4 * count)
                p[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)
            params.append(p)
    return spec, ModelState(params=params, trainable=list(meta["trainable"]))
