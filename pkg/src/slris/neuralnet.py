"""Small 1-D CNN for spectrum-occupancy classification, written against numpy.

Architecture (input is a (2, L) I/Q array, channel 0 = I, channel 1 = Q)::

    conv1d(2 -> F1, k1) + ReLU
    conv1d(F1 -> F2, k2) + ReLU
    flatten
    dense(F2 * T2 -> H) + ReLU
    dense(H -> 4) + softmax

Valid (unpadded) convolutions, no pooling, no dropout, float64 throughout.
Gradients are hand-derived; ``tests/test_gradients.py`` checks them against
central finite differences.

Online cost per inference is dominated by the conv2 and dense1 products, so
controlling K surfaces costs O(M^2 C K) for M neurons per layer and C layers.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    BadMagicError,
    NonFiniteError,
    PayloadSizeError,
    TruncatedFileError,
    VersionMismatchError,
)

logger = logging.getLogger(__name__)

N_CLASSES = 4
PARAM_ORDER = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "dense1_w", "dense1_b", "out_w", "out_b")

_ACTIVATIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "relu": lambda z: np.maximum(z, 0.0),
    "identity": lambda z: z,
}


def _activation(name: str):
    try:
        return _ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}") from None


# ---------------------------------------------------------------------------
# Layer primitives
# ---------------------------------------------------------------------------


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(B, C, T) -> (C*k, B*T') patch matrix, T' = T - k + 1."""
    B, C, T = x.shape
    Tp = T - k + 1
    cols = sliding_window_view(x, k, axis=2)  # (B, C, T', k)
    return cols.transpose(1, 3, 0, 2).reshape(C * k, B * Tp)


def _conv_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray):
    B, C, T = x.shape
    F, C_k, k = kernel.shape
    if C_k != C:
        raise ValueError(f"kernel expects {C_k} input channels, got {C}")
    if T < k:
        raise ValueError(f"input length {T} shorter than kernel {k}")
    Tp = T - k + 1
    cols = _im2col(x, k)
    z = (kernel.reshape(F, C * k) @ cols).reshape(F, B, Tp).transpose(1, 0, 2)
    return z + bias[None, :, None], cols


def _conv_backward(grad: np.ndarray, cols: np.ndarray, kernel: np.ndarray, input_shape, need_input_grad=True):
    B, C, T = input_shape
    F, _, k = kernel.shape
    Tp = T - k + 1
    g = grad.transpose(1, 0, 2).reshape(F, B * Tp)
    d_kernel = (g @ cols.T).reshape(F, C, k)
    d_bias = grad.sum(axis=(0, 2))
    if not need_input_grad:
        return d_kernel, d_bias, None
    dcols = (kernel.reshape(F, C * k).T @ g).reshape(C, k, B, Tp)
    dx = np.zeros(input_shape)
    for tau in range(k):
        dx[:, :, tau : tau + Tp] += dcols[:, tau].transpose(1, 0, 2)
    return d_kernel, d_bias, dx


def conv1d_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, activation: str = "relu") -> np.ndarray:
    """Valid 1-D convolution (cross-correlation) with activation.

    ``out[c, t] = act(bias[c] + sum_{i, tau} kernel[c, i, tau] * x[i, t + tau])``.
    Accepts a single (C_in, T) input or a batch (B, C_in, T).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    z, _ = _conv_forward(x[None] if single else x, np.asarray(kernel, float), np.asarray(bias, float))
    out = _activation(activation)(z)
    return out[0] if single else out


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray, activation: str = "identity") -> np.ndarray:
    """``act(W @ x + b)`` for a vector, or row-wise for a (B, in) batch."""
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if x.shape[-1] != weights.shape[1] or weights.shape[0] != np.shape(bias)[0]:
        raise ValueError(f"dimension mismatch: x {x.shape}, W {weights.shape}, b {np.shape(bias)}")
    return _activation(activation)(x @ weights.T + bias)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


def cross_entropy(probs: np.ndarray, label: int) -> float:
    """``-ln probs[label]`` for a probability vector."""
    p = float(np.asarray(probs, dtype=np.float64)[label])
    return -math.log(max(p, np.finfo(float).tiny))


def cross_entropy_logits(logits: np.ndarray, labels) -> float:
    """Mean cross-entropy computed from logits via log-softmax (stable)."""
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(labels)
    return float(-log_softmax(logits)[np.arange(len(labels)), labels].mean())


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass
class CnnModel:
    L: int
    params: Dict[str, np.ndarray]

    @property
    def F1(self) -> int:
        return self.params["conv1_w"].shape[0]

    @property
    def k1(self) -> int:
        return self.params["conv1_w"].shape[2]

    @property
    def F2(self) -> int:
        return self.params["conv2_w"].shape[0]

    @property
    def k2(self) -> int:
        return self.params["conv2_w"].shape[2]

    @property
    def H(self) -> int:
        return self.params["dense1_w"].shape[0]

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "CnnModel":
        return CnnModel(self.L, {k: v.copy() for k, v in self.params.items()})

    def check_shapes(self) -> None:
        p = self.params
        T2 = _conv_out_len(self.L, self.k1, self.k2)
        expected = _param_shapes(self.L, self.F1, self.k1, self.F2, self.k2, self.H)
        for name in PARAM_ORDER:
            if p[name].shape != expected[name]:
                raise ValueError(f"{name}: shape {p[name].shape}, expected {expected[name]} (T2={T2})")


def _conv_out_len(L: int, k1: int, k2: int) -> int:
    T2 = L - k1 - k2 + 2
    if T2 < 1:
        raise ValueError(f"window length {L} too short for kernels {k1}, {k2}")
    return T2


def _param_shapes(L, F1, k1, F2, k2, H) -> Dict[str, Tuple[int, ...]]:
    T2 = _conv_out_len(L, k1, k2)
    return {
        "conv1_w": (F1, 2, k1),
        "conv1_b": (F1,),
        "conv2_w": (F2, F1, k2),
        "conv2_b": (F2,),
        "dense1_w": (H, F2 * T2),
        "dense1_b": (H,),
        "out_w": (N_CLASSES, H),
        "out_b": (N_CLASSES,),
    }


def init_model(
    L: int,
    seed: int = 0,
    F1: int = 16,
    k1: int = 5,
    F2: int = 32,
    k2: int = 5,
    H: int = 64,
) -> CnnModel:
    """He-uniform ReLU layers, ``U(+-sqrt(1/fan_in))`` output layer, zero biases."""
    rng = np.random.default_rng(seed)
    shapes = _param_shapes(L, F1, k1, F2, k2, H)
    params = {}
    for name in PARAM_ORDER:
        shape = shapes[name]
        if name.endswith("_b"):
            params[name] = np.zeros(shape)
            continue
        fan_in = int(np.prod(shape[1:]))
        limit = math.sqrt(1.0 / fan_in) if name == "out_w" else math.sqrt(6.0 / fan_in)
        params[name] = rng.uniform(-limit, limit, size=shape)
    return CnnModel(L, params)


def zero_model(L: int, **sizes) -> CnnModel:
    m = init_model(L, **sizes)
    for v in m.params.values():
        v[...] = 0.0
    return m


def _forward(model: CnnModel, x: np.ndarray):
    p = model.params
    z1, cols1 = _conv_forward(x, p["conv1_w"], p["conv1_b"])
    a1 = np.maximum(z1, 0.0)
    z2, cols2 = _conv_forward(a1, p["conv2_w"], p["conv2_b"])
    a2 = np.maximum(z2, 0.0)
    flat = a2.reshape(len(x), -1)
    z3 = flat @ p["dense1_w"].T + p["dense1_b"]
    a3 = np.maximum(z3, 0.0)
    logits = a3 @ p["out_w"].T + p["out_b"]
    if not np.all(np.isfinite(logits)):
        raise NonFiniteError("non-finite logits in forward pass")
    cache = (x.shape, cols1, z1, a1.shape, cols2, z2, flat, z3, a3)
    return logits, cache


def _as_batch(model: CnnModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != 2:
        raise ValueError(f"expected (B, 2, L) input, got {x.shape}")
    if x.shape[2] != model.L:
        raise ValueError(f"window length {x.shape[2]} does not match model length {model.L}")
    return x


def forward_logits(model: CnnModel, x: np.ndarray) -> np.ndarray:
    return _forward(model, _as_batch(model, x))[0]


def backward(model: CnnModel, x: np.ndarray, labels) -> Tuple[float, Dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its gradient for every parameter."""
    loss, grads, _ = _loss_and_grads(model, _as_batch(model, x), labels)
    return loss, grads


def _loss_and_grads(model: CnnModel, x: np.ndarray, labels):
    labels = np.asarray(labels, dtype=np.intp)
    B = len(x)
    p = model.params
    logits, (x_shape, cols1, z1, a1_shape, cols2, z2, flat, z3, a3) = _forward(model, x)
    logp = log_softmax(logits)
    loss = float(-logp[np.arange(B), labels].mean())

    d_logits = np.exp(logp)
    d_logits[np.arange(B), labels] -= 1.0
    d_logits /= B

    g = {}
    g["out_w"] = d_logits.T @ a3
    g["out_b"] = d_logits.sum(axis=0)
    dz3 = (d_logits @ p["out_w"]) * (z3 > 0)
    g["dense1_w"] = dz3.T @ flat
    g["dense1_b"] = dz3.sum(axis=0)
    dz2 = (dz3 @ p["dense1_w"]).reshape(z2.shape) * (z2 > 0)
    g["conv2_w"], g["conv2_b"], da1 = _conv_backward(dz2, cols2, p["conv2_w"], a1_shape)
    dz1 = da1 * (z1 > 0)
    g["conv1_w"], g["conv1_b"], _ = _conv_backward(dz1, cols1, p["conv1_w"], x_shape, need_input_grad=False)
    for name, v in g.items():
        if not np.all(np.isfinite(v)):
            raise NonFiniteError(f"non-finite gradient for {name}")
    return loss, g, logits


# ---------------------------------------------------------------------------
# Optimizer and training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 64
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update. Parameters are updated in place."""
    state.t += 1
    t = state.t
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, g in grads.items():
        theta = params[name]
        if g.shape != theta.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {theta.shape}")
        m = state.m.setdefault(name, np.zeros_like(theta))
        v = state.v.setdefault(name, np.zeros_like(theta))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        theta -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.epsilon)
    return params, state


@dataclass
class TrainReport:
    initial_loss: float
    epoch_loss: List[float]
    epoch_accuracy: List[float]
    test_accuracy: float = float("nan")
    per_class_accuracy: List[float] = field(default_factory=list)
    confusion: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "initial_loss": self.initial_loss,
            "epoch_loss": list(self.epoch_loss),
            "epoch_accuracy": list(self.epoch_accuracy),
            "test_accuracy": self.test_accuracy,
            "per_class_accuracy": list(self.per_class_accuracy),
            "confusion": None if self.confusion is None else self.confusion.tolist(),
        }


def iq_to_channels(iq: np.ndarray) -> np.ndarray:
    """(B, L) complex -> (B, 2, L) float64."""
    iq = np.asarray(iq)
    out = np.empty((iq.shape[0], 2, iq.shape[1]))
    out[:, 0] = iq.real
    out[:, 1] = iq.imag
    return out


def predict_logits_batch(model: CnnModel, iq: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Logits for a (B, L) complex array, evaluated in chunks."""
    iq = np.asarray(iq)
    if iq.ndim != 2 or iq.shape[1] != model.L:
        raise ValueError(f"expected (B, {model.L}) windows, got {iq.shape}")
    out = np.empty((len(iq), N_CLASSES))
    for s in range(0, len(iq), batch_size):
        out[s : s + batch_size] = _forward(model, iq_to_channels(iq[s : s + batch_size]))[0]
    return out


def predict_classes(model: CnnModel, iq: np.ndarray, batch_size: int = 256) -> np.ndarray:
    return predict_logits_batch(model, iq, batch_size).argmax(axis=1)


def predict(model: CnnModel, window) -> np.ndarray:
    """Softmax posterior over (Idle, DOnly, IOnly, Both) for one window.

    ``window`` may be an ``IqWindow``, a length-L complex array or a (2, L)
    real array.
    """
    samples = getattr(window, "samples", window)
    samples = np.asarray(samples)
    x = samples if samples.ndim == 2 else iq_to_channels(samples[None])[0]
    return softmax(forward_logits(model, x)[0])


def confusion_matrix(true_labels, pred_labels, n_classes: int = N_CLASSES) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(true_labels, dtype=np.intp), np.asarray(pred_labels, dtype=np.intp)), 1)
    return cm


def per_class_accuracy(cm: np.ndarray) -> np.ndarray:
    totals = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(totals > 0, np.diag(cm) / np.maximum(totals, 1), np.nan)


def _mean_loss(model: CnnModel, iq: np.ndarray, labels: np.ndarray, batch_size: int = 256) -> float:
    logits = predict_logits_batch(model, iq, batch_size)
    return cross_entropy_logits(logits, labels)


def train(model_init: CnnModel, split, config: TrainConfig = TrainConfig()) -> Tuple[CnnModel, TrainReport]:
    """Mini-batch Adam on ``split.train``; evaluate on ``split.test`` at the end.

    The input model is not modified. Shuffling uses ``config.seed`` only, so
    the result is a deterministic function of (initial weights, data, config).
    """
    train_ds, test_ds = split.train, split.test
    if len(train_ds) == 0:
        raise ValueError("empty training set")
    if train_ds.L != model_init.L:
        raise ValueError(f"dataset window length {train_ds.L} != model length {model_init.L}")

    model = model_init.copy()
    rng = np.random.default_rng(config.seed)
    state = AdamState()
    iq, labels = train_ds.iq, train_ds.labels.astype(np.intp)
    n = len(labels)

    report = TrainReport(initial_loss=_mean_loss(model, iq, labels), epoch_loss=[], epoch_accuracy=[])
    logger.info("initial loss %.4f on %d windows", report.initial_loss, n)

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for s in range(0, n, config.batch_size):
            idx = order[s : s + config.batch_size]
            x = iq_to_channels(iq[idx])
            loss, grads, logits = _loss_and_grads(model, x, labels[idx])
            adam_step(model.params, grads, state, config)
            loss_sum += loss * len(idx)
            correct += int((logits.argmax(axis=1) == labels[idx]).sum())
        report.epoch_loss.append(loss_sum / n)
        report.epoch_accuracy.append(correct / n)
        logger.info("epoch %d loss %.4f acc %.4f", epoch + 1, report.epoch_loss[-1], report.epoch_accuracy[-1])

    if len(test_ds) > 0:
        pred = predict_classes(model, test_ds.iq)
        cm = confusion_matrix(test_ds.labels, pred)
        report.confusion = cm
        report.per_class_accuracy = per_class_accuracy(cm).tolist()
        report.test_accuracy = float(np.trace(cm) / cm.sum())
    return model, report


# ---------------------------------------------------------------------------
# Checkpoint format
# ---------------------------------------------------------------------------

MODEL_MAGIC = b"RISM"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sH7I")  # magic, version, L, in_ch, F1, k1, F2, k2, H
_MODEL_TAIL = struct.Struct("<I")  # n_classes


def model_to_bytes(model: CnnModel) -> bytes:
    model.check_shapes()
    head = _MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, model.L, 2, model.F1, model.k1, model.F2, model.k2, model.H)
    body = b"".join(np.ascontiguousarray(model.params[n], dtype="<f8").tobytes() for n in PARAM_ORDER)
    return head + _MODEL_TAIL.pack(N_CLASSES) + body


def model_from_bytes(buf: bytes) -> CnnModel:
    if len(buf) < 4 or buf[:4] != MODEL_MAGIC:
        raise BadMagicError("not a RISM checkpoint (bad magic)")
    hsize = _MODEL_HEADER.size + _MODEL_TAIL.size
    if len(buf) < hsize:
        raise TruncatedFileError("checkpoint truncated inside header")
    _, version, L, in_ch, F1, k1, F2, k2, H = _MODEL_HEADER.unpack_from(buf)
    if version != MODEL_VERSION:
        raise VersionMismatchError(f"checkpoint version {version}, expected {MODEL_VERSION}")
    (n_classes,) = _MODEL_TAIL.unpack_from(buf, _MODEL_HEADER.size)
    if in_ch != 2 or n_classes != N_CLASSES:
        raise PayloadSizeError(f"unsupported layout: {in_ch} input channels, {n_classes} classes")
    try:
        shapes = _param_shapes(L, F1, k1, F2, k2, H)
    except ValueError as exc:
        raise PayloadSizeError(str(exc)) from None
    expected = 8 * sum(int(np.prod(s)) for s in shapes.values())
    payload = len(buf) - hsize
    if payload < expected:
        raise TruncatedFileError(f"checkpoint payload has {payload} bytes, header implies {expected}")
    if payload > expected:
        raise PayloadSizeError(f"checkpoint payload has {payload} bytes, header implies {expected}")
    params = {}
    offset = hsize
    for name in PARAM_ORDER:
        count = int(np.prod(shapes[name]))
        params[name] = np.frombuffer(buf, dtype="<f8", count=count, offset=offset).astype(np.float64).reshape(shapes[name])
        offset += 8 * count
    return CnnModel(L, params)


def save_model(model: CnnModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path) -> CnnModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())


def describe(model: CnnModel) -> str:
    return (
        f"CnnModel(L={model.L}, conv1={model.F1}x{model.k1}, conv2={model.F2}x{model.k2}, "
        f"dense={model.H}, params={model.n_params})"
    )


__all__ = [
    "AdamState",
    "CnnModel",
    "TrainConfig",
    "TrainReport",
    "adam_step",
    "backward",
    "confusion_matrix",
    "conv1d_forward",
    "cross_entropy",
    "cross_entropy_logits",
    "dense_forward",
    "init_model",
    "load_model",
    "predict",
    "predict_classes",
    "save_model",
    "softmax",
    "train",
    "zero_model",
]
