"""The two convolutional classifier heads with hand-derived backpropagation.

Layout: square reshape -> conv3x3+ReLU -> maxpool2 -> conv3x3+ReLU -> maxpool2
-> flatten -> dense+ReLU -> dropout -> dense -> softmax.

Feature maps are (batch, height, width, channels) float64 arrays. Weights are a
plain ``dict`` of named arrays so they serialise directly and the optimiser can
walk them by name.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError, ShapeError
from .rng import glorot_uniform, substream
from .tensor import relu, relu_backward, softmax_rows

CE_CLIP = 1e-12
PARAM_NAMES = ("conv1.w", "conv1.b", "conv2.w", "conv2.b", "dense.w", "dense.b", "out.w", "out.b")


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    conv_filters: tuple
    dense_units: int
    dropout_rate: float
    num_classes: int = 2
    kernel_size: int = 3

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.kernel_size != 3:
            raise ValueError("only 3x3 kernels are supported")


ARCHITECTURES = {
    "arch1": ArchitectureSpec("arch1", (32, 64), 128, 0.5),
    "arch2": ArchitectureSpec("arch2", (64, 128), 512, 0.1),
}


def architecture(name, num_classes, **overrides):
    try:
        base = ARCHITECTURES[name]
    except KeyError:
        raise ValueError(f"unknown architecture {name!r}; choose from {sorted(ARCHITECTURES)}") from None
    return replace(base, num_classes=num_classes, **overrides)


def map_side(length):
    return math.isqrt(length - 1) + 1 if length > 1 else 1


def reshape_features(f):
    """Lay features row-major onto the smallest square grid, zero-padding the tail.

    Accepts a single vector (returns H x W x 1) or a batch (returns B x H x W x 1).
    """
    f = np.asarray(f, dtype=np.float64)
    single = f.ndim == 1
    f = np.atleast_2d(f)
    b, n = f.shape
    if n < 1:
        raise ShapeError("feature vector is empty")
    s = map_side(n)
    grid = np.zeros((b, s * s))
    grid[:, :n] = f
    grid = grid.reshape(b, s, s, 1)
    return grid[0] if single else grid


def _im2col(m):
    b, h, w, c = m.shape
    pad = np.pad(m, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.empty((b, h, w, 3, 3, c))
    for i in range(3):
        for j in range(3):
            cols[:, :, :, i, j, :] = pad[:, i:i + h, j:j + w, :]
    return cols.reshape(b * h * w, 9 * c)


def _conv_linear(m, kernels, biases):
    if m.shape[-1] != kernels.shape[2]:
        raise ShapeError(
            f"feature map has {m.shape[-1]} channels, kernels expect {kernels.shape[2]}"
        )
    b, h, w, _ = m.shape
    cols = _im2col(m)
    out = cols @ kernels.reshape(-1, kernels.shape[3]) + biases
    return out.reshape(b, h, w, -1), cols


def conv2d(m, kernels, biases):
    """3x3 stride-1 'same' convolution (cross-correlation) followed by ReLU."""
    m = np.asarray(m, dtype=np.float64)
    single = m.ndim == 3
    if single:
        m = m[None]
    out = relu(_conv_linear(m, np.asarray(kernels, dtype=np.float64), biases)[0])
    return out[0] if single else out


def _conv_backward(dpre, cols, kernels, in_shape):
    b, h, w, c = in_shape
    o = kernels.shape[3]
    d2 = dpre.reshape(-1, o)
    dk = (cols.T @ d2).reshape(kernels.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ kernels.reshape(-1, o).T).reshape(b, h, w, 3, 3, c)
    dpad = np.zeros((b, h + 2, w + 2, c))
    for i in range(3):
        for j in range(3):
            dpad[:, i:i + h, j:j + w, :] += dcols[:, :, :, i, j, :]
    return dpad[:, 1:-1, 1:-1, :], dk, db


def maxpool_2x2(m):
    """Non-overlapping 2x2 max pooling; an odd trailing row or column is dropped."""
    m = np.asarray(m, dtype=np.float64)
    single = m.ndim == 3
    if single:
        m = m[None]
    out = _pool(m)[0]
    return out[0] if single else out


def _pool(m):
    b, h, w, c = m.shape
    h2, w2 = h // 2, w // 2
    if h2 == 0 or w2 == 0:
        raise ShapeError(f"feature map {h}x{w} too small to pool")
    win = m[:, :2 * h2, :2 * w2, :].reshape(b, h2, 2, w2, 2, c).transpose(0, 1, 3, 5, 2, 4)
    win = win.reshape(b, h2, w2, c, 4)
    arg = win.argmax(axis=-1)  # first maximum wins ties
    return np.take_along_axis(win, arg[..., None], axis=-1)[..., 0], arg


def _pool_backward(dout, arg, in_shape):
    b, h, w, c = in_shape
    h2, w2 = h // 2, w // 2
    dwin = np.zeros((b, h2, w2, c, 4))
    np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=-1)
    dwin = dwin.reshape(b, h2, w2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(b, 2 * h2, 2 * w2, c)
    dm = np.zeros(in_shape)
    dm[:, :2 * h2, :2 * w2, :] = dwin
    return dm


def flat_size(spec, input_length):
    return _flat_size(input_length, spec.conv_filters[1])


def _flat_size(input_length, channels):
    s = map_side(input_length) // 2 // 2
    if s < 1:
        raise ShapeError(f"input length {input_length} too short for two pooling stages")
    return s * s * channels


def init_cnn(spec, input_length, seed=0):
    """Glorot-uniform kernels and dense matrices, zero biases."""
    f1, f2 = spec.conv_filters
    flat = flat_size(spec, input_length)
    return {
        "conv1.w": glorot_uniform((3, 3, 1, f1), seed, "cnn.conv1", 9 * 1, 9 * f1),
        "conv1.b": np.zeros(f1),
        "conv2.w": glorot_uniform((3, 3, f1, f2), seed, "cnn.conv2", 9 * f1, 9 * f2),
        "conv2.b": np.zeros(f2),
        "dense.w": glorot_uniform((flat, spec.dense_units), seed, "cnn.dense"),
        "dense.b": np.zeros(spec.dense_units),
        "out.w": glorot_uniform((spec.dense_units, spec.num_classes), seed, "cnn.out"),
        "out.b": np.zeros(spec.num_classes),
    }


def infer_architecture(weights, name=None, dropout_rate=None):
    """Recover an :class:`ArchitectureSpec` from weight shapes (dropout is not stored)."""
    missing = [k for k in PARAM_NAMES if k not in weights]
    if missing:
        raise ShapeError(f"classifier weights missing tensors {missing}")
    f1 = weights["conv1.w"].shape[3]
    f2 = weights["conv2.w"].shape[3]
    units = weights["dense.w"].shape[1]
    k = weights["out.w"].shape[1]
    if name is None:
        name = next((n for n, a in ARCHITECTURES.items()
                     if a.conv_filters == (f1, f2) and a.dense_units == units), "custom")
    if dropout_rate is None:
        dropout_rate = ARCHITECTURES[name].dropout_rate if name in ARCHITECTURES else 0.0
    return ArchitectureSpec(name, (f1, f2), units, dropout_rate, k)


def dropout_mask(shape, rate, seed):
    """Inverted-dropout multiplier: 0 for dropped units, 1/(1-rate) for survivors."""
    if rate == 0.0:
        return np.ones(shape)
    u = substream(seed, "dropout").uniform_array(shape)
    return (u >= rate) / (1.0 - rate)


def _check_input(x, w):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    expected = w["dense.w"].shape[0]
    got = _flat_size(x.shape[1], w["conv2.w"].shape[3])
    if got != expected:
        raise ShapeError(
            f"feature length {x.shape[1]} incompatible with classifier weights "
            f"(dense layer expects {expected} inputs, features give {got})"
        )
    return x


def _forward(x, spec, w, dropout):
    cache = {}
    m0 = reshape_features(x)
    pre1, cols1 = _conv_linear(m0, w["conv1.w"], w["conv1.b"])
    a1 = relu(pre1)
    p1, arg1 = _pool(a1)
    pre2, cols2 = _conv_linear(p1, w["conv2.w"], w["conv2.b"])
    a2 = relu(pre2)
    p2, arg2 = _pool(a2)
    flat = p2.reshape(len(x), -1)
    pre3 = flat @ w["dense.w"] + w["dense.b"]
    h = relu(pre3)
    if dropout is None:
        mask = None
    elif isinstance(dropout, np.ndarray):
        mask = dropout
    else:
        mask = dropout_mask(h.shape, spec.dropout_rate, dropout)
    hd = h if mask is None else h * mask
    logits = hd @ w["out.w"] + w["out.b"]
    probs = softmax_rows(logits)
    cache.update(m0=m0, pre1=pre1, cols1=cols1, a1=a1, arg1=arg1, p1=p1, pre2=pre2, cols2=cols2,
                 a2=a2, arg2=arg2, p2=p2, flat=flat, pre3=pre3, mask=mask, hd=hd)
    return probs, cache


def forward(f, spec, w, dropout=None):
    """Class probabilities for one feature vector or a batch.

    ``dropout`` is ``None`` for evaluation, an integer seed for training mode,
    or an explicit multiplier array of shape (batch, dense_units).
    """
    single = np.ndim(f) == 1
    probs, _ = _forward(_check_input(f, w), spec, w, dropout)
    return probs[0] if single else probs


def _check_labels(y, k):
    y = np.asarray(y, dtype=np.int64).ravel()
    if np.any((y < 0) | (y >= k)):
        raise DataError(f"labels must lie in [0, {k}), got range [{y.min()}, {y.max()}]")
    return y


def cross_entropy(probs, labels):
    """Per-sample ``-ln(max(p[label], 1e-12))``."""
    probs = np.atleast_2d(probs)
    labels = np.atleast_1d(labels)
    p = probs[np.arange(len(labels)), labels]
    return -np.log(np.maximum(p, CE_CLIP))


def loss_and_gradients(x, y, spec, w, dropout=None):
    """Mean cross-entropy, gradients for every parameter, and the batch probabilities."""
    x = _check_input(x, w)
    if len(x) == 0:
        raise DataError("empty batch")
    y = _check_labels(y, w["out.w"].shape[1])
    if len(y) != len(x):
        raise ShapeError(f"{len(x)} feature rows but {len(y)} labels")
    probs, c = _forward(x, spec, w, dropout)
    n = len(x)
    rows = np.arange(n)
    loss = float(cross_entropy(probs, y).mean())
    dlogits = probs.copy()
    dlogits[rows, y] -= 1.0
    dlogits[probs[rows, y] < CE_CLIP] = 0.0
    dlogits /= n
    g = {"out.w": c["hd"].T @ dlogits, "out.b": dlogits.sum(axis=0)}
    dh = dlogits @ w["out.w"].T
    if c["mask"] is not None:
        dh = dh * c["mask"]
    dpre3 = relu_backward(dh, c["pre3"])
    g["dense.w"] = c["flat"].T @ dpre3
    g["dense.b"] = dpre3.sum(axis=0)
    dp2 = (dpre3 @ w["dense.w"].T).reshape(c["p2"].shape)
    da2 = _pool_backward(dp2, c["arg2"], c["a2"].shape)
    dpre2 = relu_backward(da2, c["pre2"])
    dp1, g["conv2.w"], g["conv2.b"] = _conv_backward(dpre2, c["cols2"], w["conv2.w"], c["p1"].shape)
    da1 = _pool_backward(dp1, c["arg1"], c["a1"].shape)
    dpre1 = relu_backward(da1, c["pre1"])
    _, g["conv1.w"], g["conv1.b"] = _conv_backward(dpre1, c["cols1"], w["conv1.w"], c["m0"].shape)
    return loss, g, probs


def backward(x, y, spec, w, dropout=None):
    """Gradient of the mean cross-entropy for a batch; returns ``(grads, mean_loss)``."""
    loss, grads, _ = loss_and_gradients(x, y, spec, w, dropout)
    return grads, loss


def predict(f, spec, w):
    """Arg-max class of the evaluation-mode forward pass; ties go to the lowest index."""
    probs = forward(f, spec, w)
    return np.argmax(probs, axis=-1)
