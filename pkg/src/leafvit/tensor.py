"""Dense kernels (matmul, row softmax, layer norm, ReLU) and their hand-written gradients.

Matrices are 2-D float64 numpy arrays and vectors are 1-D ones. The
``*_backward`` functions take the upstream gradient and return gradients with
respect to each input, in argument order.
"""
import numpy as np

from .errors import ShapeError

LN_EPS = 1e-5


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    return a


def matmul(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def matmul_backward(grad, a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1:
        return grad @ b.T, np.outer(a, grad)
    return grad @ b.T, a.T @ grad


def softmax_rows(m):
    m = np.asarray(m, dtype=np.float64)
    z = np.exp(m - m.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def softmax_rows_backward(grad, out):
    """Gradient through softmax given its output ``out``."""
    return out * (grad - (grad * out).sum(axis=-1, keepdims=True))


def layer_norm(v, gamma, beta, eps=LN_EPS):
    """Normalise over the last axis with population variance; works row-wise on matrices."""
    v = np.asarray(v, dtype=np.float64)
    if np.shape(gamma)[-1] != v.shape[-1] or np.shape(beta)[-1] != v.shape[-1]:
        raise ShapeError(
            f"layer_norm parameters {np.shape(gamma)}/{np.shape(beta)} do not match input {v.shape}"
        )
    mean = v.mean(axis=-1, keepdims=True)
    var = ((v - mean) ** 2).mean(axis=-1, keepdims=True)
    return gamma * (v - mean) / np.sqrt(var + eps) + beta


def layer_norm_backward(grad, v, gamma, eps=LN_EPS):
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[-1]
    mean = v.mean(axis=-1, keepdims=True)
    var = ((v - mean) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (v - mean) * inv
    axes = tuple(range(v.ndim - 1))
    dgamma = (grad * xhat).sum(axis=axes)
    dbeta = grad.sum(axis=axes)
    dxhat = grad * gamma
    dv = inv / n * (n * dxhat - dxhat.sum(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
    return dv, dgamma, dbeta


def relu(v):
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def relu_backward(grad, v):
    return grad * (np.asarray(v) > 0)
