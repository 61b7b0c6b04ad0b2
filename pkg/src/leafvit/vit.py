"""Vision Transformer feature extractor with optional linear projections.

Three variants share the same encoder:

* ``none``      -- flatten the final patch embeddings.
* ``tail``      -- flatten, then multiply by a fixed (seeded) projection matrix.
* ``blockwise`` -- each block except the last ends with a fixed projection that
                   shrinks the token dimension; the final tokens are flattened.

Blocks are post-norm: ``LN(x + MHSA(x))`` followed by ``LN(a + FFN(a))``.
There is no class token. Weights are seeded Glorot-uniform unless loaded.
"""
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, ShapeError
from .rng import glorot_uniform
from .tensor import layer_norm, relu, softmax_rows

VARIANTS = ("none", "tail", "blockwise")
FFN_ACTIVATIONS = ("outer", "inner")


@dataclass(frozen=True)
class ViTConfig:
    image_size: int = 64
    patch_size: int = 8
    embed_dim: int = 64
    num_layers: int = 4
    num_heads: int = 4
    mlp_dim: int = 128
    variant: str = "none"
    tail_features: int = 1024
    blockwise_factor: float = 0.75
    seed: int = 0
    # "outer": ReLU(W2(W1 x + b1) + b2); "inner": W2 ReLU(W1 x + b1) + b2
    ffn_activation: str = "outer"

    def __post_init__(self):
        for name in ("image_size", "patch_size", "embed_dim", "num_layers", "num_heads", "mlp_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.image_size % self.patch_size:
            raise ConfigError(
                f"image_size {self.image_size} is not divisible by patch_size {self.patch_size}"
            )
        if self.embed_dim % self.num_heads:
            raise ConfigError(
                f"embed_dim {self.embed_dim} is not divisible by num_heads {self.num_heads}"
            )
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.variant == "tail" and self.tail_features < 1:
            raise ConfigError("tail_features must be >= 1")
        if self.variant == "blockwise" and not 0.0 < self.blockwise_factor < 1.0:
            raise ConfigError("blockwise_factor must lie in (0, 1)")
        if self.ffn_activation not in FFN_ACTIVATIONS:
            raise ConfigError(f"ffn_activation must be one of {FFN_ACTIVATIONS}")

    @property
    def num_tokens(self):
        return (self.image_size // self.patch_size) ** 2

    @property
    def patch_dim(self):
        return self.patch_size * self.patch_size * 3

    def block_dims(self):
        """Token dimension entering each block."""
        dims = [self.embed_dim]
        for _ in range(self.num_layers - 1):
            if self.variant == "blockwise":
                dims.append(reduced_dim(dims[-1], self.blockwise_factor, self.num_heads))
            else:
                dims.append(dims[-1])
        return dims

    @property
    def feature_length(self):
        if self.variant == "tail":
            return self.tail_features
        return self.num_tokens * self.block_dims()[-1]


def reduced_dim(dim, factor, num_heads):
    """Next token dimension: ``dim * factor`` rounded half-up to a positive multiple of the head count."""
    return max(num_heads, int(math.floor(dim * factor / num_heads + 0.5)) * num_heads)


@dataclass
class BlockWeights:
    wq: np.ndarray  # (heads, dim, head_dim)
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray  # (dim, dim)
    w1: np.ndarray  # (dim, mlp_dim)
    b1: np.ndarray
    w2: np.ndarray  # (mlp_dim, dim)
    b2: np.ndarray
    ln1_gamma: np.ndarray
    ln1_beta: np.ndarray
    ln2_gamma: np.ndarray
    ln2_beta: np.ndarray
    proj: np.ndarray = None  # (dim, next_dim), blockwise only

    @property
    def num_heads(self):
        return self.wq.shape[0]


@dataclass
class ViTWeights:
    patch_w: np.ndarray  # (patch_dim, embed_dim)
    patch_b: np.ndarray
    pos: np.ndarray  # (num_tokens, embed_dim)
    blocks: list = field(default_factory=list)
    tail: np.ndarray = None  # (flat_length, tail_features)

    def to_tensors(self):
        """Flat ``name -> array`` mapping, in a fixed order."""
        out = {"patch.w": self.patch_w, "patch.b": self.patch_b, "pos": self.pos}
        for i, bw in enumerate(self.blocks):
            for f in fields(BlockWeights):
                value = getattr(bw, f.name)
                if value is not None:
                    out[f"block{i}.{f.name}"] = value
        if self.tail is not None:
            out["tail"] = self.tail
        return out

    @classmethod
    def from_tensors(cls, tensors, cfg):
        """Rebuild weights from a tensor mapping and check every shape against ``cfg``."""
        ref = init_weights(cfg).to_tensors()
        missing = sorted(set(ref) - set(tensors))
        extra = sorted(set(tensors) - set(ref))
        if missing or extra:
            raise ShapeError(f"weights do not match config: missing {missing}, unexpected {extra}")
        for name, arr in ref.items():
            if tuple(np.shape(tensors[name])) != arr.shape:
                raise ShapeError(
                    f"tensor {name!r} has shape {tuple(np.shape(tensors[name]))}, expected {arr.shape}"
                )
        t = {k: np.asarray(v, dtype=np.float64) for k, v in tensors.items()}
        blocks = []
        for i in range(cfg.num_layers):
            kw = {f.name: t.get(f"block{i}.{f.name}") for f in fields(BlockWeights)}
            blocks.append(BlockWeights(**kw))
        return cls(t["patch.w"], t["patch.b"], t["pos"], blocks, t.get("tail"))


def sinusoidal_positions(num_tokens, dim):
    pos = np.arange(num_tokens, dtype=np.float64)[:, None]
    i = np.arange(0, dim, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, i / dim)
    table = np.zeros((num_tokens, dim))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle[:, : dim // 2])
    return table


def init_weights(cfg):
    s = cfg.seed
    d0 = cfg.embed_dim
    weights = ViTWeights(
        patch_w=glorot_uniform((cfg.patch_dim, d0), s, "patch.w"),
        patch_b=np.zeros(d0),
        pos=sinusoidal_positions(cfg.num_tokens, d0),
    )
    dims = cfg.block_dims()
    h = cfg.num_heads
    for b, d in enumerate(dims):
        dk = d // h
        tag = f"block{b}"
        proj = None
        if cfg.variant == "blockwise" and b + 1 < len(dims):
            proj = glorot_uniform((d, dims[b + 1]), s, f"{tag}.proj")
        weights.blocks.append(BlockWeights(
            wq=glorot_uniform((h, d, dk), s, f"{tag}.wq"),
            wk=glorot_uniform((h, d, dk), s, f"{tag}.wk"),
            wv=glorot_uniform((h, d, dk), s, f"{tag}.wv"),
            wo=glorot_uniform((d, d), s, f"{tag}.wo"),
            w1=glorot_uniform((d, cfg.mlp_dim), s, f"{tag}.w1"),
            b1=np.zeros(cfg.mlp_dim),
            w2=glorot_uniform((cfg.mlp_dim, d), s, f"{tag}.w2"),
            b2=np.zeros(d),
            ln1_gamma=np.ones(d),
            ln1_beta=np.zeros(d),
            ln2_gamma=np.ones(d),
            ln2_beta=np.zeros(d),
            proj=proj,
        ))
    if cfg.variant == "tail":
        flat = cfg.num_tokens * dims[-1]
        weights.tail = glorot_uniform((flat, cfg.tail_features), s, "tail")
    return weights


def patch_embed(img, cfg, w):
    """Split into non-overlapping patches (row-major grid) and embed each linearly."""
    p = np.asarray(getattr(img, "pixels", img), dtype=np.float64)
    if p.shape != (cfg.image_size, cfg.image_size, 3):
        raise ShapeError(
            f"image has shape {p.shape}, extractor expects "
            f"{(cfg.image_size, cfg.image_size, 3)}"
        )
    g, ps = cfg.image_size // cfg.patch_size, cfg.patch_size
    patches = p.reshape(g, ps, g, ps, 3).transpose(0, 2, 1, 3, 4).reshape(g * g, ps * ps * 3)
    return patches @ w.patch_w + w.patch_b


def add_positions(tokens, pos):
    if np.shape(tokens) != np.shape(pos):
        raise ShapeError(f"token shape {np.shape(tokens)} does not match positions {np.shape(pos)}")
    return tokens + pos


def attention_weights(tokens, bw):
    """Per-head row-stochastic attention matrices, shape (heads, n, n)."""
    q = np.einsum("nd,hdk->hnk", tokens, bw.wq)
    k = np.einsum("nd,hdk->hnk", tokens, bw.wk)
    scores = q @ k.transpose(0, 2, 1) / np.sqrt(bw.wq.shape[2])
    return softmax_rows(scores)


def multi_head_attention(tokens, bw):
    tokens = np.asarray(tokens, dtype=np.float64)
    n, d = tokens.shape
    if bw.wq.shape[1] != d:
        raise ShapeError(f"tokens have dim {d}, attention weights expect {bw.wq.shape[1]}")
    attn = attention_weights(tokens, bw)
    v = np.einsum("nd,hdk->hnk", tokens, bw.wv)
    heads = attn @ v  # (h, n, dk)
    concat = heads.transpose(1, 0, 2).reshape(n, -1)
    return concat @ bw.wo


def feed_forward(x, bw, activation="outer"):
    hidden = x @ bw.w1 + bw.b1
    if activation == "outer":
        return relu(hidden @ bw.w2 + bw.b2)
    return relu(hidden) @ bw.w2 + bw.b2


def encoder_block(tokens, bw, activation="outer"):
    a1 = layer_norm(tokens + multi_head_attention(tokens, bw), bw.ln1_gamma, bw.ln1_beta)
    out = layer_norm(a1 + feed_forward(a1, bw, activation), bw.ln2_gamma, bw.ln2_beta)
    if bw.proj is not None:
        out = out @ bw.proj
    return out


def flatten_embeddings(tokens):
    return np.asarray(tokens, dtype=np.float64).reshape(-1)


def tail_projection(f, w):
    f = np.asarray(f, dtype=np.float64)
    if w.shape[0] != f.shape[0]:
        raise ShapeError(f"feature length {f.shape[0]} does not match projection rows {w.shape[0]}")
    return f @ w


def encode(img, cfg, w):
    """Token matrix after all encoder blocks."""
    x = add_positions(patch_embed(img, cfg, w), w.pos)
    for bw in w.blocks:
        x = encoder_block(x, bw, cfg.ffn_activation)
    return x


def extract(img, cfg, w):
    """Feature vector for one normalised square image."""
    f = flatten_embeddings(encode(img, cfg, w))
    if cfg.variant == "tail":
        f = tail_projection(f, w.tail)
    return f
