"""Transformer building blocks shared by the recurrent modules.

An encoder block applies multi-head self-attention with rotary position
embedding and a GEGLU feed-forward layer, each wrapped in a residual
connection whose sum is RMS-normalized (post-norm placement). All linear
maps are bias-free, so one layer holds 16*D^2 + 2*D parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import (Tensor, Array, add, broadcast_to, concat, gelu, matmul,
                     mul, record, reshape, softmax, transpose,
                     truncated_normal_rng)

RMSNORM_EPS = 1e-6
ROPE_BASE = 10000.0


def _fan_in_scale(fan_in: int) -> float:
    """Truncated-normal weight scale 1/sqrt(fan_in), so every projection
    preserves unit activation scale.  The tokenizer in particular must emit
    tokens commensurate with the unit-scale recurrent states they are fused
    with; at smaller scales the input is drowned by the state stream and
    training takes off far too slowly."""
    return float(fan_in) ** -0.5


@dataclass(frozen=True)
class EncoderConfig:
    """Shape of one Transformer encoder stack."""

    d_model: int
    n_heads: int
    n_layers: int
    mlp_mult: int = 4

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if (self.d_model // self.n_heads) % 2 != 0:
            raise ConfigError(
                f"head dimension {self.d_model // self.n_heads} must be even "
                "for rotary pairing")
        if self.n_layers < 1:
            raise ConfigError("n_layers must be >= 1")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


# ---------------------------------------------------------------------------
# normalization and rotary embedding
# ---------------------------------------------------------------------------

def rmsnorm(x: Tensor, gain: Tensor, eps: float = RMSNORM_EPS) -> Tensor:
    """y = x / sqrt(mean(x^2) + eps) * gain, mean over the last axis."""
    if x.shape[-1] != gain.shape[0]:
        raise DimensionError(f"rmsnorm gain {gain.shape} vs features {x.shape[-1]}")
    xd, gd = x.data, gain.data
    d = xd.shape[-1]
    ms = np.mean(xd * xd, axis=-1, keepdims=True, dtype=np.float64)
    r = (1.0 / np.sqrt(ms + eps)).astype(xd.dtype)
    xr = xd * r
    out = xr * gd

    def bwd(g: Array):
        ggain = np.sum(g * xr, axis=tuple(range(g.ndim - 1)),
                       dtype=np.float64).astype(xd.dtype)
        gg = g * gd
        dot = np.sum(gg * xd, axis=-1, keepdims=True, dtype=np.float64).astype(xd.dtype)
        gx = r * gg - xd * (r * r * r) * (dot / d)
        return gx, ggain

    return record(out, (x, gain), bwd)


@lru_cache(maxsize=16)
def _rope_tables(seq_len: int, head_dim: int, base: float):
    inv_freq = base ** (-2.0 * np.arange(head_dim // 2) / head_dim)
    angles = np.arange(seq_len)[:, None] * inv_freq[None, :]
    return np.cos(angles), np.sin(angles)


def rope_apply(x: Tensor, positions=None, base: float = ROPE_BASE) -> Tensor:
    """Rotate consecutive feature pairs of each token by position-scaled
    angles: pair i turns by p * base^(-2i/head_dim) at position p.

    ``x`` has shape (..., S, head_dim); positions default to 0..S-1, so the
    leading token (position 0) is left unrotated.
    """
    dh = x.shape[-1]
    s = x.shape[-2]
    if dh % 2 != 0:
        raise ConfigError(f"rope_apply needs an even head dimension, got {dh}")
    if positions is None:
        cos, sin = _rope_tables(s, dh, base)
    else:
        positions = np.asarray(positions)
        inv_freq = base ** (-2.0 * np.arange(dh // 2) / dh)
        angles = positions[:, None] * inv_freq[None, :]
        cos, sin = np.cos(angles), np.sin(angles)
    cos = cos.astype(x.dtype)
    sin = sin.astype(x.dtype)

    xd = x.data
    xe, xo = xd[..., 0::2], xd[..., 1::2]
    out = np.empty_like(xd)
    out[..., 0::2] = xe * cos - xo * sin
    out[..., 1::2] = xe * sin + xo * cos

    def bwd(g: Array):
        ge, go = g[..., 0::2], g[..., 1::2]
        gx = np.empty_like(g)
        gx[..., 0::2] = ge * cos + go * sin
        gx[..., 1::2] = -ge * sin + go * cos
        return (gx,)

    return record(out, (x,), bwd)


# ---------------------------------------------------------------------------
# encoder layer
# ---------------------------------------------------------------------------

class EncoderLayer:
    """Parameters of one block: attention projections, GEGLU weights, and
    the two RMSNorm gains. No biases anywhere."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator, dtype=np.float32):
        d, m = cfg.d_model, cfg.mlp_mult * cfg.d_model

        def w(rows, cols):
            return Tensor(_fan_in_scale(rows)
                          * truncated_normal_rng(rng, (rows, cols), dtype=dtype),
                          requires_grad=True)

        self.wq = w(d, d)
        self.wk = w(d, d)
        self.wv = w(d, d)
        self.wo = w(d, d)
        self.norm1 = Tensor(np.ones(d, dtype=dtype), requires_grad=True)
        self.norm2 = Tensor(np.ones(d, dtype=dtype), requires_grad=True)
        self.w_val = w(d, m)
        self.w_gate = w(d, m)
        self.w_out = w(m, d)

    def named_parameters(self, prefix: str):
        return [
            (f"{prefix}.wq", self.wq),
            (f"{prefix}.wk", self.wk),
            (f"{prefix}.wv", self.wv),
            (f"{prefix}.wo", self.wo),
            (f"{prefix}.norm1", self.norm1),
            (f"{prefix}.norm2", self.norm2),
            (f"{prefix}.w_val", self.w_val),
            (f"{prefix}.w_gate", self.w_gate),
            (f"{prefix}.w_out", self.w_out),
        ]


def mhsa(x: Tensor, layer: EncoderLayer, n_heads: int) -> Tensor:
    """Scaled dot-product self-attention over all tokens (no mask), rotary
    embedding applied to queries and keys, heads concatenated then projected."""
    b, s, d = x.shape
    if d % n_heads != 0:
        raise ConfigError(f"d_model {d} not divisible by n_heads {n_heads}")
    dh = d // n_heads

    def split_heads(t: Tensor) -> Tensor:
        return transpose(reshape(t, (b, s, n_heads, dh)), (0, 2, 1, 3))

    xf = reshape(x, (b * s, d))
    q = split_heads(matmul(xf, layer.wq))
    k = split_heads(matmul(xf, layer.wk))
    v = split_heads(matmul(xf, layer.wv))
    q = rope_apply(q)
    k = rope_apply(k)

    scores = mul(matmul(q, transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
    probs = softmax(scores, axis=-1)
    ctx = matmul(probs, v)
    ctx = reshape(transpose(ctx, (0, 2, 1, 3)), (b * s, d))
    return reshape(matmul(ctx, layer.wo), (b, s, d))


def geglu_ffn(x: Tensor, layer: EncoderLayer) -> Tensor:
    """(x W_val) ⊙ gelu(x W_gate), projected back to width D."""
    b, s, d = x.shape
    xf = reshape(x, (b * s, d))
    h = mul(matmul(xf, layer.w_val), gelu(matmul(xf, layer.w_gate)))
    return reshape(matmul(h, layer.w_out), (b, s, d))


def encoder_block(x: Tensor, layer: EncoderLayer, n_heads: int) -> Tensor:
    # post-norm placement: the residual sum is normalized, so the state that
    # leaves a block is always at gain scale.  With states recirculated through
    # f_L/f_H many times per segment, pre-norm placement lets magnitudes
    # compound geometrically across updates and segments.
    x = rmsnorm(add(x, mhsa(x, layer, n_heads)), layer.norm1)
    x = rmsnorm(add(x, geglu_ffn(x, layer)), layer.norm2)
    return x


class EncoderStack:
    """A sequence of encoder blocks with shared configuration."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        self.layers = [EncoderLayer(cfg, rng, dtype=dtype) for _ in range(cfg.n_layers)]

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[-1] != self.cfg.d_model:
            raise DimensionError(
                f"encoder stack expects (B, S, {self.cfg.d_model}), got {x.shape}")
        for layer in self.layers:
            x = encoder_block(x, layer, self.cfg.n_heads)
        return x

    def named_parameters(self, prefix: str):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend(layer.named_parameters(f"{prefix}.layer{i}"))
        return out


# ---------------------------------------------------------------------------
# tokenizer and heads
# ---------------------------------------------------------------------------

class Tokenizer:
    """Non-overlapping patch embedding with a learned leading class token.

    Patches are read row-major, flattened to P*P*C, and projected to width D;
    sequence length is 1 + (H/P)*(W/P).
    """

    def __init__(self, patch_size: int, in_channels: int, d_model: int,
                 rng: np.random.Generator, dtype=np.float32):
        self.patch_size = patch_size
        self.in_channels = in_channels
        self.d_model = d_model
        p2c = patch_size * patch_size * in_channels
        self.w_patch = Tensor(_fan_in_scale(p2c)
                              * truncated_normal_rng(rng, (p2c, d_model), dtype=dtype),
                              requires_grad=True)
        # the class token is itself a stream entry: draw it at unit scale,
        # matching both the projected patches and the recurrent states
        self.cls = Tensor(truncated_normal_rng(rng, (d_model,), dtype=dtype),
                          requires_grad=True)

    def seq_len(self, img_h: int, img_w: int) -> int:
        p = self.patch_size
        return 1 + (img_h // p) * (img_w // p)

    def __call__(self, images: Tensor) -> Tensor:
        b, h, w, c = images.shape
        p = self.patch_size
        if h % p or w % p:
            raise ConfigError(f"image {h}x{w} not divisible by patch size {p}")
        if c != self.in_channels:
            raise ConfigError(f"expected {self.in_channels} channels, got {c}")
        hp, wp = h // p, w // p
        x = reshape(images, (b, hp, p, wp, p, c))
        x = transpose(x, (0, 1, 3, 2, 4, 5))
        x = reshape(x, (b * hp * wp, p * p * c))
        tokens = reshape(matmul(x, self.w_patch), (b, hp * wp, self.d_model))
        lead = broadcast_to(reshape(self.cls, (1, 1, self.d_model)),
                            (b, 1, self.d_model))
        return concat([lead, tokens], axis=1)

    def named_parameters(self, prefix: str = "tokenizer"):
        return [(f"{prefix}.w_patch", self.w_patch), (f"{prefix}.cls", self.cls)]


class OutputHead:
    """Bias-free linear map from the class-token channel to logits."""

    def __init__(self, d_model: int, n_classes: int, rng: np.random.Generator,
                 dtype=np.float32):
        self.w = Tensor(_fan_in_scale(d_model)
                        * truncated_normal_rng(rng, (d_model, n_classes), dtype=dtype),
                        requires_grad=True)

    def __call__(self, z: Tensor) -> Tensor:
        return matmul(z[:, 0, :], self.w)

    def named_parameters(self, prefix: str = "head"):
        return [(f"{prefix}.w", self.w)]


def predictions(logits: Tensor) -> np.ndarray:
    """Argmax class per row; the first index wins ties."""
    return np.argmax(logits.data, axis=1)
