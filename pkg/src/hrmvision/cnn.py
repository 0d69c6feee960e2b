"""The convolutional baseline: two stages of (Conv3x3 -> BN -> ReLU) x 2
followed by 2x2 max pooling, then global average pooling and a bias-free
linear classifier.

All convolutions are bias-free (batch norm supplies the shift), so the
parameter total is exactly 261,824 for 10 classes and 273,344 for 100.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .tensor import (BatchNormState, Tensor, batchnorm2d, conv2d, matmul,
                     maxpool2d, reduce_mean, relu, truncated_normal_rng)

HEAD_INIT_STD = 0.02


@dataclass(frozen=True)
class CnnConfig:
    in_channels: int = 3
    stage_widths: tuple[int, ...] = (64, 128)
    convs_per_stage: int = 2
    n_classes: int = 10

    def __post_init__(self):
        if len(self.stage_widths) < 1 or self.convs_per_stage < 1:
            raise ConfigError("need at least one stage and one conv per stage")
        if self.n_classes < 1 or self.in_channels < 1:
            raise ConfigError(
                f"n_classes={self.n_classes} and in_channels={self.in_channels} "
                "must be positive")


class _ConvBn:
    """One Conv3x3 (no bias) + affine BatchNorm unit."""

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator, dtype):
        fan_in = 9 * c_in
        std = np.sqrt(2.0 / fan_in)
        self.w = Tensor(std * truncated_normal_rng(rng, (3, 3, c_in, c_out), dtype=dtype),
                        requires_grad=True)
        self.gamma = Tensor(np.ones(c_out, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)
        self.bn_state = BatchNormState(c_out, dtype=dtype)

    def __call__(self, x: Tensor, mode: str) -> Tensor:
        x = conv2d(x, self.w)
        return batchnorm2d(x, self.gamma, self.beta, self.bn_state, mode)

    def named_parameters(self, prefix: str):
        return [(f"{prefix}.w", self.w), (f"{prefix}.gamma", self.gamma),
                (f"{prefix}.beta", self.beta)]


class CnnModel:
    """Stages of Conv-BN-ReLU units each ending in 2x2 max pooling; spatial
    extent halves per stage (32 -> 16 -> 8), then features are globally
    averaged and classified."""

    def __init__(self, cfg: CnnConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        self.stages: list[list[_ConvBn]] = []
        c_in = cfg.in_channels
        for width in cfg.stage_widths:
            units = []
            for _ in range(cfg.convs_per_stage):
                units.append(_ConvBn(c_in, width, rng, dtype))
                c_in = width
            self.stages.append(units)
        self.w_head = Tensor(
            HEAD_INIT_STD * truncated_normal_rng(rng, (c_in, cfg.n_classes), dtype=dtype),
            requires_grad=True)

    def __call__(self, images: Tensor, mode: str = "train") -> Tensor:
        return self.forward(images, mode)

    def forward(self, images: Tensor, mode: str = "train") -> Tensor:
        if images.ndim != 4 or images.shape[3] != self.cfg.in_channels:
            raise ConfigError(
                f"expected (B, H, W, {self.cfg.in_channels}) input, got {images.shape}")
        n_pools = len(self.stages)
        if images.shape[1] % (2 ** n_pools) or images.shape[2] % (2 ** n_pools):
            raise ConfigError(
                f"spatial extents {images.shape[1]}x{images.shape[2]} must be "
                f"divisible by {2 ** n_pools}")
        x = images
        for units in self.stages:
            for unit in units:
                x = relu(unit(x, mode))
            x = maxpool2d(x)
        pooled = reduce_mean(x, axis=(1, 2))
        return matmul(pooled, self.w_head)

    def named_parameters(self, include_halt: bool = False):
        out = []
        for s, units in enumerate(self.stages):
            for u, unit in enumerate(units):
                out.extend(unit.named_parameters(f"stage{s}.conv{u}"))
        out.append(("head.w", self.w_head))
        return out

    def bn_states(self):
        """Running statistics in the same order as the owning units."""
        out = []
        for s, units in enumerate(self.stages):
            for u, unit in enumerate(units):
                out.append((f"stage{s}.conv{u}.bn", unit.bn_state))
        return out
