"""Optimization: AdamW, global-norm gradient clipping, the warmup/cosine
learning-rate schedule, and label-smoothed cross-entropy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, DataError, NumericError
from .tensor import Tensor, gather_classes, log_softmax, mul, reduce_mean, reduce_sum


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint L2 norm is at most
    ``max_norm``. Returns the pre-clip norm. Raises NumericError naming the
    first parameter whose gradient is not finite."""
    total = 0.0
    for name, g in grads.items():
        s = float(np.sum(np.square(g, dtype=np.float64), dtype=np.float64))
        if not np.isfinite(s):
            raise NumericError(f"non-finite gradient for parameter '{name}'")
        total += s
    norm = float(np.sqrt(total))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            np.multiply(g, scale, out=g, casting="unsafe")
    return norm


@dataclass(frozen=True)
class ScheduleConfig:
    """Linear warmup to ``lr_peak`` followed by cosine decay to
    ``floor_frac * lr_peak`` over the remaining steps."""

    lr_peak: float
    warmup_steps: int
    total_steps: int
    floor_frac: float = 0.2

    def __post_init__(self):
        if self.total_steps < 1 or not 0 <= self.warmup_steps <= self.total_steps:
            raise ConfigError(
                f"bad schedule: warmup={self.warmup_steps} total={self.total_steps}")
        if not 0.0 < self.floor_frac <= 1.0:
            raise ConfigError(f"floor_frac must be in (0, 1], got {self.floor_frac}")


def lr_at(step: int, cfg: ScheduleConfig) -> float:
    """Learning rate for 0-indexed optimizer step ``step``.

    Warmup ramps linearly so that step ``warmup_steps - 1`` reaches the peak;
    afterwards the rate follows a cosine from the peak down to the floor,
    reaching the floor as the progress fraction hits 1 at ``total_steps``.
    """
    if step < 0 or step >= cfg.total_steps:
        raise ContractError(f"step {step} outside [0, {cfg.total_steps})")
    if step < cfg.warmup_steps:
        return cfg.lr_peak * (step + 1) / cfg.warmup_steps
    floor = cfg.floor_frac * cfg.lr_peak
    denom = cfg.total_steps - cfg.warmup_steps
    progress = (step - cfg.warmup_steps) / denom if denom > 0 else 1.0
    return floor + 0.5 * (cfg.lr_peak - floor) * (1.0 + np.cos(np.pi * progress))


class AdamW:
    """AdamW with decoupled weight decay applied to every parameter.

    The decay is applied first (p *= 1 - lr*wd), then the bias-corrected
    Adam update. Moment buffers are float32 like the parameters.
    """

    def __init__(self, params: list[tuple[str, Tensor]], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 5e-4):
        names = [n for n, _ in params]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate parameter names in optimizer")
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {n: np.zeros_like(p.data) for n, p in params}
        self.v = {n: np.zeros_like(p.data) for n, p in params}

    def step(self, grads: dict[str, np.ndarray], lr: float) -> None:
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for name, p in self.params:
            g = grads[name]
            if g.shape != p.shape:
                raise ContractError(
                    f"gradient shape {g.shape} != parameter shape {p.shape} for '{name}'")
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            if self.weight_decay:
                p.data *= 1.0 - lr * self.weight_decay
            denom = np.sqrt(v / c2) + self.eps
            p.data -= lr * (m / c1) / denom


def label_smoothed_ce(logits: Tensor, labels: np.ndarray,
                      smoothing: float = 0.05) -> Tensor:
    """Mean cross-entropy against smoothed targets: the true class gets
    probability 1 - eps + eps/K, every other class eps/K."""
    if logits.ndim != 2:
        raise ConfigError(f"logits must be 2-d, got shape {logits.shape}")
    n, k = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ConfigError(f"labels shape {labels.shape} != ({n},)")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise DataError(f"labels outside [0, {k})")
    logp = log_softmax(logits, axis=1)
    nll = mul(reduce_mean(gather_classes(logp, labels)), -1.0)
    if smoothing == 0.0:
        return nll
    uniform = mul(reduce_sum(logp), -smoothing / (n * k))
    return nll * (1.0 - smoothing) + uniform
