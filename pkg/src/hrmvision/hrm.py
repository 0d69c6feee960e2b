"""The hierarchical recurrence: a fast low-level module f_L and a slow
high-level module f_H over a shared token sequence.

One segment runs N cycles; each cycle applies T low-level micro-updates
    z_L <- f_L(z_L + z_H + x_tokens)
followed by one high-level update
    z_H <- f_H(z_H + z_L).
In training mode every update except the segment's final low-level and final
high-level one runs without tape recording, so gradients flow only through
those last two updates (plus the tokenizer and head) — a one-step,
constant-memory approximation regardless of N and T. Segments chain through
detached states; each segment takes its own optimizer step (deep
supervision).
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

from .blocks import (EncoderConfig, EncoderStack, OutputHead, Tokenizer,
                     predictions)
from .errors import ConfigError, ContractError
from .optim import AdamW, ScheduleConfig, clip_global_norm, label_smoothed_ce, lr_at
from .tensor import (GradTape, Tensor, add, active_tape, matmul, sigmoid,
                     truncated_normal_rng)

INIT_STD = 0.02


@dataclass(frozen=True)
class HrmConfig:
    """Hyperparameters of the recurrent classifier."""

    d_model: int = 128
    n_heads: int = 4
    n_layers_low: int = 2
    n_layers_high: int = 2
    mlp_mult: int = 4
    patch_size: int = 4
    in_channels: int = 1
    img_size: int = 28
    n_classes: int = 10
    n_cycles: int = 2
    t_micro: int = 3
    m_train: int = 2
    m_eval: int = 3
    state_seed: int = 0
    eval_state_resample: bool = False

    def __post_init__(self):
        for name in ("n_cycles", "t_micro", "m_train", "m_eval"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.img_size % self.patch_size != 0:
            raise ConfigError(
                f"img_size {self.img_size} not divisible by patch {self.patch_size}")

    @property
    def seq_len(self) -> int:
        side = self.img_size // self.patch_size
        return 1 + side * side

    def encoder_config(self, n_layers: int) -> EncoderConfig:
        return EncoderConfig(self.d_model, self.n_heads, n_layers, self.mlp_mult)


@dataclass
class HrmState:
    """The pair of recurrent states, each of shape (B, S, D). A detached
    state carries no tape links."""

    z_l: Tensor
    z_h: Tensor

    def detached(self) -> "HrmState":
        return HrmState(Tensor(self.z_l.data), Tensor(self.z_h.data))

    @property
    def is_detached(self) -> bool:
        return self.z_l.node is None and self.z_h.node is None


@dataclass
class SegmentOutput:
    logits: Tensor
    new_state: HrmState
    loss: Tensor | None = None


def init_states(batch_size: int, seq_len: int, d_model: int, seed: int,
                dtype=np.float32) -> HrmState:
    """The fixed initial states: two independent truncated-normal
    TN(0,1;-2,2) draws from consecutive offsets of one seeded stream."""
    rng = np.random.default_rng(seed)
    z_l = truncated_normal_rng(rng, (batch_size, seq_len, d_model), dtype=dtype)
    z_h = truncated_normal_rng(rng, (batch_size, seq_len, d_model), dtype=dtype)
    return HrmState(Tensor(z_l), Tensor(z_h))


def _suspend_recording():
    tape = active_tape()
    return tape.stop_recording() if tape is not None else contextlib.nullcontext()


class HrmModel:
    """Tokenizer + two encoder stacks + classifier head (+ disabled halting
    head). Parameter creation order is fixed: tokenizer, f_L, f_H, head,
    halting head — the checkpoint blob uses the same order."""

    def __init__(self, cfg: HrmConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        self.tokenizer = Tokenizer(cfg.patch_size, cfg.in_channels, cfg.d_model,
                                   rng, dtype=dtype)
        self.f_low = EncoderStack(cfg.encoder_config(cfg.n_layers_low), rng, dtype=dtype)
        self.f_high = EncoderStack(cfg.encoder_config(cfg.n_layers_high), rng, dtype=dtype)
        self.head = OutputHead(cfg.d_model, cfg.n_classes, rng, dtype=dtype)
        self.w_halt = Tensor(INIT_STD * truncated_normal_rng(rng, (cfg.d_model, 2), dtype=dtype),
                             requires_grad=True)
        self._state_cache: HrmState | None = None
        self._resample_count = 0

    # -- parameters -----------------------------------------------------

    def named_parameters(self, include_halt: bool = False):
        """Trainable parameters in checkpoint order. The halting head is
        excluded by default: it is untrained and outside parameter audits."""
        out = list(self.tokenizer.named_parameters("tokenizer"))
        out.extend(self.f_low.named_parameters("f_low"))
        out.extend(self.f_high.named_parameters("f_high"))
        out.extend(self.head.named_parameters("head"))
        if include_halt:
            out.append(("halt.w", self.w_halt))
        return out

    # -- states -----------------------------------------------------------

    def initial_state(self, batch_size: int) -> HrmState:
        """The fixed seed-derived initial state, sliced to the batch size.
        The underlying draw is materialized once and reused, so every batch
        sees identical per-position values."""
        if self.cfg.eval_state_resample:
            self._resample_count += 1
            return init_states(batch_size, self.cfg.seq_len, self.cfg.d_model,
                               self.cfg.state_seed + self._resample_count,
                               dtype=self.dtype)
        cache = self._state_cache
        if cache is None or cache.z_l.shape[0] < batch_size:
            cache = init_states(max(batch_size, 128), self.cfg.seq_len,
                                self.cfg.d_model, self.cfg.state_seed,
                                dtype=self.dtype)
            self._state_cache = cache
        return HrmState(Tensor(cache.z_l.data[:batch_size]),
                        Tensor(cache.z_h.data[:batch_size]))

    # -- single updates ---------------------------------------------------

    def low_step(self, state: HrmState, x_tokens: Tensor) -> Tensor:
        """z_L' = f_L(z_L + z_H + x_tokens)."""
        if not (state.z_l.shape == state.z_h.shape == x_tokens.shape):
            raise ConfigError(
                f"low_step shape mismatch: z_L {state.z_l.shape}, "
                f"z_H {state.z_h.shape}, tokens {x_tokens.shape}")
        return self.f_low(add(add(state.z_l, state.z_h), x_tokens))

    def high_step(self, state: HrmState) -> Tensor:
        """z_H' = f_H(z_H + z_L)."""
        return self.f_high(add(state.z_h, state.z_l))

    # -- one segment --------------------------------------------------------

    def run_segment(self, state: HrmState, x_tokens: Tensor, mode: str = "train",
                    labels: np.ndarray | None = None,
                    smoothing: float = 0.05) -> SegmentOutput:
        """N cycles of T micro-updates plus one high-level update each; in
        train mode only the final low-level and final high-level updates are
        recorded on the tape."""
        if mode not in ("train", "eval"):
            raise ContractError(f"mode must be 'train' or 'eval', got {mode!r}")
        if not state.is_detached:
            raise ContractError("run_segment requires a detached input state")
        n, t_micro = self.cfg.n_cycles, self.cfg.t_micro
        z_l, z_h = state.z_l, state.z_h
        for i in range(1, n + 1):
            for t in range(1, t_micro + 1):
                if i == n and t == t_micro:
                    z_l = self.low_step(HrmState(z_l, z_h), x_tokens)
                else:
                    with _suspend_recording():
                        z_l = self.low_step(HrmState(z_l, z_h), x_tokens)
            if i == n:
                z_h = self.high_step(HrmState(z_l, z_h))
            else:
                with _suspend_recording():
                    z_h = self.high_step(HrmState(z_l, z_h))
        logits = self.head(z_h)
        loss = None
        if labels is not None:
            loss = label_smoothed_ce(logits, labels, smoothing=smoothing)
        new_state = HrmState(Tensor(z_l.data.copy()), Tensor(z_h.data.copy()))
        return SegmentOutput(logits=logits, new_state=new_state, loss=loss)

    # -- halting head (disabled during training) ----------------------------

    def halting_head(self, z_h: Tensor) -> Tensor:
        """q = sigmoid(z_H[:,0,:] W_halt): column 0 scores halt, column 1
        continue. Never part of the training loss or parameter audits."""
        return sigmoid(matmul(z_h[:, 0, :], self.w_halt))


def deep_supervised_step(model: HrmModel, images: np.ndarray, labels: np.ndarray,
                         optimizer: AdamW, schedule: ScheduleConfig, step0: int,
                         clip_norm: float = 1.0, smoothing: float = 0.05,
                         lr_per_segment: bool = True):
    """One training batch: M_train segments, each with its own loss,
    gradient, and optimizer step, chained through detached states.

    Returns ``(rows, final_state, final_logits)`` where rows are per-segment
    ``(step, segment, loss, lr)`` tuples and the step index advances by one
    per optimizer step (``lr_per_segment=False`` instead holds the batch's
    learning rate fixed at the step0 value).
    """
    params = model.named_parameters()
    images_t = Tensor(np.ascontiguousarray(images, dtype=model.dtype))
    state = model.initial_state(images.shape[0])
    rows = []
    seg = None
    for m in range(1, model.cfg.m_train + 1):
        with GradTape() as tape:
            x_tokens = model.tokenizer(images_t)
            seg = model.run_segment(state, x_tokens, "train", labels,
                                    smoothing=smoothing)
            tape.backward(seg.loss)
        grads = {name: tape.grad(p) for name, p in params}
        clip_global_norm(grads, clip_norm)
        step = step0 + m - 1 if lr_per_segment else step0
        lr = lr_at(step, schedule)
        optimizer.step(grads, lr)
        rows.append((step, m, float(seg.loss.item()), lr))
        state = seg.new_state
    return rows, state, seg.logits


def evaluate(model: HrmModel, images: np.ndarray, m_eval: int | None = None,
             halt_threshold: float | None = None):
    """Run ``m_eval`` chained segments from the fixed initial state with no
    tape; returns (logits, predictions) from the final segment.

    With ``halt_threshold`` set, an example whose halt score exceeds the
    threshold at the end of a segment keeps that segment's logits (a
    per-example cap on computation); remaining segments still refine the
    rest.
    """
    if m_eval is None:
        m_eval = model.cfg.m_eval
    if m_eval < 1:
        raise ConfigError(f"m_eval must be >= 1, got {m_eval}")
    images_t = Tensor(np.ascontiguousarray(images, dtype=model.dtype))
    x_tokens = model.tokenizer(images_t)
    state = model.initial_state(images.shape[0])
    n = images.shape[0]
    halted = np.zeros(n, dtype=bool)
    final_logits = None
    for _ in range(m_eval):
        seg = model.run_segment(state, x_tokens, "eval")
        if final_logits is None:
            final_logits = seg.logits.data.copy()
        else:
            live = ~halted
            final_logits[live] = seg.logits.data[live]
        state = seg.new_state
        if halt_threshold is not None:
            q = model.halting_head(state.z_h)
            halted |= q.data[:, 0] > halt_threshold
    logits = Tensor(final_logits)
    return logits, predictions(logits)
