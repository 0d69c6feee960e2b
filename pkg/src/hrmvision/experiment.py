"""Config-driven experiment runner: trains either model on MNIST or CIFAR,
logs per-step and per-epoch metrics, writes checkpoints, and renders the
loss trace and misclassification grid."""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import hrm as hrm_mod
from .blocks import predictions
from .cnn import CnnConfig, CnnModel
from .data import Dataset, batches, load_cifar, load_mnist, standardize
from .errors import ConfigError, ContractError, DataError, NumericError
from .hrm import HrmConfig, HrmModel, deep_supervised_step
from .modelio import (Checkpoint, param_count,
                      restore_parameters, save_checkpoint)
from .optim import AdamW, ScheduleConfig, clip_global_norm, label_smoothed_ce, lr_at
from .tensor import GradTape, Tensor

DATASET_INFO = {  # name -> (image side, channels, classes)
    "mnist": (28, 1, 10),
    "cifar10": (32, 3, 10),
    "cifar100": (32, 3, 100),
}

_HRM_ARCH = {
    "mnist": dict(d_model=128, n_heads=4, n_layers_low=2, n_layers_high=2),
    "cifar10": dict(d_model=192, n_heads=6, n_layers_low=3, n_layers_high=3),
    "cifar100": dict(d_model=192, n_heads=6, n_layers_low=3, n_layers_high=3),
}

_DEFAULT_EPOCHS = {"mnist": 3, "cifar10": 25, "cifar100": 25}


@dataclass
class RunConfig:
    """Everything one run needs. ``default_config`` fills the per-model,
    per-dataset defaults; any field can then be overridden."""

    model: str = "hrm"
    dataset: str = "mnist"
    epochs: int = 3
    seed: int = 0
    data_dir: str = "data"
    out_dir: str = "runs/mnist-hrm"
    # architecture (HRM)
    d_model: int = 128
    n_heads: int = 4
    n_layers_low: int = 2
    n_layers_high: int = 2
    mlp_mult: int = 4
    patch_size: int = 4
    n_cycles: int = 2
    t_micro: int = 3
    m_train: int = 2
    m_eval: int = 3
    # optimization
    batch_size: int = 128
    lr_peak: float = 3e-4
    floor_frac: float = 0.2
    warmup_epochs: int = 1
    weight_decay: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 1.0
    smoothing: float = 0.05
    # behavior switches
    schedule_per_segment: bool = True
    eval_state_resample: bool = False
    halt_threshold: float | None = None
    train_limit: int | None = None
    test_limit: int | None = None
    record_walltime: bool = True
    plot: bool = True
    error_grid: bool = True
    max_tiles: int = 64

    def __post_init__(self):
        if self.model not in ("hrm", "cnn"):
            raise ConfigError(f"model must be 'hrm' or 'cnn', got {self.model!r}")
        if self.dataset not in DATASET_INFO:
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")


def default_config(model: str, dataset: str, **overrides) -> RunConfig:
    """The standard training protocol for each (model, dataset) pair."""
    fields = dict(model=model, dataset=dataset,
                  epochs=_DEFAULT_EPOCHS.get(dataset, 3),
                  out_dir=f"runs/{dataset}-{model}")
    if model == "hrm" and dataset in _HRM_ARCH:
        fields.update(_HRM_ARCH[dataset])
    fields.update(overrides)
    return RunConfig(**fields)


def config_to_text(cfg: RunConfig) -> str:
    lines = [f"{f.name}={getattr(cfg, f.name)}" for f in dataclasses.fields(cfg)]
    return "\n".join(lines) + "\n"


def coerce_field(text: str, type_str: str):
    """Parse a flat key=value string into a RunConfig field value."""
    t = type_str.replace(" ", "")
    if "None" in t and text in ("None", "none", ""):
        return None
    if t.startswith("bool"):
        return text in ("1", "true", "True", "yes")
    if t.startswith("int"):
        return int(text)
    if t.startswith("float"):
        return float(text)
    return text


def apply_overrides(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Return a copy of cfg with string key=value overrides coerced in."""
    types = {f.name: str(f.type) for f in dataclasses.fields(RunConfig)}
    parsed = {}
    for key, value in overrides.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        parsed[key] = coerce_field(value, types[key])
    return dataclasses.replace(cfg, **parsed)


# ---------------------------------------------------------------------------
# model and data construction
# ---------------------------------------------------------------------------

def build_model(cfg: RunConfig):
    side, channels, classes = DATASET_INFO[cfg.dataset]
    if cfg.model == "hrm":
        mcfg = HrmConfig(d_model=cfg.d_model, n_heads=cfg.n_heads,
                         n_layers_low=cfg.n_layers_low,
                         n_layers_high=cfg.n_layers_high,
                         mlp_mult=cfg.mlp_mult, patch_size=cfg.patch_size,
                         in_channels=channels, img_size=side,
                         n_classes=classes, n_cycles=cfg.n_cycles,
                         t_micro=cfg.t_micro, m_train=cfg.m_train,
                         m_eval=cfg.m_eval, state_seed=cfg.seed + 1,
                         eval_state_resample=cfg.eval_state_resample)
        return HrmModel(mcfg, seed=cfg.seed)
    mcfg = CnnConfig(in_channels=channels, n_classes=classes)
    return CnnModel(mcfg, seed=cfg.seed)


def _model_config_dict(model) -> dict:
    if isinstance(model, HrmModel):
        return dataclasses.asdict(model.cfg)
    d = dataclasses.asdict(model.cfg)
    d["stage_widths"] = ",".join(str(w) for w in model.cfg.stage_widths)
    return d


def model_from_checkpoint(ckpt: Checkpoint):
    """Rebuild a model from a checkpoint manifest and load its weights."""
    if ckpt.model_kind == "hrm":
        types = {f.name: str(f.type) for f in dataclasses.fields(HrmConfig)}
        kwargs = {k: coerce_field(v, types[k]) for k, v in ckpt.config.items()
                  if k in types}
        model = HrmModel(HrmConfig(**kwargs), seed=ckpt.seed)
        restore_parameters(model.named_parameters(include_halt=True), ckpt)
        return model
    if ckpt.model_kind == "cnn":
        types = {f.name: str(f.type) for f in dataclasses.fields(CnnConfig)}
        kwargs = {}
        for k, v in ckpt.config.items():
            if k == "stage_widths":
                kwargs[k] = tuple(int(x) for x in v.split(",") if x)
            elif k in types:
                kwargs[k] = coerce_field(v, types[k])
        model = CnnModel(CnnConfig(**kwargs), seed=ckpt.seed)
        restore_parameters(model.named_parameters(), ckpt)
        for name, state in model.bn_states():
            state.running_mean = ckpt.buffers[f"{name}.running_mean"].copy()
            state.running_var = ckpt.buffers[f"{name}.running_var"].copy()
        return model
    raise ConfigError(f"unknown model kind {ckpt.model_kind!r} in checkpoint")


def _dataset_paths(cfg: RunConfig) -> Path:
    sub = {"mnist": "mnist", "cifar10": "cifar10", "cifar100": "cifar100"}
    return Path(cfg.data_dir) / sub[cfg.dataset]


def load_splits(cfg: RunConfig):
    """Load, limit, and standardize both splits with train statistics.
    Returns (train, test, raw_test_images)."""
    root = _dataset_paths(cfg)
    try:
        if cfg.dataset == "mnist":
            train = load_mnist(root, "train")
            test = load_mnist(root, "test")
        else:
            variant = "c10" if cfg.dataset == "cifar10" else "c100"
            train = load_cifar(root, variant, "train")
            test = load_cifar(root, variant, "test")
    except FileNotFoundError as e:
        raise DataError(
            f"dataset files missing: {e}. Expected layout: {root}/ containing "
            "the MNIST IDX files or CIFAR .bin batches (see `hrmvision fetch`)."
        ) from e
    if cfg.train_limit is not None:
        train = Dataset(train.images[:cfg.train_limit],
                        train.labels[:cfg.train_limit], "train")
    if cfg.test_limit is not None:
        test = Dataset(test.images[:cfg.test_limit],
                       test.labels[:cfg.test_limit], "test")
    raw_test_images = test.images
    train, stats = standardize(train)
    test, _ = standardize(test, stats)
    return train, test, raw_test_images


# ---------------------------------------------------------------------------
# metrics helpers
# ---------------------------------------------------------------------------

def moving_average(series, window: int) -> np.ndarray:
    """Trailing moving average; partial windows at the head."""
    if window < 1:
        raise ContractError(f"window must be >= 1, got {window}")
    arr = np.asarray(series, dtype=np.float64)
    csum = np.cumsum(arr)
    out = np.empty_like(arr)
    head = min(window, arr.size)
    out[:head] = csum[:head] / (np.arange(head) + 1)
    if arr.size > window:
        out[window:] = (csum[window:] - csum[:-window]) / window
    return out


def emit_metrics(step_rows, epoch_rows, out_dir) -> tuple[Path, Path]:
    """steps.csv: step,segment,loss,lr. epochs.csv: epoch,train_loss,
    train_acc,test_acc,wall_seconds. Six significant digits, '.' decimal."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    steps_path = out_dir / "steps.csv"
    with open(steps_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("step,segment,loss,lr\n")
        for step, segment, loss, lr in step_rows:
            f.write(f"{step},{segment},{loss:.6g},{lr:.6g}\n")
    epochs_path = out_dir / "epochs.csv"
    with open(epochs_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("# accuracies are computed from final-segment logits; "
                "train metrics average the epoch's optimizer steps\n")
        f.write("epoch,train_loss,train_acc,test_acc,wall_seconds\n")
        for epoch, tl, ta, va, wall in epoch_rows:
            f.write(f"{epoch},{tl:.6g},{ta:.6g},{va:.6g},{wall:.6g}\n")
    return steps_path, epochs_path


def emit_loss_plot(step_rows, out_path, window: int = 100) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    losses = [r[2] for r in step_rows]
    steps = [r[0] for r in step_rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(steps, losses, color="#9bbcf2", linewidth=0.6, label="per-step loss")
    if losses:
        ax.plot(steps, moving_average(losses, window), color="#1f4e9c",
                linewidth=1.6, label=f"moving average (w={window})")
    ax.set_xlabel("optimizer step")
    ax.set_ylabel("training loss")
    ax.legend(frameon=False)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def emit_error_grid(raw_images: np.ndarray, labels: np.ndarray,
                    preds: np.ndarray, out_path, max_tiles: int = 64) -> np.ndarray:
    """Tile misclassified examples (in evaluation order) annotated with the
    true class T and predicted class P. Returns the tiled example indices."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    wrong = np.nonzero(preds != labels)[0][:max_tiles]
    n = wrong.size
    if n == 0:
        fig, ax = plt.subplots(figsize=(4, 2))
        ax.text(0.5, 0.5, "no misclassifications", ha="center", va="center")
        ax.axis("off")
    else:
        cols = min(8, n)
        rows = math.ceil(n / cols)
        fig, axes = plt.subplots(rows, cols, figsize=(1.3 * cols, 1.6 * rows))
        axes = np.atleast_1d(axes).ravel()
        for ax in axes:
            ax.axis("off")
        for ax, idx in zip(axes, wrong):
            img = raw_images[idx]
            if img.shape[-1] == 1:
                ax.imshow(img[:, :, 0], cmap="gray", vmin=0.0, vmax=1.0)
            else:
                ax.imshow(np.clip(img, 0.0, 1.0))
            ax.set_title(f"T:{labels[idx]} P:{preds[idx]}", fontsize=7)
    fig.tight_layout()
    fig.savefig(Path(out_path))
    plt.close(fig)
    return wrong


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate_model(cfg: RunConfig, model, dataset: Dataset) -> tuple[float, np.ndarray]:
    """Accuracy plus the full prediction array, aggregated in batch order."""
    preds = np.empty(len(dataset), dtype=np.int64)
    for batch in batches(dataset, cfg.batch_size, shuffle=False):
        if isinstance(model, HrmModel):
            _, p = hrm_mod.evaluate(model, batch.images, m_eval=cfg.m_eval,
                                    halt_threshold=cfg.halt_threshold)
        else:
            logits = model(Tensor(batch.images), "eval")
            p = predictions(logits)
        preds[batch.indices] = p
    accuracy = float(np.mean(preds == dataset.labels))
    return accuracy, preds


# ---------------------------------------------------------------------------
# the run loop
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    final_test_acc: float
    n_params: int
    out_dir: Path
    steps_csv: Path
    epochs_csv: Path
    checkpoint_path: Path | None


def _cnn_train_step(model: CnnModel, images, labels, optimizer, schedule,
                    step, cfg: RunConfig):
    params = model.named_parameters()
    with GradTape() as tape:
        logits = model(Tensor(images), "train")
        loss = label_smoothed_ce(logits, labels, smoothing=cfg.smoothing)
        tape.backward(loss)
    grads = {name: tape.grad(p) for name, p in params}
    clip_global_norm(grads, cfg.clip_norm)
    lr = lr_at(step, schedule)
    optimizer.step(grads, lr)
    return [(step, 1, float(loss.item()), lr)], logits


def _save_run_checkpoint(cfg: RunConfig, model, epoch: int, path: Path):
    if isinstance(model, HrmModel):
        save_checkpoint(path, "hrm", _model_config_dict(model), epoch, cfg.seed,
                        model.named_parameters(include_halt=True))
    else:
        buffers = []
        for name, state in model.bn_states():
            buffers.append((f"{name}.running_mean", state.running_mean))
            buffers.append((f"{name}.running_var", state.running_var))
        save_checkpoint(path, "cnn", _model_config_dict(model), epoch, cfg.seed,
                        model.named_parameters(), buffers)


def run(cfg: RunConfig) -> RunResult:
    """Train per the configured protocol and emit all artifacts. On a
    non-finite loss the run aborts: metrics logged so far are flushed, the
    last completed epoch's checkpoint is retained, and a numeric error is
    raised."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.txt").write_text(config_to_text(cfg), encoding="utf-8")

    train, test, raw_test_images = load_splits(cfg)
    model = build_model(cfg)
    params = model.named_parameters()
    n_params = param_count(params)
    print(f"parameters: {n_params}", flush=True)
    is_hrm = isinstance(model, HrmModel)

    steps_per_epoch = math.ceil(len(train) / cfg.batch_size)
    seg_mult = cfg.m_train if (is_hrm and cfg.schedule_per_segment) else 1
    schedule = None
    if cfg.epochs > 0:
        schedule = ScheduleConfig(cfg.lr_peak, cfg.warmup_epochs * steps_per_epoch * seg_mult,
                                  cfg.epochs * steps_per_epoch * seg_mult,
                                  cfg.floor_frac)
    optimizer = AdamW(params, beta1=cfg.beta1, beta2=cfg.beta2,
                      eps=cfg.adam_eps, weight_decay=cfg.weight_decay)

    ckpt_path = out_dir / "checkpoint.ckpt"
    last_good: Path | None = None
    step_rows: list[tuple] = []
    epoch_rows: list[tuple] = []
    abort: NumericError | None = None

    try:
        for epoch in range(1, cfg.epochs + 1):
            t0 = time.perf_counter()
            hits = 0
            seen = 0
            epoch_losses = []
            step = (epoch - 1) * steps_per_epoch * seg_mult
            for batch in batches(train, cfg.batch_size, seed=cfg.seed + epoch,
                                 shuffle=True):
                if is_hrm:
                    rows, _, logits = deep_supervised_step(
                        model, batch.images, batch.labels, optimizer, schedule,
                        step, clip_norm=cfg.clip_norm, smoothing=cfg.smoothing,
                        lr_per_segment=cfg.schedule_per_segment)
                else:
                    rows, logits = _cnn_train_step(
                        model, batch.images, batch.labels, optimizer, schedule,
                        step, cfg)
                for row in rows:
                    if not math.isfinite(row[2]):
                        raise NumericError(
                            f"non-finite loss {row[2]} at step {row[0]}")
                step_rows.extend(rows)
                epoch_losses.extend(r[2] for r in rows)
                step += seg_mult
                p = predictions(logits)
                hits += int(np.sum(p == batch.labels))
                seen += batch.labels.size
            test_acc, test_preds = evaluate_model(cfg, model, test)
            wall = time.perf_counter() - t0 if cfg.record_walltime else 0.0
            epoch_rows.append((epoch, float(np.mean(epoch_losses)),
                               hits / seen, test_acc, wall))
            _save_run_checkpoint(cfg, model, epoch, ckpt_path)
            last_good = ckpt_path
            print(f"epoch {epoch}/{cfg.epochs}: "
                  f"train_loss={epoch_rows[-1][1]:.4f} "
                  f"train_acc={hits / seen:.4f} test_acc={test_acc:.4f} "
                  f"({time.perf_counter() - t0:.1f}s)", flush=True)
    except NumericError as e:
        abort = e

    steps_csv, epochs_csv = emit_metrics(step_rows, epoch_rows, out_dir)
    if cfg.plot:
        emit_loss_plot(step_rows, out_dir / "loss.svg")
    if abort is not None:
        raise NumericError(
            f"{abort}; metrics flushed to {out_dir}, "
            f"last-good checkpoint: {last_good or 'none'}")

    if cfg.epochs > 0:
        final_test_acc = epoch_rows[-1][3]
    else:
        final_test_acc, test_preds = evaluate_model(cfg, model, test)
        _save_run_checkpoint(cfg, model, 0, ckpt_path)
        last_good = ckpt_path
    if cfg.error_grid:
        emit_error_grid(raw_test_images, test.labels, test_preds,
                        out_dir / "error_grid.png", max_tiles=cfg.max_tiles)

    print(f"final test accuracy: {final_test_acc:.6g}")
    return RunResult(final_test_acc=final_test_acc, n_params=n_params,
                     out_dir=out_dir, steps_csv=steps_csv,
                     epochs_csv=epochs_csv, checkpoint_path=last_good)
