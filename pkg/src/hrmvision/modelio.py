"""Parameter counting and checkpoint serialization.

A checkpoint is one file: a UTF-8 manifest of ``key=value`` lines (model
kind, epoch, seed, config fields, then one ``tensor=name:dims`` line per
parameter in fixed order and ``buffer=`` lines for running statistics),
terminated by ``blob_bytes=N`` and followed by exactly N bytes of the flat
little-endian float32 concatenation of all listed arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .tensor import Tensor

MAGIC = "hrmvision-checkpoint v1"


def param_count(params) -> int:
    """Total learnable scalars over (name, tensor) pairs; running statistics
    are buffers, not parameters, and never appear here."""
    return sum(int(p.data.size) for _, p in params)


def _dims(shape) -> str:
    return "x".join(str(d) for d in shape) if shape else "scalar"


def _parse_dims(text: str) -> tuple[int, ...]:
    if text == "scalar":
        return ()
    return tuple(int(d) for d in text.split("x"))


@dataclass
class Checkpoint:
    model_kind: str
    epoch: int
    seed: int
    config: dict[str, str]
    tensors: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray]


def save_checkpoint(path, model_kind: str, config: dict, epoch: int, seed: int,
                    params: list[tuple[str, Tensor]],
                    buffers: list[tuple[str, np.ndarray]] = ()) -> None:
    lines = [MAGIC, f"model={model_kind}", f"epoch={epoch}", f"seed={seed}"]
    for key, value in config.items():
        lines.append(f"config.{key}={value}")
    chunks = []
    for name, p in params:
        lines.append(f"tensor={name}:{_dims(p.shape)}")
        chunks.append(np.ascontiguousarray(p.data, dtype="<f4").ravel())
    for name, buf in buffers:
        lines.append(f"buffer={name}:{_dims(buf.shape)}")
        chunks.append(np.ascontiguousarray(buf, dtype="<f4").ravel())
    blob = np.concatenate(chunks).tobytes() if chunks else b""
    lines.append(f"blob_bytes={len(blob)}")
    header = ("\n".join(lines) + "\n").encode("utf-8")
    Path(path).write_bytes(header + blob)


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    marker = raw.find(b"blob_bytes=")
    if marker < 0:
        raise FormatError(f"{path}: missing blob_bytes terminator")
    header = raw[:marker].decode("utf-8").splitlines()
    size_line, _, blob = raw[marker:].partition(b"\n")
    declared = int(size_line.decode("utf-8").split("=", 1)[1])
    if len(blob) != declared:
        raise FormatError(
            f"{path}: blob is {len(blob)} bytes, manifest declares {declared}")
    if not header or header[0] != MAGIC:
        raise FormatError(f"{path}: bad magic line")

    meta: dict[str, str] = {}
    config: dict[str, str] = {}
    entries: list[tuple[str, str, tuple[int, ...]]] = []
    for line in header[1:]:
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        if key in ("tensor", "buffer"):
            name, _, dims = value.partition(":")
            entries.append((key, name, _parse_dims(dims)))
        elif key.startswith("config."):
            config[key[len("config."):]] = value
        else:
            meta[key] = value

    flat = np.frombuffer(blob, dtype="<f4")
    expected = sum(int(np.prod(shape, dtype=np.int64)) if shape else 1
                   for _, _, shape in entries)
    if flat.size != expected:
        raise FormatError(
            f"{path}: blob holds {flat.size} floats, manifest lists {expected}")
    tensors: dict[str, np.ndarray] = {}
    buffers: dict[str, np.ndarray] = {}
    offset = 0
    for kind, name, shape in entries:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = flat[offset:offset + count].reshape(shape).copy()
        offset += count
        (tensors if kind == "tensor" else buffers)[name] = arr
    return Checkpoint(model_kind=meta.get("model", ""),
                      epoch=int(meta.get("epoch", "0")),
                      seed=int(meta.get("seed", "0")),
                      config=config, tensors=tensors, buffers=buffers)


def restore_parameters(params: list[tuple[str, Tensor]], ckpt: Checkpoint) -> None:
    """Copy checkpoint tensors into parameters by name, verifying shapes."""
    for name, p in params:
        if name not in ckpt.tensors:
            raise FormatError(f"checkpoint missing tensor '{name}'")
        arr = ckpt.tensors[name]
        if arr.shape != p.shape:
            raise FormatError(
                f"checkpoint tensor '{name}' has shape {arr.shape}, expected {p.shape}")
        p.data = arr.astype(p.dtype)
