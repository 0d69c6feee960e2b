"""Shared test helpers: finite-difference oracles, synthetic dataset
fixtures, and discovery of the real datasets (when present)."""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np
import pytest

from hrmvision.tensor import GradTape, Tensor, mul, reduce_sum


def real_data_root() -> Path | None:
    """Real datasets are looked for at $HRMVISION_DATA_DIR, then /root/data,
    then ./data relative to the repository root."""
    candidates = []
    env = os.environ.get("HRMVISION_DATA_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(Path("/root/data"))
    candidates.append(Path(__file__).resolve().parent.parent / "data")
    for root in candidates:
        if root.is_dir():
            return root
    return None


def require_dataset(name: str, filenames: list[str]) -> Path:
    root = real_data_root()
    if root is None or not all((root / name / f).is_file() for f in filenames):
        pytest.skip(f"{name} data files not available (set HRMVISION_DATA_DIR)")
    return root / name


MNIST_FILES = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte",
               "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]
CIFAR10_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]
CIFAR100_FILES = ["train.bin", "test.bin"]


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------

def rel_err(approx: np.ndarray, exact: np.ndarray) -> float:
    """Max-norm relative error with a small absolute floor."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    scale = max(float(np.max(np.abs(exact))), 1e-8)
    return float(np.max(np.abs(approx - exact))) / scale


def fd_gradients(scalar_fn, arrays: list[np.ndarray], h: float = 1e-5):
    """Central finite differences of scalar_fn w.r.t. each float64 array,
    element by element."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = scalar_fn()
            flat[i] = orig - h
            f_minus = scalar_fn()
            flat[i] = orig
            gflat[i] = (f_plus - f_minus) / (2.0 * h)
        grads.append(g)
    return grads


def gradcheck(op_fn, *arrays, tol: float = 1e-4, seed: int = 99,
              params: tuple[int, ...] | None = None):
    """Assert analytic gradients of ``sum(op_fn(*tensors) * W)`` match
    central differences for every input (or the subset in ``params``)."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    which = tuple(range(len(arrays))) if params is None else params

    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    with GradTape() as tape:
        out = op_fn(*tensors)
        rng = np.random.default_rng(seed)
        w = Tensor(rng.standard_normal(out.shape))
        loss = reduce_sum(mul(out, w))
        tape.backward(loss)
    analytic = [tape.grad(tensors[i]) for i in which]

    def scalar_fn():
        ts = [Tensor(a) for a in arrays]
        return float(np.sum(op_fn(*ts).data * w.data))

    numeric = fd_gradients(scalar_fn, [arrays[i] for i in which])
    worst = 0.0
    for i, (a_grad, n_grad) in enumerate(zip(analytic, numeric)):
        err = rel_err(a_grad, n_grad)
        assert err < tol, f"input {which[i]}: gradient mismatch, rel err {err:.3e}"
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# synthetic dataset files
# ---------------------------------------------------------------------------

def write_idx_pair(directory: Path, n: int, seed: int = 0, rows: int = 28,
                   cols: int = 28, prefix: str = "train",
                   n_classes: int = 10) -> None:
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(n, rows, cols), dtype=np.uint8)
    labels = rng.integers(0, n_classes, size=n, dtype=np.uint8)
    names = {"train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
             "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")}
    img_name, lbl_name = names[prefix]
    with open(directory / img_name, "wb") as f:
        f.write(struct.pack(">IIII", 2051, n, rows, cols))
        f.write(pixels.tobytes())
    with open(directory / lbl_name, "wb") as f:
        f.write(struct.pack(">II", 2049, n))
        f.write(labels.tobytes())


@pytest.fixture
def synthetic_mnist_dir(tmp_path: Path) -> Path:
    """A data root containing a small fake MNIST pair in IDX format."""
    root = tmp_path / "data"
    mnist = root / "mnist"
    mnist.mkdir(parents=True)
    write_idx_pair(mnist, 512, seed=1, prefix="train")
    write_idx_pair(mnist, 256, seed=2, prefix="test")
    return root
