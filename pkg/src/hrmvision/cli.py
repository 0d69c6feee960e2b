"""Command-line interface: train, eval, and fetch subcommands."""

from __future__ import annotations

import argparse
import gzip
import sys
import tarfile
import urllib.request
from pathlib import Path

from .errors import ConfigError, ContractError, DataError, FormatError, NumericError
from .experiment import (apply_overrides, default_config,
                         evaluate_model, load_splits, model_from_checkpoint, run)
from .modelio import load_checkpoint, param_count

_FETCH_SOURCES = {
    "mnist": {
        "base": "https://storage.googleapis.com/cvdf-datasets/mnist/",
        "files": [  # (archive name, bytes, extracted name)
            ("train-images-idx3-ubyte.gz", 9912422, "train-images-idx3-ubyte"),
            ("train-labels-idx1-ubyte.gz", 28881, "train-labels-idx1-ubyte"),
            ("t10k-images-idx3-ubyte.gz", 1648877, "t10k-images-idx3-ubyte"),
            ("t10k-labels-idx1-ubyte.gz", 4542, "t10k-labels-idx1-ubyte"),
        ],
    },
    "cifar10": {
        "url": "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz",
        "bytes": 170052171,
        "members": [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"],
    },
    "cifar100": {
        "url": "https://www.cs.toronto.edu/~kriz/cifar-100-binary.tar.gz",
        "bytes": 169001437,
        "members": ["train.bin", "test.bin"],
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hrmvision",
        description="Train and evaluate the hierarchical recurrent classifier "
                    "or the convolutional baseline on MNIST/CIFAR.")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model and emit run artifacts")
    t.add_argument("--model", choices=["hrm", "cnn"])
    t.add_argument("--dataset", choices=["mnist", "cifar10", "cifar100"])
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--data-dir")
    t.add_argument("--out-dir")
    t.add_argument("--config", help="flat key=value config file (flags win)")
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   dest="overrides", help="override any run-config field")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--dataset", required=True,
                   choices=["mnist", "cifar10", "cifar100"])
    e.add_argument("--data-dir", default="data")
    e.add_argument("--split", choices=["train", "test"], default="test")
    e.add_argument("--batch-size", type=int, default=128)

    f = sub.add_parser("fetch", help="download a dataset into the data directory")
    f.add_argument("--dataset", required=True,
                   choices=["mnist", "cifar10", "cifar100"])
    f.add_argument("--data-dir", default="data")
    return parser


def _parse_config_file(path) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def _cmd_train(args) -> int:
    file_over = _parse_config_file(args.config) if args.config else {}
    model = args.model or file_over.get("model", "hrm")
    dataset = args.dataset or file_over.get("dataset", "mnist")
    cfg = default_config(model, dataset)
    cfg = apply_overrides(cfg, {k: v for k, v in file_over.items()
                                if k not in ("model", "dataset")})
    flag_over: dict[str, str] = {}
    for name in ("epochs", "seed", "data_dir", "out_dir"):
        value = getattr(args, name)
        if value is not None:
            flag_over[name] = str(value)
    for pair in args.overrides:
        if "=" not in pair:
            raise ConfigError(f"--set expects KEY=VALUE, got {pair!r}")
        key, _, value = pair.partition("=")
        flag_over[key.strip()] = value.strip()
    cfg = apply_overrides(cfg, flag_over)
    result = run(cfg)
    print(f"artifacts in {result.out_dir}")
    return 0


def _cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    model = model_from_checkpoint(ckpt)
    cfg = default_config(ckpt.model_kind, args.dataset,
                         data_dir=args.data_dir, batch_size=args.batch_size)
    train, test, _ = load_splits(cfg)
    dataset = train if args.split == "train" else test
    accuracy, _ = evaluate_model(cfg, model, dataset)
    print(f"parameters: {param_count(model.named_parameters())}")
    print(f"{args.split} accuracy: {accuracy:.6g}")
    return 0


def _download(url: str, expected_bytes: int) -> bytes:
    print(f"fetching {url} ...")
    with urllib.request.urlopen(url) as resp:
        payload = resp.read()
    if len(payload) != expected_bytes:
        raise DataError(
            f"{url}: downloaded {len(payload)} bytes, expected {expected_bytes}")
    return payload


def _cmd_fetch(args) -> int:
    source = _FETCH_SOURCES[args.dataset]
    out = Path(args.data_dir) / args.dataset
    out.mkdir(parents=True, exist_ok=True)
    if args.dataset == "mnist":
        for name, size, target in source["files"]:
            payload = _download(source["base"] + name, size)
            (out / target).write_bytes(gzip.decompress(payload))
            print(f"wrote {out / target}")
    else:
        archive = out / Path(source["url"]).name
        archive.write_bytes(_download(source["url"], source["bytes"]))
        wanted = set(source["members"])
        with tarfile.open(archive) as tar:
            for member in tar.getmembers():
                base = Path(member.name).name
                if member.isfile() and base in wanted:
                    payload = tar.extractfile(member).read()
                    (out / base).write_bytes(payload)
                    print(f"wrote {out / base}")
        archive.unlink()
    print(f"dataset ready under {out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "eval":
            return _cmd_eval(args)
        return _cmd_fetch(args)
    except (ConfigError, ContractError, DataError, FormatError, NumericError,
            OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
