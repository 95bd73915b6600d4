"""Resolve the dataset a run configuration asks for."""

import os
from pathlib import Path

from .errors import FormatError, ParameterError
from .ingest import load_cifar10_dir, load_mnist_dir, stratified_subset
from .symmetry_data import DATASETS, MANIFEST, build_dataset, dataset_spec, load_symmetry_dir

MNIST = "MNIST"
CIFAR10 = "CIFAR-10"
DATA_ENV = {MNIST: "VISNET_MNIST_DIR", CIFAR10: "VISNET_CIFAR_DIR"}


def _looks_like_mnist(d):
    return any(d.glob("train-images*")) or any(d.glob("t10k-images*"))


def _looks_like_cifar(d):
    return (d / "data_batch_1.bin").exists() or (d / "test_batch.bin").exists()


def load_directory(directory):
    """Load a generated symmetry set, an MNIST directory or a CIFAR-10 directory."""
    d = Path(directory)
    if not d.is_dir():
        raise FormatError(f"data directory {str(d)!r} does not exist", path=str(d))
    if (d / MANIFEST).exists():
        return load_symmetry_dir(d)
    if _looks_like_mnist(d):
        return load_mnist_dir(d)
    if _looks_like_cifar(d):
        return load_cifar10_dir(d)
    raise FormatError("directory holds no manifest, IDX files or CIFAR batches", path=str(d))


def load_dataset(config):
    """The dataset named by ``config``, generated or loaded, then subsampled if asked."""
    name = config["dataset"]
    directory = config["data.dir"] or (os.environ.get(DATA_ENV[name], "") if name in DATA_ENV else "")
    if directory:
        ds = load_directory(directory)
    elif name in DATASETS:
        spec = dataset_spec(
            name,
            count=config["data.count"],
            image_size=config["data.image_size"],
            seed=config["data.seed"],
        )
        ds = build_dataset(spec)
    elif name in DATA_ENV:
        raise ParameterError(
            f"{name} needs data.dir or the {DATA_ENV[name]} environment variable", "data.dir"
        )
    else:
        raise ParameterError(f"unknown dataset {name!r}", "dataset")
    ptr, pte = config["data.per_class_train"], config["data.per_class_test"]
    if ptr or pte:
        big = 1 << 62
        ds = stratified_subset(ds, ptr or big, pte or big, seed=config["data.seed"])
    if config["variant"] == "li-dog-rgb" and not ds.is_rgb:
        raise ParameterError("variant li-dog-rgb needs an RGB dataset (3-plane images)", "variant")
    return ds
