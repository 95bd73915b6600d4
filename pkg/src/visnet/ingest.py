"""
Dataset containers and readers for the on-disk formats.

Supported formats:

* MNIST IDX files (big-endian header, magic 2051 for images and 2049 for
  labels), optionally gzip-compressed;
* CIFAR-10 binary batches (records of one label byte and 3,072 pixel bytes,
  planes R, G, B of 1,024 bytes each);
* binary PGM (``P5``) and PPM (``P6``) with maxval 255.

Every reader validates the bytes it consumes and raises
:class:`~visnet.errors.FormatError` with the offending byte offset.
"""

import gzip
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import FormatError, ParameterError

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049
CIFAR_RECORD = 1 + 3 * 32 * 32
CIFAR_CLASSES = (
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
)
MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}

TRAIN = "train"
TEST = "test"


@dataclass
class LabeledDataset:
    """Images with integer labels and a per-item train/test assignment.

    ``images`` is an ``N x H x W`` (grayscale) or ``N x H x W x 3`` (RGB)
    float32 array with values in [0, 1].  ``kind`` is ``"symmetry"`` for the
    generated sets and ``"natural"`` for MNIST/CIFAR; training uses it to pick
    how view sequences are formed.
    """

    images: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    class_names: Optional[List[str]] = None
    name: str = ""
    kind: str = "symmetry"
    measured: Optional[np.ndarray] = None
    filenames: Optional[List[str]] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.images = np.asarray(self.images)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.split = np.asarray(self.split, dtype="<U5")
        n = len(self.images)
        if len(self.labels) != n or len(self.split) != n:
            raise ParameterError("images, labels and split must have equal length", "dataset")
        if self.measured is not None and len(self.measured) != n:
            raise ParameterError("measured symmetry list has the wrong length", "measured")
        bad = ~np.isin(self.split, (TRAIN, TEST))
        if bad.any():
            raise ParameterError("split entries must be 'train' or 'test'", "split")

    def __len__(self):
        return len(self.images)

    @property
    def is_rgb(self):
        return self.images.ndim == 4 and self.images.shape[-1] == 3

    @property
    def n_classes(self):
        if self.class_names is not None:
            return len(self.class_names)
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def indices(self, which):
        return np.flatnonzero(self.split == which)

    def subset(self, idx):
        idx = np.asarray(idx)
        return LabeledDataset(
            images=self.images[idx],
            labels=self.labels[idx],
            split=self.split[idx],
            class_names=self.class_names,
            name=self.name,
            kind=self.kind,
            measured=None if self.measured is None else np.asarray(self.measured)[idx],
            filenames=None if self.filenames is None else [self.filenames[i] for i in idx],
            meta=dict(self.meta),
        )


def concatenate(datasets, name=None):
    first = datasets[0]
    return LabeledDataset(
        images=np.concatenate([d.images for d in datasets]),
        labels=np.concatenate([d.labels for d in datasets]),
        split=np.concatenate([d.split for d in datasets]),
        class_names=first.class_names,
        name=name or first.name,
        kind=first.kind,
    )


# --------------------------------------------------------------------- IDX


def _read_bytes(path):
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        try:
            data = gzip.decompress(data)
        except (EOFError, OSError, zlib.error) as exc:
            raise FormatError(f"corrupt gzip stream: {exc}", offset=None, path=path) from None
    return data


def parse_idx(data, expected_magic, path=None):
    """Parse an IDX buffer of unsigned bytes; returns an ``N x ...`` uint8 array."""
    if len(data) < 4:
        raise FormatError("truncated IDX header", offset=len(data), path=path)
    magic = struct.unpack(">I", data[:4])[0]
    if magic != expected_magic:
        raise FormatError(
            f"bad IDX magic {magic}, expected {expected_magic}", offset=0, path=path
        )
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise FormatError("truncated IDX dimension fields", offset=len(data), path=path)
    dims = struct.unpack(">" + "I" * ndim, data[4:header])
    expected = header + int(np.prod(dims, dtype=np.int64))
    if len(data) != expected:
        problem = "truncated" if len(data) < expected else "trailing bytes in"
        raise FormatError(
            f"{problem} IDX payload: {len(data)} bytes, expected {expected}",
            offset=min(len(data), expected),
            path=path,
        )
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(dims)


def load_mnist(images_path, labels_path, split=TRAIN):
    """Read one MNIST image/label file pair into a dataset with pixels in [0, 1]."""
    images = parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, images_path)
    labels = parse_idx(_read_bytes(labels_path), IDX_LABELS_MAGIC, labels_path)
    if images.ndim != 3:
        raise FormatError("image file must have 3 dimensions", offset=0, path=images_path)
    if labels.ndim != 1:
        raise FormatError("label file must have 1 dimension", offset=0, path=labels_path)
    if len(images) != len(labels):
        raise FormatError(
            f"{len(images)} images but {len(labels)} labels", offset=4, path=labels_path
        )
    if len(labels) and labels.max() > 9:
        pos = int(np.argmax(labels > 9))
        raise FormatError("label outside 0..9", offset=8 + pos, path=labels_path)
    return LabeledDataset(
        images=images.astype(np.float32) / 255.0,
        labels=labels.astype(np.int64),
        split=np.full(len(labels), split),
        class_names=[str(d) for d in range(10)],
        name="MNIST",
        kind="natural",
    )


def _find(directory, stem):
    for candidate in (stem, stem + ".gz"):
        p = Path(directory) / candidate
        if p.exists():
            return p
    # common alternative spelling of the canonical names
    alt = stem.replace("-idx", ".idx")
    for candidate in (alt, alt + ".gz"):
        p = Path(directory) / candidate
        if p.exists():
            return p
    raise FileNotFoundError(Path(directory) / stem)


def load_mnist_dir(directory):
    parts = []
    for split, (img, lab) in MNIST_FILES.items():
        parts.append(load_mnist(_find(directory, img), _find(directory, lab), split))
    return concatenate(parts, name="MNIST")


# ------------------------------------------------------------------- CIFAR


def parse_cifar_batch(data, path=None):
    """Split a CIFAR-10 binary batch into labels and ``N x 32 x 32 x 3`` uint8 images."""
    if len(data) == 0 or len(data) % CIFAR_RECORD:
        raise FormatError(
            f"length {len(data)} is not a positive multiple of {CIFAR_RECORD}",
            offset=len(data) - len(data) % CIFAR_RECORD,
            path=path,
        )
    rec = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = rec[:, 0]
    if labels.max() > 9:
        row = int(np.argmax(labels > 9))
        raise FormatError(f"label {labels[row]} outside 0..9", offset=row * CIFAR_RECORD, path=path)
    images = rec[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    return labels, images


def load_cifar10(batch_paths, split=None):
    """Read CIFAR-10 binary batches.

    Files whose name contains ``test`` go to the test split unless ``split``
    forces one.
    """
    if isinstance(batch_paths, (str, os.PathLike)):
        batch_paths = [batch_paths]
    images, labels, splits = [], [], []
    for p in batch_paths:
        lab, img = parse_cifar_batch(Path(p).read_bytes(), p)
        which = split or (TEST if "test" in Path(p).name else TRAIN)
        images.append(img)
        labels.append(lab)
        splits.append(np.full(len(lab), which))
    if not images:
        raise ParameterError("no CIFAR batch files given", "batch_paths")
    return LabeledDataset(
        images=np.concatenate(images).astype(np.float32) / 255.0,
        labels=np.concatenate(labels).astype(np.int64),
        split=np.concatenate(splits),
        class_names=list(CIFAR_CLASSES),
        name="CIFAR10",
        kind="natural",
    )


def load_cifar10_dir(directory):
    d = Path(directory)
    files = [d / f"data_batch_{i}.bin" for i in range(1, 6)] + [d / "test_batch.bin"]
    missing = [f for f in files if not f.exists()]
    if missing:
        raise FileNotFoundError(missing[0])
    return load_cifar10(files)


def stratified_subset(dataset, per_class_train, per_class_test, seed=0):
    """Seeded per-class sample of each split (classes short of items give all they have)."""
    rng = np.random.default_rng(seed)
    chosen = []
    for which, per_class in ((TRAIN, per_class_train), (TEST, per_class_test)):
        idx = dataset.indices(which)
        labels = dataset.labels[idx]
        for c in np.unique(labels):
            pool = idx[labels == c]
            take = min(per_class, len(pool))
            chosen.append(np.sort(rng.choice(pool, size=take, replace=False)))
    return dataset.subset(np.sort(np.concatenate(chosen)))


def to_grayscale(rgb):
    """Unweighted mean of the three planes, the same as the opponent L channel."""
    rgb = np.asarray(rgb)
    if rgb.shape[-1] != 3:
        raise ParameterError("expected 3 colour planes", "rgb")
    return rgb.astype(np.float64).mean(axis=-1)


# --------------------------------------------------------------------- PNM


def _to_uint8(image):
    image = np.asarray(image)
    if image.dtype == np.uint8:
        return image
    if np.issubdtype(image.dtype, np.floating):
        return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    if image.min() < 0 or image.max() > 255:
        raise ParameterError("integer pixels must lie in 0..255", "image")
    return image.astype(np.uint8)


def write_pnm(path, image):
    """Write a 2-D array as P5 or an ``H x W x 3`` array as P6 (maxval 255).

    Float images are taken to be in [0, 1] and rounded to 8 bits.
    """
    pixels = _to_uint8(image)
    if pixels.ndim == 2:
        magic = b"P5"
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = b"P6"
    else:
        raise ParameterError("PNM images must be 2-D or H x W x 3", "image")
    h, w = pixels.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(pixels).tobytes())


def parse_pnm(data, path=None):
    if data[:2] not in (b"P5", b"P6"):
        raise FormatError(f"unsupported PNM magic {data[:2]!r}", offset=0, path=path)
    channels = 1 if data[:2] == b"P5" else 3
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise FormatError("truncated PNM header", offset=pos, path=path)
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise FormatError("unterminated header comment", offset=pos, path=path)
            pos = end + 1
        else:
            start = pos
            while pos < len(data) and data[pos : pos + 1].isdigit():
                pos += 1
            if start == pos:
                raise FormatError("malformed PNM header", offset=pos, path=path)
            fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError("missing whitespace after maxval", offset=pos, path=path)
    pos += 1
    w, h, maxval = fields
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}", offset=pos - 1, path=path)
    if w <= 0 or h <= 0:
        raise FormatError("image dimensions must be positive", offset=pos - 1, path=path)
    need = w * h * channels
    if len(data) - pos < need:
        raise FormatError(
            f"truncated raster: {len(data) - pos} of {need} bytes", offset=len(data), path=path
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return pixels.reshape(shape).copy()


def read_pnm(path):
    """Read a P5/P6 file into a uint8 array (``H x W`` or ``H x W x 3``)."""
    return parse_pnm(Path(path).read_bytes(), path)
