"""Datasets: synthetic pulses, UCR text files and MNIST IDX files."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidArgument, InvalidDataset

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049
PATTERN_LENGTH = 5


@dataclass
class Dataset:
    X_train: np.ndarray  # (N, T) float64
    y_train: np.ndarray  # (N,) int
    X_test: np.ndarray
    y_test: np.ndarray
    num_classes: int
    name: str = ""
    image_shape: tuple | None = None  # set for flattened images

    def __post_init__(self):
        self.X_train = np.asarray(self.X_train, dtype=np.float64)
        self.X_test = np.asarray(self.X_test, dtype=np.float64)
        self.y_train = np.asarray(self.y_train, dtype=np.int64)
        self.y_test = np.asarray(self.y_test, dtype=np.int64)
        if len(self.X_train) == 0 or len(self.X_test) == 0:
            raise InvalidDataset(f"{self.name or 'dataset'}: both splits must be non-empty")
        if self.X_train.shape[1] != self.X_test.shape[1]:
            raise InvalidDataset("train and test sequences differ in length")
        if len(self.X_train) != len(self.y_train) or len(self.X_test) != len(self.y_test):
            raise InvalidDataset("labels and sequences differ in count")
        if not (np.all(np.isfinite(self.X_train)) and np.all(np.isfinite(self.X_test))):
            raise InvalidDataset("sequences contain non-finite values")

    @property
    def length(self) -> int:
        return self.X_train.shape[1]


def binarize(ds: Dataset, target: int) -> Dataset:
    """Target class becomes 1, every other class 0."""
    if not 0 <= target < ds.num_classes:
        raise InvalidArgument(f"target class {target} outside [0, {ds.num_classes})")
    return replace(
        ds,
        y_train=(ds.y_train == target).astype(np.int64),
        y_test=(ds.y_test == target).astype(np.int64),
        num_classes=2,
    )


def znormalize(ds: Dataset) -> Dataset:
    """Per-series zero mean, unit variance; constant series are only centred."""

    def norm(X):
        mu = X.mean(axis=1, keepdims=True)
        sd = X.std(axis=1, keepdims=True)
        return (X - mu) / np.where(sd > 0, sd, 1.0)

    return replace(ds, X_train=norm(ds.X_train), X_test=norm(ds.X_test))


# -- synthetic ---------------------------------------------------------------


def _templates(kind: str):
    """Positive and negative base signals, 20 points, key patterns 5 long.

    Triangular: the positive class rises over points 0-4 and falls over 5-9;
    the negative class has the two patterns in swapped order (a dip).
    Trigonometric: same idea with half-cosine ramps at points 5-9 and 10-14.
    """
    L = PATTERN_LENGTH
    up_lin = np.linspace(0.0, 2.0, L)
    flat = np.zeros(L)
    if kind == "triangular":
        pos = np.concatenate([up_lin, up_lin[::-1], flat, flat])
        neg = np.concatenate([-up_lin, -up_lin[::-1], flat, flat])
    elif kind == "trigonometric":
        up = 1.0 - np.cos(np.linspace(0.0, np.pi, L))  # 0 -> 2
        pos = np.concatenate([flat, up, up[::-1], flat])
        neg = np.concatenate([flat, -up, -up[::-1], flat])
    else:
        raise InvalidArgument(f"unknown synthetic kind {kind!r}")
    return pos, neg


def gen_synthetic(kind: str, n_per_class: int = 2, noise_std: float = 0.1 ** 0.5,
                  rng=None, seed: int = 0) -> Dataset:
    """Two-class signals: positive template vs. pattern-swapped negative.

    Every point gets independent Gaussian noise with standard deviation
    ``noise_std`` (variance 0.1 by default). Train and test are drawn
    independently from the same templates.
    """
    if n_per_class < 1:
        raise InvalidArgument("n_per_class must be >= 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    pos, neg = _templates(kind)

    def split():
        X = np.vstack([np.tile(pos, (n_per_class, 1)), np.tile(neg, (n_per_class, 1))])
        X = X + rng.normal(0.0, noise_std, size=X.shape)
        y = np.repeat([1, 0], n_per_class)
        return X, y

    X_tr, y_tr = split()
    X_te, y_te = split()
    return Dataset(X_tr, y_tr, X_te, y_te, 2, name=f"synthetic-{kind}")


# -- UCR ---------------------------------------------------------------------


def read_ucr_file(path):
    """Rows of ``label<sep>v1<sep>v2...`` with tab, comma or whitespace separators."""
    path = Path(path)
    labels, rows = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            try:
                values = [float(p) for p in parts]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if len(values) < 2:
                raise FormatError(f"{path}:{lineno}: row has no series values")
            if rows and len(values) - 1 != len(rows[0]):
                raise FormatError(
                    f"{path}:{lineno}: ragged row ({len(values) - 1} values, expected {len(rows[0])})"
                )
            labels.append(values[0])
            rows.append(values[1:])
    if not rows:
        raise InvalidDataset(f"{path}: empty file")
    return np.array(rows), np.array(labels)


def _ucr_split_paths(path: Path):
    if path.is_dir():
        name = path.name
        for ext in (".tsv", ".txt", ".csv", ""):
            tr, te = path / f"{name}_TRAIN{ext}", path / f"{name}_TEST{ext}"
            if tr.exists() and te.exists():
                return name, tr, te
        trains = sorted(path.glob("*_TRAIN*"))
        if len(trains) == 1:
            return _ucr_split_paths(trains[0])
        raise InvalidDataset(f"{path}: no {name}_TRAIN/{name}_TEST pair found")
    stem = path.name
    for tag in ("_TRAIN", "_TEST"):
        if tag in stem:
            name = stem.split(tag)[0]
            tr = path.with_name(stem.replace(tag, "_TRAIN"))
            te = path.with_name(stem.replace(tag, "_TEST"))
            if tr.exists() and te.exists():
                return name, tr, te
    raise InvalidDataset(f"{path}: cannot locate matching TRAIN/TEST files")


def load_ucr(path) -> Dataset:
    """Load a UCR dataset from its directory or either split file.

    Original labels are remapped to ``0..u-1`` in sorted order.
    """
    name, tr, te = _ucr_split_paths(Path(path))
    X_tr, l_tr = read_ucr_file(tr)
    X_te, l_te = read_ucr_file(te)
    if X_tr.shape[1] != X_te.shape[1]:
        raise FormatError(f"{name}: TRAIN length {X_tr.shape[1]} != TEST length {X_te.shape[1]}")
    classes = np.unique(np.concatenate([l_tr, l_te]))
    remap = {c: i for i, c in enumerate(classes)}
    y_tr = np.array([remap[c] for c in l_tr])
    y_te = np.array([remap[c] for c in l_te])
    return Dataset(X_tr, y_tr, X_te, y_te, len(classes), name=name)


def write_ucr(ds: Dataset, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = ds.name or "dataset"
    for split, X, y in (("TRAIN", ds.X_train, ds.y_train), ("TEST", ds.X_test, ds.y_test)):
        with open(directory / f"{name}_{split}.tsv", "w") as fh:
            for label, row in zip(y, X):
                fh.write("\t".join([str(int(label))] + [repr(float(v)) for v in row]) + "\n")
    return directory


# -- MNIST IDX -----------------------------------------------------------------


def _open_binary(path):
    path = Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def _read_idx(path, magic: int, n_dims: int):
    with _open_binary(path) as fh:
        raw = fh.read()
    header = 4 * (1 + n_dims)
    if len(raw) < header:
        raise FormatError(f"{path}: truncated header")
    found = struct.unpack(">I", raw[:4])[0]
    if found != magic:
        raise FormatError(f"{path}: bad magic number {found:#010x}, expected {magic:#010x}")
    dims = struct.unpack(f">{n_dims}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise FormatError(f"{path}: truncated payload ({len(raw) - header} of {size} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def read_idx_images(path):
    return _read_idx(path, IDX_IMAGE_MAGIC, 3)


def read_idx_labels(path):
    return _read_idx(path, IDX_LABEL_MAGIC, 1)


def _mnist_pair(images, labels, pos_digit, neg_digit, per_class):
    keep = []
    for digit in (neg_digit, pos_digit):
        idx = np.flatnonzero(labels == digit)
        keep.append(idx if per_class is None else idx[:per_class])
    keep = np.sort(np.concatenate(keep))
    X = images[keep].reshape(len(keep), -1).astype(np.float64) / 255.0
    y = (labels[keep] == pos_digit).astype(np.int64)
    return X, y


def load_mnist(image_path, label_path, pos_digit: int, neg_digit: int,
               test_image_path=None, test_label_path=None,
               train_per_class: int | None = None, test_per_class: int | None = None) -> Dataset:
    """Two-digit MNIST task; images flattened row-major and scaled to [0, 1].

    ``pos_digit`` becomes class 1. Without test files the train files are
    split in half (alternating instances) so both splits are populated.
    """
    images, labels = read_idx_images(image_path), read_idx_labels(label_path)
    if len(images) != len(labels):
        raise FormatError("image and label files disagree on item count")
    if test_image_path is not None:
        t_images, t_labels = read_idx_images(test_image_path), read_idx_labels(test_label_path)
        if len(t_images) != len(t_labels):
            raise FormatError("test image and label files disagree on item count")
    else:
        images, t_images = images[0::2], images[1::2]
        labels, t_labels = labels[0::2], labels[1::2]
    X_tr, y_tr = _mnist_pair(images, labels, pos_digit, neg_digit, train_per_class)
    X_te, y_te = _mnist_pair(t_images, t_labels, pos_digit, neg_digit, test_per_class)
    return Dataset(X_tr, y_tr, X_te, y_te, 2, name=f"mnist-{pos_digit}v{neg_digit}",
                   image_shape=tuple(images.shape[1:]))


def load_mnist_dir(root, pos_digit: int, neg_digit: int, **kw) -> Dataset:
    """Load from a directory holding the standard four IDX file names (optionally gzipped)."""
    root = Path(root)

    def find(stem):
        for cand in (root / stem, root / f"{stem}.gz"):
            if cand.exists():
                return cand
        raise InvalidDataset(f"{root}: missing {stem}")

    return load_mnist(find("train-images-idx3-ubyte"), find("train-labels-idx1-ubyte"),
                      pos_digit, neg_digit,
                      find("t10k-images-idx3-ubyte"), find("t10k-labels-idx1-ubyte"), **kw)
