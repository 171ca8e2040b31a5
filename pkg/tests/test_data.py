import gzip
import struct
from pathlib import Path

import numpy as np
import pytest

from seqrules.data import (
    PATTERN_LENGTH,
    Dataset,
    binarize,
    gen_synthetic,
    load_mnist,
    load_mnist_dir,
    load_ucr,
    read_idx_images,
    read_idx_labels,
    read_ucr_file,
    write_ucr,
    znormalize,
)
from seqrules.errors import FormatError, InvalidArgument, InvalidDataset

DATA = Path(__file__).resolve().parents[1] / "data"


def write_idx(path, arr, magic):
    arr = np.asarray(arr, dtype=np.uint8)
    raw = struct.pack(">I", magic) + struct.pack(f">{arr.ndim}I", *arr.shape) + arr.tobytes()
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wb") as fh:
        fh.write(raw)
    return path


# -- synthetic ------------------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["triangular", "trigonometric"])
def test_synthetic_shape_and_patterns(kind):
    ds = gen_synthetic(kind, n_per_class=2, noise_std=0.0)
    assert ds.X_train.shape == (4, 20) and list(ds.y_train) == [1, 1, 0, 0]
    pos = ds.X_train[0]
    moving = np.flatnonzero(np.abs(np.diff(pos)) > 1e-12)
    # two key patterns, each spanning five time units
    span = moving.max() - moving.min() + 2
    assert span == 2 * PATTERN_LENGTH


def test_synthetic_seeded():
    a, b = gen_synthetic("triangular", seed=4), gen_synthetic("triangular", seed=4)
    assert np.array_equal(a.X_train, b.X_train) and np.array_equal(a.X_test, b.X_test)
    assert not np.array_equal(a.X_train, gen_synthetic("triangular", seed=5).X_train)


def test_synthetic_noise_variance():
    clean = gen_synthetic("trigonometric", n_per_class=2500, noise_std=0.0)
    noisy = gen_synthetic("trigonometric", n_per_class=2500, seed=1)
    resid = (noisy.X_train - clean.X_train).ravel()[:10_000]
    assert abs(resid.var() - 0.1) < 0.01


def test_synthetic_unknown_kind():
    with pytest.raises(InvalidArgument):
        gen_synthetic("square")


# -- UCR ------------------------------------------------------------------------------------


def test_ucr_row_format(tmp_path):
    (tmp_path / "toy_TRAIN.tsv").write_text("1\t0.5\t0.3\n2\t0.1\t0.2\n")
    (tmp_path / "toy_TEST.tsv").write_text("2\t0.0\t0.0\n")
    X, labels = read_ucr_file(tmp_path / "toy_TRAIN.tsv")
    assert labels[0] == 1 and list(X[0]) == [0.5, 0.3]
    ds = load_ucr(tmp_path / "toy_TRAIN.tsv")
    assert list(ds.y_train) == [0, 1] and ds.num_classes == 2 and ds.name == "toy"


def test_ucr_ragged_rejected(tmp_path):
    p = tmp_path / "bad_TRAIN.tsv"
    p.write_text("1\t0.5\t0.3\n0\t0.1\n")
    with pytest.raises(FormatError, match="ragged"):
        read_ucr_file(p)


def test_ucr_round_trip(tmp_path):
    ds = gen_synthetic("triangular", n_per_class=3, seed=2)
    back = load_ucr(write_ucr(ds, tmp_path / ds.name))
    assert np.array_equal(back.X_train, ds.X_train) and np.array_equal(back.y_test, ds.y_test)


def test_ucr_missing_pair(tmp_path):
    with pytest.raises(InvalidDataset):
        load_ucr(tmp_path)


@pytest.mark.parametrize("name,total,length", [("Coffee", 56, 286), ("ItalyPowerDemand", 1096, 24)])
def test_ucr_reference_sizes(name, total, length):
    path = DATA / "ucr" / name
    if not path.exists():
        pytest.skip(f"{name} not present under data/ucr")
    ds = load_ucr(path)
    assert len(ds.X_train) + len(ds.X_test) == total
    assert ds.length == length and ds.num_classes == 2


# -- IDX / MNIST ---------------------------------------------------------------------------------


def test_idx_magic_numbers(tmp_path):
    imgs = np.random.default_rng(0).integers(0, 256, size=(3, 28, 28))
    write_idx(tmp_path / "i", imgs, 0x00000803)
    write_idx(tmp_path / "l", [1, 0, 1], 0x00000801)
    assert read_idx_images(tmp_path / "i").shape == (3, 28, 28)
    assert list(read_idx_labels(tmp_path / "l")) == [1, 0, 1]
    with pytest.raises(FormatError, match="magic"):
        read_idx_labels(tmp_path / "i")


def test_idx_truncated(tmp_path):
    p = write_idx(tmp_path / "i", np.zeros((2, 28, 28)), 0x00000803)
    p.write_bytes(p.read_bytes()[:-10])
    with pytest.raises(FormatError, match="truncated"):
        read_idx_images(p)
    p.write_bytes(b"\x00\x00")
    with pytest.raises(FormatError):
        read_idx_images(p)


def _tiny_mnist(root, rng):
    root.mkdir(exist_ok=True)
    for prefix, n in (("train", 30), ("t10k", 12)):
        labels = np.tile(np.arange(3), n // 3)
        imgs = rng.integers(0, 256, size=(n, 28, 28))
        write_idx(root / f"{prefix}-images-idx3-ubyte.gz", imgs, 2051)
        write_idx(root / f"{prefix}-labels-idx1-ubyte.gz", labels, 2049)
    return root


def test_mnist_dir_filters_and_flattens(tmp_path, rng):
    ds = load_mnist_dir(_tiny_mnist(tmp_path / "m", rng), pos_digit=1, neg_digit=0)
    assert ds.X_train.shape == (20, 784) and ds.X_test.shape == (8, 784)
    assert set(ds.y_train) == {0, 1} and ds.y_train.sum() == 10
    assert ds.image_shape == (28, 28) and ds.X_train.max() <= 1.0


def test_mnist_per_class_limit(tmp_path, rng):
    ds = load_mnist_dir(_tiny_mnist(tmp_path / "m", rng), 1, 0, train_per_class=4, test_per_class=2)
    assert np.bincount(ds.y_train).tolist() == [4, 4]
    assert np.bincount(ds.y_test).tolist() == [2, 2]


def test_mnist_without_test_files_splits(tmp_path, rng):
    root = _tiny_mnist(tmp_path / "m", rng)
    ds = load_mnist(root / "train-images-idx3-ubyte.gz", root / "train-labels-idx1-ubyte.gz", 2, 1)
    assert len(ds.X_train) + len(ds.X_test) == 20


# -- dataset helpers ------------------------------------------------------------------------------


def test_binarize():
    ds = Dataset(np.zeros((6, 3)), [0, 1, 2, 2, 1, 0], np.zeros((3, 3)), [2, 0, 1], 3)
    b = binarize(ds, 2)
    assert list(b.y_train) == [0, 0, 1, 1, 0, 0] and b.num_classes == 2
    assert b.y_train.sum() == np.sum(ds.y_train == 2)
    two = Dataset(np.zeros((2, 3)), [0, 1], np.zeros((2, 3)), [1, 0], 2)
    assert np.array_equal(binarize(two, 1).y_train, two.y_train)
    with pytest.raises(InvalidArgument):
        binarize(ds, 3)


def test_dataset_validation():
    with pytest.raises(InvalidDataset):
        Dataset(np.zeros((0, 3)), [], np.zeros((1, 3)), [0], 2)
    with pytest.raises(InvalidDataset):
        Dataset(np.zeros((2, 3)), [0, 1], np.zeros((1, 4)), [0], 2)
    with pytest.raises(InvalidDataset):
        Dataset(np.array([[np.nan, 0.0]]), [0], np.zeros((1, 2)), [0], 2)


def test_znormalize():
    ds = gen_synthetic("triangular", seed=0)
    z = znormalize(ds)
    assert np.allclose(z.X_train.mean(axis=1), 0) and np.allclose(z.X_train.std(axis=1), 1)
