"""Dataset loading (IDX, sklearn digits), class filtering, splits and preprocessing."""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import AmplitudeSet, EmbeddedSet, pad_to
from .errors import (BadMagic, CountMismatch, EmptyDataset, InsufficientSamples,
                     ParseError, TargetTooSmall, TruncatedFile)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
DATA_DIR_ENV = "HAMEMB_DATA_DIR"

IDX_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
DATASET_SUBDIRS = {"mnist": "mnist", "fashion": "fashion"}


@dataclass
class RawDataset:
    images: np.ndarray  # (count, rows, cols) uint8
    labels: np.ndarray  # (count,) uint8
    name: str = ""
    max_value: int = 255

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise CountMismatch(f"{len(self.images)} images vs {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "RawDataset":
        return RawDataset(self.images[idx], self.labels[idx], self.name, self.max_value)


def _read_header(buf: bytes, n_words: int, path) -> tuple[int, ...]:
    if len(buf) < 4 * n_words:
        raise TruncatedFile(f"{path}: header shorter than {4 * n_words} bytes")
    return struct.unpack(f">{n_words}I", buf[:4 * n_words])


def _open_bytes(path) -> bytes:
    path = Path(path)
    if not path.exists() and path.with_name(path.name + ".gz").exists():
        path = path.with_name(path.name + ".gz")
    if path.suffix == ".gz":
        import gzip
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def read_idx_images(path) -> np.ndarray:
    buf = _open_bytes(path)
    magic, = _read_header(buf, 1, path)
    if magic != IMAGES_MAGIC:
        raise BadMagic(f"{path}: magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")
    _, count, rows, cols = _read_header(buf, 4, path)
    need = count * rows * cols
    if len(buf) - 16 < need:
        raise TruncatedFile(f"{path}: {len(buf) - 16} pixel bytes, expected {need}")
    return np.frombuffer(buf, dtype=np.uint8, count=need, offset=16).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    buf = _open_bytes(path)
    magic, = _read_header(buf, 1, path)
    if magic != LABELS_MAGIC:
        raise BadMagic(f"{path}: magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")
    _, count = _read_header(buf, 2, path)
    if len(buf) - 8 < count:
        raise TruncatedFile(f"{path}: {len(buf) - 8} label bytes, expected {count}")
    return np.frombuffer(buf, dtype=np.uint8, count=count, offset=8)


def load_idx(images_path, labels_path, name: str = "") -> RawDataset:
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise CountMismatch(f"{len(images)} images vs {len(labels)} labels")
    return RawDataset(images, labels, name or Path(images_path).name)


def write_idx(ds: RawDataset, images_path, labels_path) -> None:
    count, rows, cols = ds.images.shape
    Path(images_path).write_bytes(
        struct.pack(">4I", IMAGES_MAGIC, count, rows, cols)
        + np.ascontiguousarray(ds.images, dtype=np.uint8).tobytes())
    Path(labels_path).write_bytes(
        struct.pack(">2I", LABELS_MAGIC, count)
        + np.ascontiguousarray(ds.labels, dtype=np.uint8).tobytes())


def default_data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, Path.home() / "data"))


def load_idx_split(name: str, part: str, data_dir=None) -> RawDataset:
    """Canonical ``train``/``test`` partition of ``mnist`` or ``fashion``.

    Files are looked up in ``<data_dir>/<name>/`` using the standard IDX
    file names (optionally gzipped).
    """
    root = Path(data_dir) if data_dir is not None else default_data_dir()
    folder = root / DATASET_SUBDIRS.get(name, name)
    images, labels = IDX_FILES[part]
    if not folder.is_dir():
        raise FileNotFoundError(f"dataset directory {folder} not found")
    ds = load_idx(folder / images, folder / labels, name=f"{name}-{part}")
    return ds


def load_digits(path=None) -> RawDataset:
    """The 8x8 UCI handwritten digits (1797 images, pixels 0..16).

    ``path`` may point to a CSV of 65 integer columns (64 pixels then the
    label); otherwise the copy bundled with scikit-learn is used.
    """
    if path is None:
        from sklearn.datasets import load_digits as _sk_digits
        bunch = _sk_digits()
        images = bunch.images.astype(np.uint8)
        labels = bunch.target.astype(np.uint8)
    else:
        try:
            table = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        if table.shape[1] != 65:
            raise ParseError(f"{path}: expected 65 columns, got {table.shape[1]}")
        images = table[:, :64].reshape(-1, 8, 8).astype(np.uint8)
        labels = table[:, 64].astype(np.uint8)
    if images.max(initial=0) > 16:
        raise ParseError("digits pixels must lie in 0..16")
    return RawDataset(images, labels, "digits", max_value=16)


def filter_classes(ds: RawDataset, classes) -> RawDataset:
    """Keep only ``classes``, preserving the original order."""
    if classes is None:
        return ds
    keep = np.isin(ds.labels, np.asarray(list(classes)))
    return ds.subset(np.flatnonzero(keep))


def random_split(ds: RawDataset, n_train: int, n_test: int, seed: int):
    """Seeded shuffle, then the first ``n_train`` / next ``n_test`` samples."""
    if n_train + n_test > len(ds):
        raise InsufficientSamples(f"need {n_train + n_test} samples, have {len(ds)}")
    order = np.random.default_rng(seed).permutation(len(ds))
    return ds.subset(np.sort(order[:n_train])), ds.subset(np.sort(order[n_train:n_train + n_test]))


def subsample(ds: RawDataset, n: int | None, seed: int) -> RawDataset:
    if n is None or n >= len(ds):
        return ds
    order = np.random.default_rng(seed).permutation(len(ds))
    return ds.subset(np.sort(order[:n]))


def filter_and_split(ds: RawDataset, classes=None, split=None, seed: int = 0,
                     test: RawDataset | None = None):
    """Class-filter and partition into ``(train, test)``.

    ``split`` is ``(n_train, n_test)`` for a seeded random split of ``ds``.
    When ``test`` is given (a canonical test partition) both sets are filtered
    and ``split``, if present, subsamples each of them. With neither, the whole
    filtered set is the train set and the test set is empty.
    """
    ds = filter_classes(ds, classes)
    if test is not None:
        test = filter_classes(test, classes)
        if split is not None:
            n_train, n_test = split
            if n_train > len(ds) or n_test > len(test):
                raise InsufficientSamples(
                    f"need {n_train}/{n_test}, have {len(ds)}/{len(test)}")
            ds, test = subsample(ds, n_train, seed), subsample(test, n_test, seed + 1)
        return ds, test
    if split is None:
        return ds, ds.subset(np.array([], dtype=np.int64))
    return random_split(ds, *split, seed=seed)


def _scaled(ds: RawDataset) -> np.ndarray:
    return ds.images.astype(np.float64) / float(ds.max_value)


def preprocess_ham(ds: RawDataset, target_side: int | None = None,
                   chunk: int = 4096) -> EmbeddedSet:
    """Normalise pixels to [0, 1], pad, Hermitianise and eigendecompose every image."""
    if len(ds) == 0:
        raise EmptyDataset(f"{ds.name}: no images")
    side = target_side or 1 << (max(ds.images.shape[1:]) - 1).bit_length()
    parts = []
    for start in range(0, len(ds), chunk):
        imgs = pad_to(_scaled(ds.subset(slice(start, start + chunk))), side)
        parts.append(EmbeddedSet.from_images(imgs, ds.labels[start:start + chunk]))
    return EmbeddedSet(np.concatenate([p.eigenvalues for p in parts]),
                       np.concatenate([p.eigenvectors for p in parts]),
                       ds.labels.astype(np.int64))


def preprocess_amp(ds: RawDataset, n_qubits: int | None = None) -> AmplitudeSet:
    """Row-major flatten, scale to [0, 1] and zero-pad to ``2**n`` entries.

    Normalisation to a unit vector happens later, in ``amplitude_embed``.
    """
    flat = _scaled(ds).reshape(len(ds), -1)
    d = flat.shape[1]
    if n_qubits is None:
        n_qubits = (d - 1).bit_length()
    if d > 1 << n_qubits:
        raise TargetTooSmall(f"{d} pixels do not fit {n_qubits} qubits")
    out = np.zeros((len(ds), 1 << n_qubits))
    out[:, :d] = flat
    return AmplitudeSet(out, ds.labels.astype(np.int64))


def load_raw(cfg) -> tuple[RawDataset, RawDataset | None]:
    """Source partition(s) named by an ``ExperimentConfig``."""
    if cfg.dataset == "digits":
        return load_digits(cfg.digits_csv), None
    if cfg.dataset == "idx":
        return (load_idx(cfg.idx_train_images, cfg.idx_train_labels, "idx-train"),
                load_idx(cfg.idx_test_images, cfg.idx_test_labels, "idx-test"))
    return (load_idx_split(cfg.dataset, "train", cfg.data_dir),
            load_idx_split(cfg.dataset, "test", cfg.data_dir))


def prepare_datasets(cfg):
    """``(train, test, train_eval, n_qubits)`` ready for the configured model.

    ``train_eval`` is a seeded subset of ``train`` when ``eval_train_size``
    is set, else ``train`` itself.
    """
    raw, raw_test = load_raw(cfg)
    classes = range(cfg.n_classes)
    if raw_test is None:
        split = (cfg.train_size or 1200, cfg.test_size or 100)
        train, test = filter_and_split(raw, classes, split, seed=cfg.split_seed)
    else:
        split = None
        if cfg.train_size or cfg.test_size:
            split = (cfg.train_size or len(filter_classes(raw, classes)),
                     cfg.test_size or len(filter_classes(raw_test, classes)))
        train, test = filter_and_split(raw, classes, split, seed=cfg.split_seed, test=raw_test)
    if len(train) == 0:
        raise EmptyDataset("no training images after filtering")

    if cfg.model == "hamemb":
        side = 1 << cfg.n_qubits if cfg.n_qubits else None
        train_set, test_set = preprocess_ham(train, side), preprocess_ham(test, side) if len(test) else None
        n_qubits = train_set.n_qubits
    else:
        train_set = preprocess_amp(train, cfg.n_qubits)
        n_qubits = train_set.n_qubits
        test_set = preprocess_amp(test, n_qubits) if len(test) else None
    if test_set is None:
        test_set = train_set[np.array([], dtype=np.int64)]
    eval_train = train_set
    if cfg.eval_train_size and cfg.eval_train_size < len(train_set):
        order = np.random.default_rng(cfg.split_seed + 2).permutation(len(train_set))
        eval_train = train_set[np.sort(order[:cfg.eval_train_size])]
    return train_set, test_set, eval_train, n_qubits
