"""Verify an MNIST / FashionMNIST data directory: checksums and 8-class counts.

Expected layout (files may also be gzipped, ``<name>.gz``)::

    <root>/mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte
    <root>/fashion/{train,t10k}-{images-idx3,labels-idx1}-ubyte

    python3 scripts/check_data.py [--data-dir ROOT]
"""
from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

from hamemb.data import IDX_FILES, default_data_dir, filter_and_split, load_idx_split

# sha256 of the uncompressed MNIST files these results were produced with
# (60000/10000 images; 48200/8017 after keeping labels 0-7)
MNIST_SHA256 = {
    "train-images-idx3-ubyte": "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
    "train-labels-idx1-ubyte": "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5",
    "t10k-images-idx3-ubyte": "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
    "t10k-labels-idx1-ubyte": "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2",
}
EXPECTED = {"mnist": (48200, 8017), "fashion": (48000, 8000)}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data-dir", type=Path, default=None)
    root = ap.parse_args(argv).data_dir or default_data_dir()
    status = 0
    for name, want in EXPECTED.items():
        folder = root / name
        if not folder.is_dir():
            print(f"{name:8s} missing ({folder})")
            status = 1
            continue
        if name == "mnist":
            for fname in (f for pair in IDX_FILES.values() for f in pair):
                path = folder / fname
                if path.exists():
                    digest = hashlib.sha256(path.read_bytes()).hexdigest()
                    tag = "ok" if digest == MNIST_SHA256[fname] else "MISMATCH"
                    print(f"{name:8s} {fname:26s} sha256 {tag}")
        train, test = filter_and_split(load_idx_split(name, "train", root), range(8),
                                       test=load_idx_split(name, "test", root))
        got = (len(train), len(test))
        print(f"{name:8s} labels 0-7: {got[0]}/{got[1]} (expected {want[0]}/{want[1]})"
              f" {'ok' if got == want else 'MISMATCH'}")
        status |= got != want
    return status


if __name__ == "__main__":
    sys.exit(main())
