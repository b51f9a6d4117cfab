"""Image -> Hamiltonian embedding and the amplitude-embedding baseline."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonSquareInput, TargetTooSmall, ZeroVector
from .linalg import HermitianEigen, expm_scaled, hermitian_eig


def hermitianize(m: np.ndarray) -> np.ndarray:
    """``(M + M^T) / 2`` for a real square matrix (or a stack of them)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise NonSquareInput(f"expected square image, got shape {m.shape}")
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def pad_to(m: np.ndarray, side: int) -> np.ndarray:
    """Zero-pad the trailing two axes to ``side x side``, image anchored top-left."""
    m = np.asarray(m)
    h, w = m.shape[-2:]
    if side < h or side < w:
        raise TargetTooSmall(f"cannot pad {h}x{w} to {side}x{side}")
    if side & (side - 1):
        raise TargetTooSmall(f"target side {side} is not a power of two")
    if (h, w) == (side, side):
        return m
    out = np.zeros(m.shape[:-2] + (side, side), dtype=m.dtype)
    out[..., :h, :w] = m
    return out


@dataclass(frozen=True)
class EmbeddedImage:
    """One image as a Hamiltonian with its cached eigendecomposition."""

    hamiltonian: np.ndarray
    eig: HermitianEigen
    label: int = -1
    side: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "side", self.hamiltonian.shape[-1])

    @property
    def n_qubits(self) -> int:
        return self.side.bit_length() - 1

    @classmethod
    def from_matrix(cls, m: np.ndarray, label: int = -1) -> "EmbeddedImage":
        h = hermitianize(m)
        return cls(h, hermitian_eig(h, check=False), int(label))


def ham_embedding_unitary(img: EmbeddedImage, t: float) -> np.ndarray:
    """``W(t; M) = exp(-i H_M t / 2)``."""
    return expm_scaled(img.eig, -0.5 * t)


def amplitude_embed(v: np.ndarray, n: int | None = None) -> np.ndarray:
    """Zero-pad ``v`` to ``2**n`` entries and normalise it into a statevector.

    Stacks of vectors (shape ``(B, d)``) are embedded row by row.
    """
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[-1]
    if n is None:
        n = max(1, (d - 1).bit_length())
    if d > 1 << n:
        raise TargetTooSmall(f"vector of length {d} does not fit {n} qubits")
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ZeroVector("cannot amplitude-embed an all-zero vector")
    out = np.zeros(v.shape[:-1] + (1 << n,), dtype=np.complex128)
    out[..., :d] = v / norm
    return out


@dataclass(frozen=True)
class EmbeddedSet:
    """A dataset of embedded images stored as stacked eigendecompositions.

    Indexing with an int yields an :class:`EmbeddedImage`; indexing with an
    array of indices yields another ``EmbeddedSet``.
    """

    eigenvalues: np.ndarray   # (B, N)
    eigenvectors: np.ndarray  # (B, N, N)
    labels: np.ndarray        # (B,)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def side(self) -> int:
        return self.eigenvalues.shape[-1]

    @property
    def n_qubits(self) -> int:
        return self.side.bit_length() - 1

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            eig = HermitianEigen(self.eigenvalues[idx].copy(), self.eigenvectors[idx].copy())
            return EmbeddedImage(eig.reconstruct().real, eig, int(self.labels[idx]))
        return EmbeddedSet(self.eigenvalues[idx], self.eigenvectors[idx], self.labels[idx])

    @classmethod
    def from_images(cls, images: np.ndarray, labels) -> "EmbeddedSet":
        h = hermitianize(images)
        w, v = np.linalg.eigh(h)
        return cls(w, v, np.asarray(labels, dtype=np.int64))

    @classmethod
    def stack(cls, images: list[EmbeddedImage]) -> "EmbeddedSet":
        return cls(np.stack([im.eig.eigenvalues for im in images]),
                   np.stack([im.eig.eigenvectors for im in images]),
                   np.array([im.label for im in images], dtype=np.int64))


@dataclass(frozen=True)
class AmplitudeSet:
    """Flattened, scaled, zero-padded image vectors for the amplitude baseline."""

    vectors: np.ndarray  # (B, 2**n), real
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_qubits(self) -> int:
        return self.vectors.shape[-1].bit_length() - 1

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return self.vectors[idx], int(self.labels[idx])
        return AmplitudeSet(self.vectors[idx], self.labels[idx])
