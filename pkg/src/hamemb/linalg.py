"""Dense Hermitian kernels: eigendecomposition, exponentials, Frechet derivatives.

Every exponential in the package is of the form ``exp(i c A)`` with ``A``
Hermitian, so it is evaluated exactly in the eigenbasis of ``A``. The
eigendecomposition of an image Hamiltonian is computed once and reused for
every value of the scale ``c``.

All functions accept stacked inputs with arbitrary leading batch axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonHermitianInput, NonSquareInput, ShapeMismatch

HERMITIAN_RTOL = 1e-10


@dataclass(frozen=True)
class HermitianEigen:
    """Eigendecomposition ``A = V diag(w) V^dagger`` with ascending ``w``.

    ``eigenvectors`` holds eigenvectors as columns. For real symmetric input
    the eigenvectors are real, which halves memory for cached datasets.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[-1]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues[..., None, :]) @ dagger(v)


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def check_hermitian(a: np.ndarray) -> None:
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise NonSquareInput(f"expected square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    err = float(np.max(np.abs(a - dagger(a)), initial=0.0))
    if err > HERMITIAN_RTOL * scale:
        raise NonHermitianInput(f"max|A - A^dagger| = {err:.3e}")


def hermitian_eig(a: np.ndarray, check: bool = True) -> HermitianEigen:
    """Eigendecomposition of a (stack of) Hermitian matrices via LAPACK ``heevd``."""
    a = np.asarray(a)
    if check:
        check_hermitian(a)
    if not np.iscomplexobj(a):
        a = a.astype(np.float64, copy=False)
    w, v = np.linalg.eigh(a)
    return HermitianEigen(w, v)


def expm_scaled(eig: HermitianEigen, c: float) -> np.ndarray:
    """``exp(i c A) = V diag(exp(i c w)) V^dagger``."""
    v = eig.eigenvectors
    phase = np.exp(1j * c * eig.eigenvalues)
    return (v * phase[..., None, :]) @ dagger(v)


def divided_difference_kernel(eigenvalues: np.ndarray, c: float) -> np.ndarray:
    """First divided differences of ``x -> exp(i c x)`` over the spectrum, divided by ``i c``.

    ``(e^{icx_j} - e^{icx_k}) / (ic (x_j - x_k))`` is rewritten as
    ``e^{ic(x_j+x_k)/2} sinc(c(x_j-x_k)/2)``, which has no cancellation and
    reduces to ``e^{icx_j}`` on (near-)degenerate pairs without a branch.
    """
    wj = eigenvalues[..., :, None]
    wk = eigenvalues[..., None, :]
    mid = np.exp(0.5j * c * (wj + wk))
    # np.sinc is sin(pi x)/(pi x)
    return mid * np.sinc(c * (wj - wk) / (2.0 * np.pi))


def frechet_expm(eig: HermitianEigen, direction: np.ndarray, c: float) -> np.ndarray:
    """Directional derivative of ``s -> exp(i c (A + s E))`` at ``s = 0``.

    Daleckii-Krein: ``V [ (V^dagger (i c E) V) * Phi ] V^dagger`` where ``Phi``
    is :func:`divided_difference_kernel`.
    """
    direction = np.asarray(direction)
    if direction.shape[-2:] != eig.eigenvectors.shape[-2:]:
        raise ShapeMismatch(
            f"direction {direction.shape} vs matrix {eig.eigenvectors.shape}")
    v = eig.eigenvectors
    inner = dagger(v) @ (1j * c * direction) @ v
    return v @ (inner * divided_difference_kernel(eig.eigenvalues, c)) @ dagger(v)
