"""Dense statevector primitives.

States are plain complex arrays of shape ``(2**n,)`` or, for a batch of
samples, ``(B, 2**n)``. Qubit 0 is the most significant bit of the basis
index, so the readout block ``P_i (x) I`` of the classifier lives on qubits
``0..k-1``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import (BadBlockSize, BadTargetList, DimensionMismatch,
                     NonUnitaryGate, QubitCountOutOfRange)

MAX_QUBITS = 12
UNITARY_TOL = 1e-9


def num_qubits(state: np.ndarray) -> int:
    dim = state.shape[-1]
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise DimensionMismatch(f"state length {dim} is not a power of two")
    return n


def plus_state(n: int) -> np.ndarray:
    if not 1 <= n <= MAX_QUBITS:
        raise QubitCountOutOfRange(f"n = {n} outside [1, {MAX_QUBITS}]")
    return np.full(1 << n, 2.0 ** (-n / 2), dtype=np.complex128)


def basis_state(n: int, index: int = 0) -> np.ndarray:
    if not 1 <= n <= MAX_QUBITS:
        raise QubitCountOutOfRange(f"n = {n} outside [1, {MAX_QUBITS}]")
    s = np.zeros(1 << n, dtype=np.complex128)
    s[index] = 1.0
    return s


def _check_unitary(u: np.ndarray) -> None:
    eye = np.eye(u.shape[-1])
    if np.max(np.abs(u @ u.conj().T - eye)) > UNITARY_TOL:
        raise NonUnitaryGate("gate is not unitary within 1e-9")


def apply_full(u: np.ndarray, state: np.ndarray, check: bool = True) -> np.ndarray:
    u = np.asarray(u)
    if u.shape != (state.shape[-1], state.shape[-1]):
        raise DimensionMismatch(f"gate {u.shape} on state of length {state.shape[-1]}")
    if check:
        _check_unitary(u)
    return state @ u.T


def _validate_targets(targets: Sequence[int], n: int) -> tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    if not targets or len(set(targets)) != len(targets) or len(targets) > n:
        raise BadTargetList(f"bad target list {targets} for {n} qubits")
    if any(t < 0 or t >= n for t in targets):
        raise BadTargetList(f"target out of range in {targets} for {n} qubits")
    return targets


def apply_local(u: np.ndarray, targets: Sequence[int], state: np.ndarray,
                check: bool = True) -> np.ndarray:
    """Apply a ``2^k x 2^k`` gate to the ordered ``targets`` of ``state``.

    ``targets[0]`` is the most significant qubit of the gate's own index.
    Works on a single state or a ``(B, 2**n)`` batch.
    """
    n = num_qubits(state)
    targets = _validate_targets(targets, n)
    k = len(targets)
    u = np.asarray(u)
    if u.shape != (1 << k, 1 << k):
        raise DimensionMismatch(f"gate {u.shape} on {k} targets")
    if check:
        _check_unitary(u)
    return _apply_local(u, targets, state, n)


def _apply_local(u, targets, state, n):
    # reshape into one axis per qubit, contract the target axes, restore order
    batch = state.shape[:-1]
    nb = len(batch)
    k = len(targets)
    psi = state.reshape(batch + (2,) * n)
    axes = [nb + t for t in targets]
    psi = np.moveaxis(psi, axes, range(nb, nb + k))
    rest = psi.shape[nb + k:]
    psi = psi.reshape(batch + (1 << k, -1))
    psi = np.matmul(u, psi)
    psi = psi.reshape(batch + (2,) * k + rest)
    psi = np.moveaxis(psi, range(nb, nb + k), axes)
    return psi.reshape(state.shape)


def local_cross_matrix(mu: np.ndarray, phi: np.ndarray, targets: Sequence[int],
                       n: int) -> np.ndarray:
    """``R[c, a] = sum_{batch, rest} phi[c, rest] * conj(mu[a, rest])``.

    For a gate ``G`` on ``targets``, ``sum_b <mu_b|(G (x) I)|phi_b> = tr(G R)``.
    """
    k = len(targets)

    def split(s):
        batch = s.shape[:-1]
        nb = len(batch)
        s = s.reshape(batch + (2,) * n)
        s = np.moveaxis(s, [nb + t for t in targets], range(nb, nb + k))
        s = s.reshape(batch + (1 << k, -1))
        return np.moveaxis(s, -2, 0).reshape(1 << k, -1)

    return split(phi) @ split(mu).conj().T


def readout_index(n: int, qubits: Sequence[int]) -> np.ndarray:
    """Class index of every basis state when reading ``qubits`` (first = MSB)."""
    basis = np.arange(1 << n)
    idx = np.zeros(1 << n, dtype=np.int64)
    for q in qubits:
        idx = (idx << 1) | ((basis >> (n - 1 - q)) & 1)
    return idx


def marginal_probabilities(state: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Computational-basis marginal of the ordered ``qubits``; others summed out."""
    n = num_qubits(state)
    qubits = _validate_targets(qubits, n)
    k = len(qubits)
    batch = state.shape[:-1]
    nb = len(batch)
    prob = (state.real ** 2 + state.imag ** 2).reshape(batch + (2,) * n)
    prob = np.moveaxis(prob, [nb + q for q in qubits], range(nb, nb + k))
    prob = prob.reshape(batch + (1 << k, -1))
    return prob.sum(axis=-1)


def block_probabilities(state: np.ndarray, k: int) -> np.ndarray:
    """Probabilities of the leading ``k`` qubits: ``<s|P_i (x) I|s>`` for all ``i``."""
    n = num_qubits(state)
    if not 1 <= k <= n:
        raise BadBlockSize(f"k = {k} with {n} qubits")
    prob = state.real ** 2 + state.imag ** 2
    return prob.reshape(state.shape[:-1] + (1 << k, -1)).sum(axis=-1)
