"""Parameterised circuits: Pauli generators, SU(N) gates, layouts and models.

Both classifiers compile to a :class:`Circuit`, a flat list of operations
acting on a batch of statevectors. Each operation reads its parameters from
a named array in the model's parameter dict, which is what the optimiser and
the adjoint differentiator operate on.

Reupload model, per layer ``i`` (ascending)::

    psi <- V(omega_i) W(t_i; M) psi,    psi_0 = |+>^n

QCNN baseline: amplitude-embedded input, then alternating convolution
(one shared SU(4) per layer, brickwall over the active qubits) and pooling
(controlled rotation onto the kept neighbour, control discarded).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .embedding import AmplitudeSet, EmbeddedImage, EmbeddedSet, amplitude_embed
from .errors import (ArityOutOfRange, DimensionMismatch, ParamLengthMismatch,
                     TooManyClasses, UnsupportedLayout)
from .linalg import HermitianEigen, expm_scaled, frechet_expm, hermitian_eig
from .qcore import _apply_local, block_probabilities, marginal_probabilities, plus_state

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

MAX_FULL_SU_QUBITS = 6


@lru_cache(maxsize=None)
def pauli_strings(k: int) -> tuple[str, ...]:
    if not 1 <= k <= MAX_FULL_SU_QUBITS:
        raise ArityOutOfRange(f"arity {k}")
    words = ("".join(p) for p in itertools.product("IXYZ", repeat=k))
    return tuple(w for w in words if w != "I" * k)


def pauli_matrix(word: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for ch in word:
        out = np.kron(out, PAULI[ch])
    return out


@lru_cache(maxsize=None)
def _pauli_basis(k: int) -> np.ndarray:
    basis = np.stack([pauli_matrix(w) for w in pauli_strings(k)])
    basis.setflags(write=False)
    return basis


def pauli_generator_basis(k: int, max_arity: int = 3) -> np.ndarray:
    """All ``4**k - 1`` non-identity Pauli strings on ``k`` qubits, lexicographic in I<X<Y<Z."""
    if not 1 <= k <= max_arity:
        raise ArityOutOfRange(f"arity {k} outside [1, {max_arity}]")
    return _pauli_basis(k)


@lru_cache(maxsize=None)
def controlled_rotation_generators() -> np.ndarray:
    """``|1><1| (x) P`` for ``P`` in X, Y, Z; control is the first gate qubit."""
    p1 = np.diag([0.0, 1.0]).astype(np.complex128)
    gens = np.stack([np.kron(p1, PAULI[c]) for c in "XYZ"])
    gens.setflags(write=False)
    return gens


@dataclass
class HermitianGeneratedGate:
    """``U(theta) = exp(i sum_j theta_j A_j)`` for Hermitian generators ``A_j``."""

    generators: np.ndarray
    params: np.ndarray

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (len(self.generators),):
            raise ParamLengthMismatch(
                f"{self.params.shape[0] if self.params.ndim else 0} params "
                f"for {len(self.generators)} generators")

    @property
    def arity(self) -> int:
        return self.generators.shape[-1].bit_length() - 1

    def generator(self) -> np.ndarray:
        return np.tensordot(self.params, self.generators, axes=1)

    def eig(self) -> HermitianEigen:
        return hermitian_eig(self.generator(), check=False)

    def unitary(self) -> np.ndarray:
        return expm_scaled(self.eig(), 1.0)

    def param_derivatives(self) -> np.ndarray:
        eig = self.eig()
        return np.stack([frechet_expm(eig, g, 1.0) for g in self.generators])


def gate_unitary(gate: HermitianGeneratedGate) -> np.ndarray:
    return gate.unitary()


def su_gate(theta: Sequence[float]) -> HermitianGeneratedGate:
    theta = np.asarray(theta, dtype=np.float64)
    k = {3: 1, 15: 2, 63: 3, 255: 4, 1023: 5, 4095: 6}.get(theta.size)
    if k is None:
        raise ParamLengthMismatch(f"{theta.size} is not 4**k - 1")
    return HermitianGeneratedGate(_pauli_basis(k), theta)


def layer_placements(n: int, layout: str = "A") -> list[tuple[int, ...]]:
    """Qubit groups acted on by the trainable gates of one reupload layer.

    Brickwall ``A`` places SU(4) gates on even pairs then odd pairs; ``B``
    reverses the two sub-layers. ``full`` is a single SU(2**n) on all qubits.
    """
    layout = layout.upper() if layout != "full" else layout
    if layout == "full":
        if n > MAX_FULL_SU_QUBITS:
            raise UnsupportedLayout(f"full SU(2^{n}) has too many parameters")
        return [tuple(range(n))]
    if layout not in ("A", "B") or n < 2:
        raise UnsupportedLayout(f"layout {layout!r} for {n} qubits")
    even = [(q, q + 1) for q in range(0, n - 1, 2)]
    odd = [(q, q + 1) for q in range(1, n - 1, 2)]
    return even + odd if layout == "A" else odd + even


def default_layout(n: int) -> str:
    return "A" if 2 <= n <= 5 else "full"


def readout_qubits(n_classes: int) -> int:
    return max(1, (int(n_classes) - 1).bit_length())


# --- circuit representation -------------------------------------------------

@dataclass(frozen=True)
class EmbedOp:
    """``W(t_layer; M)`` on the whole register, read from ``params['t'][layer]``."""

    layer: int
    key: str = "t"


@dataclass(frozen=True)
class GateOp:
    """Hermitian-generated gate on ``targets`` with params ``params[key][row]``."""

    key: str
    row: tuple
    targets: tuple[int, ...]
    generators: np.ndarray = field(compare=False, repr=False)


Op = Union[EmbedOp, GateOp]


@dataclass
class Circuit:
    n_qubits: int
    ops: list
    readout: tuple[int, ...]
    n_classes: int


@dataclass
class BoundGate:
    eig: HermitianEigen
    unitary: np.ndarray


def bind_gates(circuit: Circuit, params: dict) -> dict:
    """Eigendecompose and exponentiate every distinct gate once."""
    bound = {}
    for op in circuit.ops:
        if isinstance(op, GateOp) and (op.key, op.row) not in bound:
            theta = params[op.key][op.row]
            eig = hermitian_eig(np.tensordot(theta, op.generators, axes=1), check=False)
            bound[op.key, op.row] = BoundGate(eig, expm_scaled(eig, 1.0))
    return bound


def embed_apply(psi, eigvals, eigvecs, t, adjoint=False, derivative=False):
    """Apply ``W(t)`` (or its adjoint, or ``dW/dt``) through the cached eigenbasis."""
    sign = 1.0 if adjoint else -1.0
    phase = np.exp(sign * 0.5j * t * eigvals)
    if derivative:
        phase = phase * (-0.5j * eigvals)
    coeff = np.einsum("...ji,...j->...i", eigvecs.conj(), psi)
    return np.einsum("...ij,...j->...i", eigvecs, phase * coeff)


def apply_op(op, psi, params, bound, spectra, adjoint=False):
    n = psi.shape[-1].bit_length() - 1
    if isinstance(op, EmbedOp):
        eigvals, eigvecs = spectra
        return embed_apply(psi, eigvals, eigvecs, params[op.key][op.layer], adjoint)
    u = bound[op.key, op.row].unitary
    if adjoint:
        u = u.conj().T
    return _apply_local(u, op.targets, psi, n)


def run_circuit(circuit: Circuit, params: dict, psi0: np.ndarray, spectra=None,
                keep_states: bool = False):
    """Evolve ``psi0`` through ``circuit``; optionally return every intermediate state."""
    bound = bind_gates(circuit, params)
    psi = psi0
    states = [psi] if keep_states else None
    for op in circuit.ops:
        psi = apply_op(op, psi, params, bound, spectra)
        if keep_states:
            states.append(psi)
    return (psi, states, bound) if keep_states else psi


def readout_probs(circuit: Circuit, psi: np.ndarray) -> np.ndarray:
    """First ``K`` entries of the readout-qubit marginal."""
    k = len(circuit.readout)
    if circuit.readout == tuple(range(k)):
        probs = block_probabilities(psi, k)
    else:
        probs = marginal_probabilities(psi, circuit.readout)
    return probs[..., :circuit.n_classes]


# --- reuploading classifier -------------------------------------------------

@dataclass
class ReuploadModel:
    n_qubits: int
    n_layers: int
    n_classes: int
    layout: str
    params: dict

    @property
    def placements(self) -> list[tuple[int, ...]]:
        return layer_placements(self.n_qubits, self.layout)

    @property
    def gate_size(self) -> int:
        return 4 ** len(self.placements[0]) - 1

    @property
    def n_readout(self) -> int:
        return readout_qubits(self.n_classes)

    def param_shapes(self) -> dict:
        return {"t": (self.n_layers,),
                "omega": (self.n_layers, len(self.placements), self.gate_size)}

    @classmethod
    def create(cls, n_qubits: int, n_layers: int, n_classes: int,
               layout: str | None = None, rng=None, init: str = "uniform"):
        layout = layout or default_layout(n_qubits)
        model = cls(n_qubits, n_layers, n_classes, layout, {})
        if model.n_readout > n_qubits:
            raise TooManyClasses(f"{n_classes} classes on {n_qubits} qubits")
        model.params = init_params(model.param_shapes(), rng, init)
        return model

    def with_params(self, params: dict) -> "ReuploadModel":
        return ReuploadModel(self.n_qubits, self.n_layers, self.n_classes, self.layout,
                             {k: np.asarray(v, dtype=np.float64) for k, v in params.items()})

    def circuit(self) -> Circuit:
        ops: list = []
        placements = self.placements
        gens = _pauli_basis(len(placements[0]))
        for i in range(self.n_layers):
            ops.append(EmbedOp(i))
            ops.extend(GateOp("omega", (i, g), tuple(p), gens) for g, p in enumerate(placements))
        return Circuit(self.n_qubits, ops, tuple(range(self.n_readout)), self.n_classes)

    def initial_state(self, batch: int | None = None) -> np.ndarray:
        psi = plus_state(self.n_qubits)
        return psi if batch is None else np.broadcast_to(psi, (batch, psi.size)).copy()


def init_params(shapes: dict, rng=None, init: str = "uniform") -> dict:
    rng = np.random.default_rng(rng)
    if init == "zeros":
        return {k: np.zeros(s) for k, s in shapes.items()}
    if init != "uniform":
        raise ValueError(f"unknown init {init!r}")
    # fixed key order keeps initialisation reproducible
    return {k: rng.uniform(-np.pi, np.pi, size=shapes[k]) for k in sorted(shapes)}


def _spectra_of(img) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(img, EmbeddedImage):
        return img.eig.eigenvalues, img.eig.eigenvectors
    return img.eigenvalues, img.eigenvectors


def reupload_forward(model: ReuploadModel, img: Union[EmbeddedImage, EmbeddedSet]) -> np.ndarray:
    """Final state(s) ``prod_i V(omega_i) W(t_i; M) |+>^n``."""
    eigvals, eigvecs = _spectra_of(img)
    if eigvals.shape[-1] != 1 << model.n_qubits:
        raise DimensionMismatch(f"image side {eigvals.shape[-1]} vs {model.n_qubits} qubits")
    batch = None if eigvals.ndim == 1 else eigvals.shape[0]
    return run_circuit(model.circuit(), model.params, model.initial_state(batch),
                       (eigvals, eigvecs))


def class_probs(state: np.ndarray, n_classes: int) -> np.ndarray:
    n = state.shape[-1].bit_length() - 1
    k = readout_qubits(n_classes)
    if k > n:
        raise TooManyClasses(f"{n_classes} classes need {k} qubits, state has {n}")
    return block_probabilities(state, k)[..., :n_classes]


# --- QCNN baseline ----------------------------------------------------------

def qcnn_schedule(n_qubits: int, n_keep: int) -> list[tuple[list, list, list]]:
    """Per conv/pool stage: active qubits, conv pairs, and (control, target) pool pairs.

    Each pool stage pairs neighbouring active qubits ``(a_{2j}, a_{2j+1})``,
    discards the first, and stops pairing once ``n_keep`` would be undercut.
    """
    active = list(range(n_qubits))
    stages = []
    while len(active) > n_keep:
        conv = ([(active[j], active[j + 1]) for j in range(0, len(active) - 1, 2)]
                + [(active[j], active[j + 1]) for j in range(1, len(active) - 1, 2)])
        n_pool = min(len(active) // 2, len(active) - n_keep)
        pool = [(active[2 * j], active[2 * j + 1]) for j in range(n_pool)]
        stages.append((list(active), conv, pool))
        dropped = {c for c, _ in pool}
        active = [q for q in active if q not in dropped]
    return stages


@dataclass
class QcnnModel:
    n_qubits: int
    n_classes: int
    params: dict

    @property
    def n_readout(self) -> int:
        return readout_qubits(self.n_classes)

    @property
    def stages(self):
        return qcnn_schedule(self.n_qubits, self.n_readout)

    @property
    def active_qubits(self) -> tuple[int, ...]:
        stages = self.stages
        if not stages:
            return tuple(range(self.n_qubits))
        active, _, pool = stages[-1]
        dropped = {c for c, _ in pool}
        return tuple(q for q in active if q not in dropped)

    def param_shapes(self) -> dict:
        s = len(self.stages)
        return {"conv": (s, 15), "pool": (s, 3)}

    @classmethod
    def create(cls, n_qubits: int, n_classes: int, rng=None, init: str = "uniform"):
        model = cls(n_qubits, n_classes, {})
        if model.n_readout > n_qubits:
            raise TooManyClasses(f"{n_classes} classes on {n_qubits} qubits")
        model.params = init_params(model.param_shapes(), rng, init)
        return model

    def with_params(self, params: dict) -> "QcnnModel":
        return QcnnModel(self.n_qubits, self.n_classes,
                         {k: np.asarray(v, dtype=np.float64) for k, v in params.items()})

    def circuit(self) -> Circuit:
        ops: list = []
        su4 = _pauli_basis(2)
        crot = controlled_rotation_generators()
        for s, (_, conv, pool) in enumerate(self.stages):
            ops.extend(GateOp("conv", (s,), pair, su4) for pair in conv)
            ops.extend(GateOp("pool", (s,), pair, crot) for pair in pool)
        return Circuit(self.n_qubits, ops, self.active_qubits, self.n_classes)


def qcnn_state(model: QcnnModel, v: np.ndarray) -> np.ndarray:
    return run_circuit(model.circuit(), model.params, amplitude_embed(v, model.n_qubits))


def qcnn_forward(model: QcnnModel, v: Union[np.ndarray, AmplitudeSet]) -> np.ndarray:
    """Class probabilities from the marginal of the surviving qubits."""
    if isinstance(v, AmplitudeSet):
        v = v.vectors
    circuit = model.circuit()
    return readout_probs(circuit, run_circuit(circuit, model.params,
                                              amplitude_embed(v, model.n_qubits)))
