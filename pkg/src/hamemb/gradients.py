"""Adjoint-mode gradients of the classification loss, plus a finite-difference oracle.

One forward sweep caches the intermediate states. The loss gradient with
respect to the readout probabilities defines a diagonal observable
``O = sum_i g_i (P_i (x) I)``; ``mu = O psi_final`` is then carried backwards
through the inverse gates. For a gate ``U`` with input ``phi`` and adjoint
``mu`` the parameter derivative is ``2 Re <mu| dU |phi>``:

* embedding:   ``dW/dt = (-i H_M / 2) W``, evaluated in the image eigenbasis;
* local gates: ``sum_b <mu_b|dU (x) I|phi_b> = tr(dU R)`` with the small
  cross matrix ``R``, contracted against the Daleckii-Krein kernel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ansatz import (Circuit, EmbedOp, QcnnModel, ReuploadModel, apply_op, embed_apply,
                     readout_probs, run_circuit)
from .embedding import AmplitudeSet, EmbeddedImage, EmbeddedSet, amplitude_embed
from .linalg import dagger, divided_difference_kernel
from .losses import head_loss_and_grad
from .qcore import local_cross_matrix, readout_index


@dataclass
class GradientRecord:
    loss: float
    grads: dict

    @property
    def d_t(self) -> np.ndarray:
        return self.grads["t"]

    @property
    def d_layer_params(self) -> np.ndarray:
        return self.grads["omega"]

    def flat(self) -> np.ndarray:
        return flatten(self.grads)


def flatten(params: dict) -> np.ndarray:
    return np.concatenate([np.ravel(params[k]) for k in sorted(params)])


def unflatten(vec: np.ndarray, like: dict) -> dict:
    out, pos = {}, 0
    for k in sorted(like):
        size = np.size(like[k])
        out[k] = np.reshape(vec[pos:pos + size], np.shape(like[k])).copy()
        pos += size
    return out


def model_inputs(model, data):
    """Initial batch of states, image spectra (or ``None``) and labels for ``data``.

    ``data`` may be an ``EmbeddedImage``/``EmbeddedSet`` for the reupload model,
    or a vector/``(B, d)`` array/``AmplitudeSet`` for the QCNN.
    """
    if isinstance(model, ReuploadModel):
        if isinstance(data, EmbeddedImage):
            spectra = (data.eig.eigenvalues[None], data.eig.eigenvectors[None])
            labels = np.array([data.label])
        else:
            spectra = (data.eigenvalues, data.eigenvectors)
            labels = data.labels
        return model.initial_state(len(labels)), spectra, labels
    if isinstance(data, AmplitudeSet):
        vectors, labels = data.vectors, data.labels
    else:
        vectors, labels = np.atleast_2d(data), None
    return amplitude_embed(vectors, model.n_qubits), None, labels


def circuit_loss_and_grad(circuit: Circuit, params: dict, psi0: np.ndarray, spectra,
                          labels) -> tuple[float, dict, np.ndarray]:
    """Mean loss over the batch, its exact gradient, and the readout probabilities."""
    n = circuit.n_qubits
    batch = psi0.shape[0]
    psi, states, bound = run_circuit(circuit, params, psi0, spectra, keep_states=True)
    probs = readout_probs(circuit, psi)
    loss, g = head_loss_and_grad(probs, labels)
    g = g / batch

    k = len(circuit.readout)
    g_full = np.zeros((batch, 1 << k))
    g_full[:, :circuit.n_classes] = g
    mu = g_full[:, readout_index(n, circuit.readout)] * psi

    grads = {key: np.zeros_like(val) for key, val in params.items()}
    for op, phi in zip(reversed(circuit.ops), reversed(states[:-1])):
        if isinstance(op, EmbedOp):
            eigvals, eigvecs = spectra
            dphi = embed_apply(phi, eigvals, eigvecs, params[op.key][op.layer], derivative=True)
            grads[op.key][op.layer] += 2.0 * np.real(np.vdot(mu, dphi))
        else:
            gate = bound[op.key, op.row]
            v = gate.eig.eigenvectors
            r = dagger(v) @ local_cross_matrix(mu, phi, op.targets, n) @ v
            kernel = divided_difference_kernel(gate.eig.eigenvalues, 1.0)
            gen = dagger(v) @ op.generators @ v
            grads[op.key][op.row] += 2.0 * np.real(
                1j * np.einsum("jab,ab,ba->j", gen, kernel, r))
        mu = apply_op(op, mu, params, bound, spectra, adjoint=True)
    return float(np.mean(loss)), grads, probs


def batch_loss_and_grad(model, data) -> GradientRecord:
    psi0, spectra, labels = model_inputs(model, data)
    loss, grads, _ = circuit_loss_and_grad(model.circuit(), model.params, psi0, spectra, labels)
    return GradientRecord(loss, grads)


def loss_and_grad(model: ReuploadModel, img: EmbeddedImage, label: int | None = None) -> GradientRecord:
    if label is not None:
        img = EmbeddedImage(img.hamiltonian, img.eig, int(label))
    return batch_loss_and_grad(model, img)


def qcnn_loss_and_grad(model: QcnnModel, v: np.ndarray, label: int) -> GradientRecord:
    return batch_loss_and_grad(model, AmplitudeSet(np.atleast_2d(v), np.array([label])))


def model_loss(model, data) -> float:
    psi0, spectra, labels = model_inputs(model, data)
    circuit = model.circuit()
    probs = readout_probs(circuit, run_circuit(circuit, model.params, psi0, spectra))
    loss, _ = head_loss_and_grad(probs, labels)
    return float(np.mean(loss))


def finite_diff_grad(model, data, label: int | None = None, step: float = 1e-5) -> GradientRecord:
    """Central differences of the same mean loss, one parameter entry at a time."""
    if label is not None:
        if isinstance(model, ReuploadModel):
            data = EmbeddedImage(data.hamiltonian, data.eig, int(label))
        else:
            data = AmplitudeSet(np.atleast_2d(data), np.array([label]))
    h = abs(step)
    base = flatten(model.params)
    grad = np.zeros_like(base)
    for j in range(base.size):
        plus, minus = base.copy(), base.copy()
        plus[j] += h
        minus[j] -= h
        lp = model_loss(model.with_params(unflatten(plus, model.params)), data)
        lm = model_loss(model.with_params(unflatten(minus, model.params)), data)
        grad[j] = (lp - lm) / (2 * h)
    return GradientRecord(model_loss(model, data), unflatten(grad, model.params))


def relative_error(analytic: np.ndarray, reference: np.ndarray, floor: float = 1e-3) -> float:
    """``max |a - f| / max(|f|, floor)``.

    With ``floor = 1e-3`` a bound of ``1e-6`` is the same as requiring
    ``|a - f| <= max(1e-6 |f|, 1e-9)``.
    """
    analytic, reference = np.ravel(analytic), np.ravel(reference)
    return float(np.max(np.abs(analytic - reference) / np.maximum(np.abs(reference), floor)))
