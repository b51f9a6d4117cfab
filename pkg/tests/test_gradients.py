import numpy as np
import pytest
from sklearn.datasets import load_digits

from hamemb.ansatz import (QcnnModel, ReuploadModel, apply_op, bind_gates, readout_probs,
                           run_circuit)
from hamemb.embedding import EmbeddedImage, EmbeddedSet, amplitude_embed
from hamemb.errors import LabelOutOfRange
from hamemb.gradients import (finite_diff_grad, flatten, loss_and_grad, model_loss,
                              qcnn_loss_and_grad, relative_error)
from hamemb.linalg import frechet_expm
from hamemb.losses import head_loss_and_grad
from hamemb.qcore import apply_local

DIGITS = load_digits()


def digit(i):
    return EmbeddedImage.from_matrix(DIGITS.images[i] / 16, label=int(DIGITS.target[i]) % 8)


def test_zero_image_has_zero_t_gradient():
    img = EmbeddedImage.from_matrix(np.zeros((8, 8)), label=2)
    for init in ("zeros", "uniform"):
        m = ReuploadModel.create(3, 3, 8, init=init, rng=1)
        rec = loss_and_grad(m, img)
        np.testing.assert_array_equal(rec.d_t, 0)
        assert rec.d_layer_params.shape == m.params["omega"].shape


def test_record_shapes_mirror_params():
    m = ReuploadModel.create(5, 4, 8, rng=0)
    rec = loss_and_grad(m, EmbeddedImage.from_matrix(np.random.default_rng(0).random((32, 32)), 1))
    for k, v in m.params.items():
        assert rec.grads[k].shape == v.shape


def test_label_out_of_range():
    m = ReuploadModel.create(3, 1, 8, rng=0)
    with pytest.raises(LabelOutOfRange):
        loss_and_grad(m, digit(0), label=8)


def test_reupload_gradient_matches_fd_on_digit():
    rng = np.random.default_rng(0)
    m = ReuploadModel.create(3, 2, 8, rng=rng)
    img = digit(11)
    a, f = loss_and_grad(m, img), finite_diff_grad(m, img, step=1e-5)
    assert a.loss == pytest.approx(f.loss, abs=1e-15)
    assert relative_error(a.flat(), f.flat()) <= 1e-6


def test_fd_symmetric_in_step_sign():
    m = ReuploadModel.create(3, 2, 8, rng=3)
    img = digit(4)
    np.testing.assert_array_equal(finite_diff_grad(m, img, step=1e-4).flat(),
                                  finite_diff_grad(m, img, step=-1e-4).flat())


def test_fd_converges_to_analytic():
    m = ReuploadModel.create(3, 2, 8, rng=5)
    img = digit(9)
    exact = loss_and_grad(m, img).flat()
    err = [np.max(np.abs(finite_diff_grad(m, img, step=h).flat() - exact)) for h in (1e-3, 1e-4)]
    assert err[1] < err[0] / 50  # second order: 100x per decade


def test_many_random_instances_both_models():
    rng = np.random.default_rng(42)
    worst = 0.0
    for i in range(50):
        m = ReuploadModel.create(3, 2, 8, "AB"[i % 2], rng=rng)
        img = digit(int(rng.integers(len(DIGITS.images))))
        worst = max(worst, relative_error(loss_and_grad(m, img).flat(),
                                          finite_diff_grad(m, img).flat()))
    for i in range(50):
        q = QcnnModel.create(6, 8, rng=rng)
        v = DIGITS.images[int(rng.integers(len(DIGITS.images)))].ravel() / 16
        label = int(rng.integers(8))
        worst = max(worst, relative_error(qcnn_loss_and_grad(q, v, label).flat(),
                                          finite_diff_grad(q, v, label).flat()))
    assert worst <= 1e-6


def test_qcnn_zero_params_conv_gradient():
    q = QcnnModel.create(6, 8, init="zeros")
    v = DIGITS.images[3].ravel() / 16
    a, f = qcnn_loss_and_grad(q, v, 3), finite_diff_grad(q, v, 3)
    assert relative_error(a.grads["conv"], f.grads["conv"]) <= 1e-6


def test_qcnn_mnist_scale_gradient():
    rng = np.random.default_rng(7)
    q = QcnnModel.create(10, 8, rng=rng)
    v = rng.random(784)
    assert relative_error(qcnn_loss_and_grad(q, v, 5).flat(),
                          finite_diff_grad(q, v, 5).flat()) <= 1e-6


def test_discarded_qubit_relabeling_leaves_probs():
    rng = np.random.default_rng(8)
    q = QcnnModel.create(6, 8, rng=rng)
    circuit = q.circuit()
    psi = run_circuit(circuit, q.params, amplitude_embed(rng.random(64), 6))
    flip = np.array([[0, 1], [1, 0]], dtype=complex)
    relabeled = psi
    for d in set(range(6)) - set(q.active_qubits):
        relabeled = apply_local(flip, (d,), relabeled)
    p, p2 = readout_probs(circuit, psi), readout_probs(circuit, relabeled)
    np.testing.assert_allclose(p, p2, atol=1e-14)
    np.testing.assert_allclose(head_loss_and_grad(p[None], [1])[0],
                               head_loss_and_grad(p2[None], [1])[0], atol=1e-14)


def test_t_gradient_via_frechet_path():
    """d/dt_i via the commuting-generator shortcut vs a Frechet derivative of W."""
    rng = np.random.default_rng(10)
    m = ReuploadModel.create(3, 3, 8, rng=rng)
    img = digit(21)
    analytic = loss_and_grad(m, img).d_t
    ops = m.circuit().ops
    for layer in range(3):
        # d/dt exp(-i t H / 2) = (1/t) * Frechet of exp(i c H) at c=-t/2 along H
        t = m.params["t"][layer]
        dw = frechet_expm(img.eig, img.hamiltonian, -t / 2) / t
        # propagate by hand: states before/after the embedding op of this layer
        bound = bind_gates(m.circuit(), m.params)
        spectra = (img.eig.eigenvalues[None], img.eig.eigenvectors[None])
        psi = m.initial_state(1)
        idx = ops.index(next(o for o in ops if getattr(o, "layer", None) == layer))
        for op in ops[:idx]:
            psi = apply_op(op, psi, m.params, bound, spectra)
        dpsi = psi @ dw.T
        for op in ops[idx + 1:]:
            dpsi = apply_op(op, dpsi, m.params, bound, spectra)
        final = m.initial_state(1)
        for op in ops:
            final = apply_op(op, final, m.params, bound, spectra)
        probs = readout_probs(m.circuit(), final)
        _, g = head_loss_and_grad(probs, [img.label])
        dp = 2 * np.real(np.conj(final) * dpsi).reshape(1, 8, 1).sum(-1)
        assert abs((g @ dp.T).item() - analytic[layer]) <= 1e-9


def test_loss_nonnegative_and_batch_mean():
    rng = np.random.default_rng(11)
    m = ReuploadModel.create(3, 2, 8, rng=rng)
    imgs = [digit(i) for i in range(6)]
    losses = [loss_and_grad(m, im).loss for im in imgs]
    assert min(losses) >= 0
    batch = EmbeddedSet.stack(imgs)
    assert model_loss(m, batch) == pytest.approx(np.mean(losses), abs=1e-14)


def test_batch_gradient_is_mean_of_singles():
    from hamemb.gradients import batch_loss_and_grad
    rng = np.random.default_rng(12)
    m = ReuploadModel.create(3, 2, 8, rng=rng)
    imgs = [digit(i) for i in range(5)]
    mean = np.mean([loss_and_grad(m, im).flat() for im in imgs], axis=0)
    np.testing.assert_allclose(batch_loss_and_grad(m, EmbeddedSet.stack(imgs)).flat(), mean,
                               atol=1e-13)
    assert flatten(m.params).size == mean.size
