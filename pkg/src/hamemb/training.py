"""Adam, mini-batch training, evaluation and seed-averaged experiments."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ansatz import QcnnModel, ReuploadModel, readout_probs, run_circuit
from .config import ExperimentConfig
from .errors import ConfigInvalid, EmptyDataset, ShapeMismatch
from .gradients import circuit_loss_and_grad, model_inputs
from .losses import cross_entropy, head_loss_and_grad, softmax  # noqa: F401  (re-exported)

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: dict, **hyper) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, 0, **hyper)


def adam_step(state: AdamState, params: dict, grads: dict) -> tuple[dict, AdamState]:
    """One bias-corrected Adam update; returns new params and a new state."""
    if set(params) != set(grads) or any(np.shape(params[k]) != np.shape(grads[k]) for k in params):
        raise ShapeMismatch("parameter and gradient shapes differ")
    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_params, m, v = {}, {}, {}
    for k in params:
        g = np.asarray(grads[k], dtype=np.float64)
        m[k] = b1 * state.m[k] + (1 - b1) * g
        v[k] = b2 * state.v[k] + (1 - b2) * g * g
        m_hat = m[k] / (1 - b1 ** step)
        v_hat = v[k] / (1 - b2 ** step)
        new_params[k] = params[k] - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, AdamState(m, v, step, state.lr, b1, b2, state.eps)


@dataclass
class MetricsRecord:
    iteration: int
    seed: object
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float


def _chunks(n: int, size: int):
    return [np.arange(s, min(s + size, n)) for s in range(0, n, size)]


def _map(fn, items, workers: int):
    # ordered results regardless of worker count
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def predict_probs(model, data, chunk_size: int = 256, workers: int = 1) -> np.ndarray:
    circuit = model.circuit()

    def one(idx):
        psi0, spectra, _ = model_inputs(model, data[idx])
        return readout_probs(circuit, run_circuit(circuit, model.params, psi0, spectra))

    return np.concatenate(_map(one, _chunks(len(data), chunk_size), workers))


def evaluate(model, data, chunk_size: int = 256, workers: int = 1) -> tuple[float, float]:
    """Mean cross-entropy and argmax accuracy (ties go to the lowest class)."""
    if len(data) == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    probs = predict_probs(model, data, chunk_size, workers)
    loss = cross_entropy(softmax(probs), data.labels)
    acc = np.mean(np.argmax(probs, axis=-1) == data.labels)
    return float(np.mean(loss)), float(acc)


def batch_gradient(model, data, idx: np.ndarray, chunk_size: int, workers: int):
    """Mean loss and gradient over ``data[idx]``, reduced in fixed chunk order."""
    circuit = model.circuit()
    n = len(idx)

    def one(chunk):
        psi0, spectra, labels = model_inputs(model, data[idx[chunk]])
        loss, grads, _ = circuit_loss_and_grad(circuit, model.params, psi0, spectra, labels)
        w = len(chunk) / n
        return loss * w, {k: g * w for k, g in grads.items()}

    parts = _map(one, _chunks(n, chunk_size), workers)
    loss = sum(p[0] for p in parts)
    grads = {k: sum(p[1][k] for p in parts) for k in model.params}
    return loss, grads


class BatchSampler:
    """Seeded reshuffle-and-cycle over the training indices.

    Datasets smaller than two batches are used whole at every step.
    """

    def __init__(self, n: int, batch_size: int, seed):
        self.n, self.batch_size = n, batch_size
        self.full = n < 2 * batch_size
        self.rng = np.random.default_rng(seed)
        self.order = self.rng.permutation(n)
        self.pos = 0

    def next(self) -> np.ndarray:
        if self.full:
            return np.arange(self.n)
        if self.pos + self.batch_size > self.n:
            self.order = self.rng.permutation(self.n)
            self.pos = 0
        idx = self.order[self.pos:self.pos + self.batch_size]
        self.pos += self.batch_size
        return np.sort(idx)


def build_model(cfg: ExperimentConfig, n_qubits: int, seed):
    if cfg.model == "hamemb":
        return ReuploadModel.create(n_qubits, cfg.n_layers, cfg.n_classes, cfg.layout,
                                    rng=seed, init=cfg.init)
    return QcnnModel.create(n_qubits, cfg.n_classes, rng=seed, init=cfg.init)


def _workers(cfg: ExperimentConfig) -> int:
    return cfg.workers or os.cpu_count() or 1


def train(model, train_set, test_set, cfg: ExperimentConfig, seed=0,
          eval_train_set=None):
    """Run ``cfg.iterations`` Adam steps; returns ``(records, trained_model)``.

    Metrics are recorded at iteration 0, every ``eval_interval`` iterations
    and at the final iteration.
    """
    if len(train_set) == 0:
        raise EmptyDataset("training set is empty")
    if cfg.iterations < 0:
        raise ConfigInvalid("iterations must be non-negative")
    workers = _workers(cfg)
    eval_train_set = train_set if eval_train_set is None else eval_train_set
    sampler = BatchSampler(len(train_set), cfg.batch_size, [int(seed), 0x5A])
    adam = AdamState.zeros_like(model.params, lr=cfg.lr, beta1=cfg.beta1,
                                beta2=cfg.beta2, eps=cfg.eps)

    def record(it):
        tr = evaluate(model, eval_train_set, cfg.chunk_size, workers)
        te = evaluate(model, test_set, cfg.chunk_size, workers) if len(test_set) else (np.nan, np.nan)
        rec = MetricsRecord(it, seed, tr[0], tr[1], te[0], te[1])
        log.info("seed %s it %d train %.4f/%.4f test %.4f/%.4f", seed, it, *tr, *te)
        return rec

    records = [record(0)]
    for it in range(1, cfg.iterations + 1):
        _, grads = batch_gradient(model, train_set, sampler.next(), cfg.chunk_size, workers)
        params, adam = adam_step(adam, model.params, grads)
        model = model.with_params(params)
        if it % cfg.eval_interval == 0 or it == cfg.iterations:
            records.append(record(it))
    return records, model


@dataclass
class ExperimentResult:
    per_seed: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    average: list = field(default_factory=list)

    def rows(self) -> list[MetricsRecord]:
        out = []
        for i, avg in enumerate(self.average):
            out.extend(recs[i] for recs in self.per_seed.values())
            out.append(avg)
        return out

    @property
    def final(self) -> MetricsRecord:
        return self.average[-1]


def average_records(runs: list[list[MetricsRecord]]) -> list[MetricsRecord]:
    out = []
    for recs in zip(*runs):
        vals = np.array([[r.train_loss, r.train_acc, r.test_loss, r.test_acc] for r in recs])
        out.append(MetricsRecord(recs[0].iteration, "avg", *map(float, vals.mean(axis=0))))
    return out


def run_experiment(cfg: ExperimentConfig, train_set, test_set, eval_train_set=None,
                   n_qubits: int | None = None) -> ExperimentResult:
    """Train one model per seed and average the metric curves pointwise."""
    if not cfg.seeds:
        raise ConfigInvalid("seed list is empty")
    n_qubits = n_qubits or cfg.n_qubits or train_set.n_qubits
    result = ExperimentResult()
    runs = []
    for seed in cfg.seeds:
        model = build_model(cfg, n_qubits, seed)
        records, model = train(model, train_set, test_set, cfg, seed, eval_train_set)
        runs.append(records)
        # duplicated seeds are identical runs; keep the first
        result.per_seed.setdefault(seed, records)
        result.params.setdefault(seed, model.params)
    result.average = average_records(runs)
    return result
