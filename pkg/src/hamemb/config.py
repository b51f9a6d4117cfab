"""Experiment configuration: a flat dataclass read from / written to YAML."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .ansatz import readout_qubits
from .errors import ConfigInvalid

MODEL_KINDS = ("hamemb", "qcnn")
DATASETS = ("digits", "mnist", "fashion", "idx")
LAYOUTS = ("A", "B", "full")


@dataclass
class ExperimentConfig:
    model: str = "hamemb"
    dataset: str = "digits"
    n_classes: int = 8
    n_qubits: Optional[int] = None
    n_layers: int = 10
    layout: Optional[str] = None
    iterations: int = 500
    batch_size: int = 128
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    eval_interval: int = 10
    train_size: Optional[int] = None
    test_size: Optional[int] = None
    eval_train_size: Optional[int] = None
    split_seed: int = 0
    init: str = "uniform"
    workers: int = 0
    chunk_size: int = 256
    gradcheck_instances: int = 50
    gradcheck_step: float = 1e-5
    digits_csv: Optional[str] = None
    idx_train_images: Optional[str] = None
    idx_train_labels: Optional[str] = None
    idx_test_images: Optional[str] = None
    idx_test_labels: Optional[str] = None
    data_dir: Optional[str] = None
    out_dir: str = "runs/latest"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.model not in MODEL_KINDS:
            raise ConfigInvalid(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.dataset not in DATASETS:
            raise ConfigInvalid(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.layout is not None and self.layout not in LAYOUTS:
            raise ConfigInvalid(f"layout must be one of {LAYOUTS}")
        if self.init not in ("uniform", "zeros"):
            raise ConfigInvalid(f"unknown init {self.init!r}")
        positive = ["n_classes", "n_layers", "batch_size", "eval_interval", "chunk_size",
                    "gradcheck_instances", "lr", "eps", "gradcheck_step"]
        for name in positive:
            val = getattr(self, name)
            if not isinstance(val, (int, float)) or isinstance(val, bool) or val <= 0:
                raise ConfigInvalid(f"{name} must be positive, got {val!r}")
        for name in ("iterations", "workers", "split_seed"):
            val = getattr(self, name)
            if not isinstance(val, int) or isinstance(val, bool) or val < 0:
                raise ConfigInvalid(f"{name} must be a non-negative integer, got {val!r}")
        for name in ("train_size", "test_size", "eval_train_size", "n_qubits"):
            val = getattr(self, name)
            if val is not None and (not isinstance(val, int) or val <= 0):
                raise ConfigInvalid(f"{name} must be a positive integer, got {val!r}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ConfigInvalid("beta1, beta2 must lie in [0, 1)")
        if self.n_classes < 2:
            raise ConfigInvalid("need at least two classes")
        if not isinstance(self.seeds, list) or not self.seeds or not all(
                isinstance(s, int) and not isinstance(s, bool) for s in self.seeds):
            raise ConfigInvalid("seeds must be a nonempty list of integers")
        if self.n_qubits is not None and readout_qubits(self.n_classes) > self.n_qubits:
            raise ConfigInvalid(f"{self.n_classes} classes do not fit {self.n_qubits} qubits")
        if self.dataset == "idx" and not all(
                (self.idx_train_images, self.idx_train_labels,
                 self.idx_test_images, self.idx_test_labels)):
            raise ConfigInvalid("dataset 'idx' needs all four idx_* paths")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigInvalid("config must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            preset = resources.files("hamemb") / "presets" / f"{path.name.removesuffix('.yaml')}.yaml"
            if not preset.is_file():
                raise FileNotFoundError(f"config {path} not found (and no preset of that name)")
            text = preset.read_text()
        else:
            text = path.read_text()
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigInvalid(f"{path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()
