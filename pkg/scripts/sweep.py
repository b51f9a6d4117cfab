"""Grid over config overrides for one preset; prints final averaged metrics.

    python3 scripts/sweep.py mnist-desk lr=0.01,0.03,0.1 n_layers=10,20
"""
from __future__ import annotations

import argparse
import itertools
import time

import yaml

from hamemb.config import ExperimentConfig
from hamemb.data import prepare_datasets
from hamemb.training import run_experiment


def parse_axis(axis: str):
    key, _, values = axis.partition("=")
    return key, [yaml.safe_load(v) for v in values.split(",")]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", help="preset name or YAML path")
    ap.add_argument("axes", nargs="*", help="key=v1,v2,...")
    ap.add_argument("--data-dir")
    args = ap.parse_args(argv)
    base = ExperimentConfig.load(args.config)
    if args.data_dir:
        base = base.replace(data_dir=args.data_dir)
    axes = [parse_axis(a) for a in args.axes]
    keys = [k for k, _ in axes]
    cache = {}
    for combo in itertools.product(*[v for _, v in axes]):
        cfg = base.replace(**dict(zip(keys, combo)))
        cfg.validate()
        data_key = (cfg.model, cfg.n_qubits, cfg.train_size, cfg.test_size, cfg.eval_train_size)
        if data_key not in cache:
            cache[data_key] = prepare_datasets(cfg)
        train, test, ev, n = cache[data_key]
        start = time.time()
        f = run_experiment(cfg, train, test, ev, n).final
        label = " ".join(f"{k}={v}" for k, v in zip(keys, combo)) or "(base)"
        print(f"{label:40s} train_acc={f.train_acc:.4f} test_acc={f.test_acc:.4f} "
              f"test_loss={f.test_loss:.4f} [{time.time() - start:.0f}s]", flush=True)


if __name__ == "__main__":
    main()
