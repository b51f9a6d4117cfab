"""Command-line experiment runner: ``hamemb {train,evaluate,gradcheck}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .data import DATA_DIR_ENV, default_data_dir, prepare_datasets
from .errors import HamEmbError, ShapeMismatch
from .gradients import batch_loss_and_grad, finite_diff_grad, relative_error
from .training import build_model, evaluate, run_experiment

log = logging.getLogger("hamemb")

CSV_HEADER = ["iteration", "seed", "train_loss", "train_acc", "test_loss", "test_acc"]
GRADCHECK_LIMIT = 1e-5


def atomic_write(path: Path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def metrics_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.iteration, r.seed, repr(r.train_loss), repr(r.train_acc),
                    repr(r.test_loss), repr(r.test_acc)])
    return buf.getvalue()


def save_params(path: Path, model, cfg: ExperimentConfig) -> None:
    buf = io.BytesIO()
    meta = {"model": cfg.model, "n_qubits": model.n_qubits, "n_classes": model.n_classes}
    np.savez(buf, __meta__=json.dumps(meta), **model.params)
    atomic_write(path, buf.getvalue())


def load_params(path, model) -> dict:
    with np.load(path) as f:
        params = {k: f[k] for k in f.files if k != "__meta__"}
    shapes = model.param_shapes()
    if set(params) != set(shapes) or any(params[k].shape != tuple(shapes[k]) for k in shapes):
        got = {k: v.shape for k, v in params.items()}
        raise ShapeMismatch(f"snapshot shapes {got} do not match config {shapes}")
    return params


def resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    changes = {}
    if args.seed_override is not None:
        changes["seeds"] = [int(s) for s in args.seed_override.split(",")]
    if args.data_dir is not None:
        changes["data_dir"] = args.data_dir
    elif cfg.data_dir is None and os.environ.get(DATA_DIR_ENV):
        changes["data_dir"] = os.environ[DATA_DIR_ENV]
    if args.out_dir is not None:
        changes["out_dir"] = args.out_dir
    return cfg.replace(**changes) if changes else cfg


def _check_data_dir(cfg: ExperimentConfig) -> None:
    if cfg.data_dir is None and cfg.dataset not in ("mnist", "fashion"):
        return
    root = Path(cfg.data_dir) if cfg.data_dir else default_data_dir()
    if not root.is_dir():
        raise FileNotFoundError(
            f"data directory {root} does not exist; pass --data-dir or set {DATA_DIR_ENV}")


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    _check_data_dir(cfg)
    out = Path(cfg.out_dir)
    started = time.time()
    train_set, test_set, eval_train, n_qubits = prepare_datasets(cfg)
    result = run_experiment(cfg, train_set, test_set, eval_train, n_qubits)

    atomic_write(out / "metrics.csv", metrics_csv(result.rows()))
    atomic_write(out / "metrics_avg.csv", metrics_csv(result.average))
    for seed, params in result.params.items():
        save_params(out / f"params_seed{seed}.npz",
                    build_model(cfg, n_qubits, seed).with_params(params), cfg)
    atomic_write(out / "config.yaml", _yaml(cfg))
    manifest = {"config_sha256": cfg.digest(), "seeds": cfg.seeds, "n_qubits": n_qubits,
                "n_train": len(train_set), "n_test": len(test_set),
                "wall_clock_seconds": round(time.time() - started, 3)}
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")

    f = result.final
    print(f"iteration {f.iteration} (avg over {len(cfg.seeds)} seeds): "
          f"train_loss={f.train_loss:.4f} train_acc={f.train_acc:.4f} "
          f"test_loss={f.test_loss:.4f} test_acc={f.test_acc:.4f}")
    print(f"wrote {out}")
    return 0


def _yaml(cfg: ExperimentConfig) -> str:
    import yaml
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


def cmd_evaluate(args) -> int:
    cfg = resolve_config(args)
    _check_data_dir(cfg)
    if not Path(args.params).exists():
        raise FileNotFoundError(f"parameter snapshot {args.params} not found")
    train_set, test_set, eval_train, n_qubits = prepare_datasets(cfg)
    model = build_model(cfg, n_qubits, 0)
    model = model.with_params(load_params(args.params, model))
    data = eval_train if args.split == "train" else test_set
    loss, acc = evaluate(model, data, cfg.chunk_size, cfg.workers or os.cpu_count() or 1)
    print(f"split={args.split} n={len(data)} loss={loss!r} acc={acc!r}")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = resolve_config(args)
    _check_data_dir(cfg)
    train_set, _, _, n_qubits = prepare_datasets(cfg)
    rng = np.random.default_rng(cfg.seeds[0])
    worst = 0.0
    for i in range(cfg.gradcheck_instances):
        model = build_model(cfg, n_qubits, int(rng.integers(2**31)))
        sample = train_set[np.array([rng.integers(len(train_set))])]
        analytic = batch_loss_and_grad(model, sample)
        numeric = finite_diff_grad(model, sample, step=cfg.gradcheck_step)
        err = relative_error(analytic.flat(), numeric.flat())
        worst = max(worst, err)
        log.info("instance %d: relative error %.3e", i, err)
    ok = worst <= GRADCHECK_LIMIT
    print(f"gradcheck model={cfg.model} instances={cfg.gradcheck_instances} "
          f"params={analytic.flat().size} max_relative_error={worst:.3e} "
          f"{'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hamemb", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="YAML config file, or the name of a bundled preset")
        p.add_argument("--seed-override", help="comma-separated seeds replacing the config's")
        p.add_argument("--data-dir", help=f"dataset root (default: ${DATA_DIR_ENV})")
        p.add_argument("--out-dir", help="output directory for train")

    p = sub.add_parser("train", help="train one model per seed and write metrics")
    common(p)
    p.set_defaults(func=cmd_train)
    p = sub.add_parser("evaluate", help="evaluate a parameter snapshot")
    common(p)
    p.add_argument("--params", required=True, help="params_seed*.npz written by train")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.set_defaults(func=cmd_evaluate)
    p = sub.add_parser("gradcheck", help="adjoint vs finite-difference gradients")
    common(p)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (HamEmbError, FileNotFoundError, OSError) as exc:
        print(f"hamemb: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
