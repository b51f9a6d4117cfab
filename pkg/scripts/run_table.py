"""Train a list of presets through the CLI and tabulate final averaged metrics.

    python3 scripts/run_table.py                       # digits pair
    python3 scripts/run_table.py mnist-desk mnist-desk-qcnn --data-dir ~/data
"""
from __future__ import annotations

import argparse
import csv
import json
from pathlib import Path

from hamemb.cli import main as cli_main

DEFAULT = ["digits", "digits-qcnn"]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("presets", nargs="*", default=DEFAULT)
    ap.add_argument("--data-dir")
    ap.add_argument("--out-root", default="runs")
    args = ap.parse_args(argv)
    rows = []
    for preset in args.presets:
        out = Path(args.out_root) / preset
        cmd = ["train", "--config", preset, "--out-dir", str(out)]
        if args.data_dir:
            cmd += ["--data-dir", args.data_dir]
        if cli_main(cmd) != 0:
            rows.append((preset, "failed", "", "", "", ""))
            continue
        with open(out / "metrics_avg.csv") as f:
            last = list(csv.DictReader(f))[-1]
        secs = json.loads((out / "manifest.json").read_text())["wall_clock_seconds"]
        rows.append((preset, f"{float(last['train_loss']):.4f}", f"{float(last['train_acc']):.4f}",
                     f"{float(last['test_loss']):.4f}", f"{float(last['test_acc']):.4f}",
                     f"{secs:.0f}"))
    head = ("preset", "train_loss", "train_acc", "test_loss", "test_acc", "seconds")
    widths = [max(len(str(r[i])) for r in rows + [head]) for i in range(len(head))]
    for r in [head] + rows:
        print("  ".join(str(c).ljust(w) for c, w in zip(r, widths)))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
