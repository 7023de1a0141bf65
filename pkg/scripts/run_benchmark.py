#!/usr/bin/env python3
"""Run the frozen three-method open-set benchmark through the CLI.

Generates the synthetic datasets (K = 6 known classes, 4 diffuse unknown
clusters at offset 7) for seeds 0-4, fits and evaluates SoftMax, OpenMax,
and MetaMax with the benchmark settings, and prints a mean +/- std table.

Usage: python scripts/run_benchmark.py [workdir]
Defaults to a temporary directory that is removed on exit.
"""

import json
import sys
import tempfile
from pathlib import Path

from openset.cli import main as cli

SEEDS = [0, 1, 2, 3, 4]
METHODS = {
    "softmax": ["--threshold", "0.1"],
    "openmax": ["--eta", "50", "--alpha", "2"],
    "metamax": ["--q", "20"],
}


def run(workdir: Path) -> int:
    for seed in SEEDS:
        code = cli([
            "synth", "--classes", "6", "--samples-per-class", "500",
            "--unknown-count", "800", "--unknown-offset", "7.0",
            "--seed", str(seed), "--out", str(workdir / f"seed_{seed}"),
        ])
        if code != 0:
            return code

    print(f"{'method':<10} {'AUROC(unknown)':>20} {'macro-F1':>20}")
    for method, flags in METHODS.items():
        out = workdir / f"eval_{method}"
        code = cli([
            "eval",
            "--train", str(workdir / "seed_{seed}" / "train.osav"),
            "--test", str(workdir / "seed_{seed}" / "test.osav"),
            "--method", method,
            "--seeds", *[str(s) for s in SEEDS],
            "--out", str(out),
            *flags,
        ])
        if code != 0:
            return code
        metrics = json.loads((out / "metrics.json").read_text())
        auroc = f"{metrics['mean_auroc_unknown']:.4f} +/- {metrics['std_auroc_unknown']:.4f}"
        f1 = f"{metrics['mean_macro_f1']:.4f} +/- {metrics['std_macro_f1']:.4f}"
        print(f"{method:<10} {auroc:>20} {f1:>20}")
    return 0


def main() -> int:
    if len(sys.argv) > 1:
        workdir = Path(sys.argv[1])
        workdir.mkdir(parents=True, exist_ok=True)
        return run(workdir)
    with tempfile.TemporaryDirectory(prefix="openset-bench-") as tmp:
        return run(Path(tmp))


if __name__ == "__main__":
    sys.exit(main())
