"""Experiment driver.

Subcommands: synth, split, fit, eval, sweep-q, scatter. Configuration comes
from an optional JSON file plus command-line flags; precedence is
flag > file > default. Every command is deterministic for fixed seeds (the
``created_at`` stamp in JSON outputs is the only exception). Exit codes:
1 I/O or file-format failure, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import calibrators as cal
from . import evaluation
from .data import (
    ActivationSet,
    OpenSplit,
    SyntheticSpec,
    apply_split,
    generate_synthetic,
    make_open_split,
    read_activations,
    write_activations,
)
from .errors import OpensetError, ValidationError

METHODS = ("softmax", "openmax", "metamax")


@dataclass
class ExperimentConfig:
    """Resolved settings for fit/eval/sweep/scatter runs.

    ``train_path``/``test_path`` may contain a ``{seed}`` placeholder so a
    multi-seed run can address per-seed data files.
    """

    train_path: str | None = None
    test_path: str | None = None
    num_total_classes: int | None = None
    num_known: int | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    method: str = "metamax"
    q: int = 20
    beta: int | None = None
    alpha: int | None = None
    eta: int = 50
    threshold: float = 0.1
    distance_kind: str = "euclidean"
    apply_translation: bool = True
    output_dir: str = "out"

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        if self.distance_kind not in cal.DISTANCE_KINDS:
            raise ValidationError(f"unknown distance kind {self.distance_kind!r}")
        if self.q < 2:
            raise ValidationError("q must be at least 2")
        if self.eta < 2:
            raise ValidationError("eta must be at least 2")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValidationError("threshold must lie in [0, 1]")
        if not self.seeds:
            raise ValidationError("need at least one seed")


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise OpensetError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc
        known = set(asdict(cfg))
        bad = set(raw) - known
        if bad:
            raise ValidationError(f"unknown config keys: {sorted(bad)}")
        cfg = replace(cfg, **raw)
    overrides = {}
    for key in (
        "train_path", "test_path", "num_total_classes", "num_known", "method",
        "q", "beta", "alpha", "eta", "threshold", "distance_kind", "output_dir",
    ):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "seed", None) is not None:
        overrides["seeds"] = [args.seed]
    elif getattr(args, "seeds", None):
        overrides["seeds"] = args.seeds
    if getattr(args, "no_translation", False):
        overrides["apply_translation"] = False
    if overrides:
        cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _load_set(path_template: str, seed: int) -> ActivationSet:
    path = path_template.format(seed=seed)
    try:
        return read_activations(path)
    except FileNotFoundError as exc:
        raise OpensetError(f"activation file not found: {path}") from exc


def _maybe_split(aset: ActivationSet, cfg: ExperimentConfig, seed: int) -> tuple[ActivationSet, OpenSplit | None]:
    if cfg.num_total_classes is None:
        return aset, None
    if cfg.num_known is None:
        raise ValidationError("num_known is required when num_total_classes is set")
    split = make_open_split(cfg.num_total_classes, cfg.num_known, seed)
    return apply_split(aset, split), split


def _build_calibrator(cfg: ExperimentConfig, train: ActivationSet):
    if cfg.method == "metamax":
        return cal.build_metamax_models(
            train, cfg.q, beta=cfg.beta, apply_translation=cfg.apply_translation
        )
    if cfg.method == "openmax":
        return cal.build_openmax_models(
            train, cfg.eta, distance_kind=cfg.distance_kind, alpha=cfg.alpha
        )
    return {"kind": "softmax", "threshold": cfg.threshold}


def _calibrator_to_dict(calibrator) -> dict:
    return calibrator if isinstance(calibrator, dict) else calibrator.to_dict()


def _calibrator_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "metamax":
        return cal.MetaMaxCalibrator.from_dict(d)
    if kind == "openmax":
        return cal.OpenMaxCalibrator.from_dict(d)
    if kind == "softmax":
        return {"kind": "softmax", "threshold": float(d["threshold"])}
    raise ValidationError(f"unknown calibrator kind {kind!r}")


def _calibrator_classes(calibrator, fallback: int | None = None) -> int | None:
    if isinstance(calibrator, dict):
        return fallback
    return calibrator.num_classes


def _score_set(calibrator, test: ActivationSet):
    """Calibrate every test row; returns (outputs, unknown_scores)."""
    outputs = []
    if isinstance(calibrator, dict):  # softmax baseline
        threshold = calibrator["threshold"]
        for row in test.activations:
            outputs.append(cal.softmax_predict(row, threshold))
        # Unknown probability is identically zero for softmax; the standard
        # max-softmax-probability score keeps its ROC non-degenerate.
        unknown_scores = np.array([1.0 - o.probabilities[:-1].max() for o in outputs])
    else:
        predict = (
            cal.metamax_predict
            if isinstance(calibrator, cal.MetaMaxCalibrator)
            else cal.openmax_predict
        )
        for row in test.activations:
            outputs.append(predict(calibrator, row))
        unknown_scores = np.array([o.probabilities[-1] for o in outputs])
    return outputs, unknown_scores


def _report_to_dict(report: evaluation.EvaluationReport) -> dict:
    return {
        "auroc_unknown": report.auroc_unknown,
        "macro_f1": report.macro_f1,
        "per_class_f1": report.per_class_f1.tolist(),
        "n_known": report.n_known,
        "n_unknown": report.n_unknown,
        "undefined_f1_classes": list(report.undefined_f1_classes),
    }


def _export_report(out_dir: Path, report: evaluation.EvaluationReport) -> None:
    for key, curve in report.roc_curves.items():
        if curve is None:
            continue
        name = "roc_unknown.csv" if key == evaluation.UNKNOWN else f"roc_class_{key}.csv"
        _write_csv(
            out_dir / name,
            ["threshold", "fpr", "tpr"],
            zip(curve.thresholds, curve.fpr, curve.tpr),
        )
    _write_csv(
        out_dir / "confusion.csv",
        [f"pred_{c}" for c in range(report.confusion.shape[1])],
        report.confusion.tolist(),
    )


def _run_one_seed(cfg: ExperimentConfig, seed: int, calibrator=None):
    """Fit (unless given) and evaluate for one seed; returns (report, calibrator)."""
    if calibrator is None:
        if cfg.train_path is None:
            raise ValidationError("train_path is required when no calibrator is given")
        train, _ = _maybe_split(_load_set(cfg.train_path, seed), cfg, seed)
        calibrator = _build_calibrator(cfg, train)
    if cfg.test_path is None:
        raise ValidationError("test_path is required")
    test, _ = _maybe_split(_load_set(cfg.test_path, seed), cfg, seed)
    expected_k = _calibrator_classes(calibrator)
    if expected_k is not None and expected_k != test.num_classes:
        raise ValidationError(
            f"calibrator has {expected_k} classes but test data has {test.num_classes}"
        )
    outputs, unknown_scores = _score_set(calibrator, test)
    report = evaluation.evaluate(outputs, test.labels, unknown_scores)
    return report, calibrator


def _evaluate_seeds(cfg: ExperimentConfig, out_dir: Path, calibrator=None) -> dict:
    per_seed = []
    for seed in cfg.seeds:
        report, _ = _run_one_seed(cfg, seed, calibrator)
        seed_dir = out_dir / f"seed_{seed}"
        entry = {"seed": seed, **_report_to_dict(report)}
        _write_json(seed_dir / "metrics.json", entry)
        _export_report(seed_dir, report)
        per_seed.append(entry)
    aurocs = [e["auroc_unknown"] for e in per_seed if e["auroc_unknown"] is not None]
    f1s = [e["macro_f1"] for e in per_seed]
    summary = {
        "method": cfg.method,
        "seeds": cfg.seeds,
        "per_seed": per_seed,
        "mean_auroc_unknown": float(np.mean(aurocs)) if aurocs else None,
        "std_auroc_unknown": float(np.std(aurocs)) if aurocs else None,
        "mean_macro_f1": float(np.mean(f1s)),
        "std_macro_f1": float(np.std(f1s)),
    }
    return summary


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        num_known=args.classes,
        samples_per_class=args.samples_per_class,
        class_separation=args.separation,
        noise_sigma=args.noise,
        unknown_count=args.unknown_count,
        unknown_offset=args.unknown_offset,
        unknown_clusters=args.unknown_clusters,
        seed=args.seed if args.seed is not None else 0,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test = generate_synthetic(spec)
    write_activations(train, out / "train.osav")
    write_activations(test, out / "test.osav")
    print(f"wrote {out / 'train.osav'} ({train.n_rows} rows) and "
          f"{out / 'test.osav'} ({test.n_rows} rows), K={train.num_classes}")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    split = make_open_split(args.num_total, args.num_known, args.seed or 0)
    payload = split.to_dict()
    _write_json(Path(args.out), payload)
    print(f"known classes: {list(split.known_classes)}")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if cfg.train_path is None:
        raise ValidationError("train_path is required for fit")
    seed = cfg.seeds[0]
    train, split = _maybe_split(_load_set(cfg.train_path, seed), cfg, seed)
    calibrator = _build_calibrator(cfg, train)
    payload = {
        "format_version": 1,
        "method": cfg.method,
        "num_classes": train.num_classes,
        "seed": seed,
        "split": split.to_dict() if split else None,
        "config": asdict(cfg),
        "calibrator": _calibrator_to_dict(calibrator),
        "created_at": _timestamp(),
    }
    _write_json(Path(args.out), payload)
    print(f"wrote calibrator ({cfg.method}, K={train.num_classes}) to {args.out}")
    return 0


def load_calibrator_file(path: str | Path):
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise OpensetError(f"cannot read calibrator: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"calibrator file is not valid JSON: {exc}") from exc
    calibrator = _calibrator_from_dict(payload["calibrator"])
    return calibrator, payload


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.output_dir)
    calibrator = None
    if args.calibrator:
        calibrator, payload = load_calibrator_file(args.calibrator)
        if isinstance(calibrator, dict):
            cfg = replace(cfg, method="softmax", threshold=calibrator["threshold"])
        else:
            cfg = replace(cfg, method=payload["method"])
        k = payload.get("num_classes")
        if k is not None and isinstance(calibrator, dict):
            # Softmax carries no structure; check K against the data later
            # via the test set itself.
            pass
    summary = _evaluate_seeds(cfg, out_dir, calibrator)
    summary["created_at"] = _timestamp()
    _write_json(out_dir / "metrics.json", summary)
    auroc = summary["mean_auroc_unknown"]
    print(
        f"{cfg.method}: mean AUROC(unknown) = "
        f"{'n/a' if auroc is None else f'{auroc:.4f}'}, "
        f"mean macro-F1 = {summary['mean_macro_f1']:.4f}"
    )
    return 0


def cmd_sweep_q(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if cfg.method != "metamax":
        raise ValidationError("sweep-q only applies to the metamax method")
    out = Path(args.out)
    rows = []
    for q in args.q_values:
        try:
            run_cfg = replace(cfg, q=q)
            run_cfg.validate()
            per_seed = [_run_one_seed(run_cfg, s)[0] for s in run_cfg.seeds]
            aurocs = [r.auroc_unknown for r in per_seed if r.auroc_unknown is not None]
            f1 = float(np.mean([r.macro_f1 for r in per_seed]))
            auroc = float(np.mean(aurocs)) if aurocs else ""
            rows.append([q, f1, auroc, "ok"])
            print(f"q={q}: f1={f1:.6f} auroc={auroc if auroc == '' else f'{auroc:.6f}'}")
        except OpensetError as exc:
            rows.append([q, "", "", f"failed: {exc}"])
            print(f"q={q}: failed ({exc})", file=sys.stderr)
    _write_csv(out, ["q", "f1", "auroc", "status"], rows)
    return 0


def cmd_scatter(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if cfg.train_path is None:
        raise ValidationError("train_path is required for scatter")
    seed = cfg.seeds[0]
    train, _ = _maybe_split(_load_set(cfg.train_path, seed), cfg, seed)
    corr, acts, dists = evaluation.activation_distance_correlation(
        train, args.target_class, args.probe_class
    )
    _write_csv(Path(args.out), ["activation", "distance"], zip(acts, dists))
    print(f"correlation(target={args.target_class}, probe={args.probe_class}) = {corr:.6f}")
    return 0


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--train", dest="train_path", help="training OSAV file")
    p.add_argument("--test", dest="test_path", help="test OSAV file")
    p.add_argument("--num-total", dest="num_total_classes", type=int)
    p.add_argument("--num-known", dest="num_known", type=int)
    p.add_argument("--seed", type=int, help="single seed (overrides config seeds)")
    p.add_argument("--seeds", type=int, nargs="+", help="seed list for multi-run protocols")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--q", type=int, help="non-match tail size")
    p.add_argument("--beta", type=int, help="ranks visited during revision")
    p.add_argument("--alpha", type=int, help="ranks revised by openmax")
    p.add_argument("--eta", type=int, help="distance tail size for openmax")
    p.add_argument("--threshold", type=float, help="softmax rejection threshold")
    p.add_argument("--distance", dest="distance_kind", choices=cal.DISTANCE_KINDS)
    p.add_argument("--no-translation", action="store_true",
                   help="evaluate Weibull tails without the stored translation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="openset",
        description="Open-set calibration and evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic activation files")
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--samples-per-class", type=int, default=500)
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--unknown-count", type=int, default=800)
    p.add_argument("--unknown-offset", type=float, default=15.0)
    p.add_argument("--unknown-clusters", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="draw a deterministic open-set class split")
    p.add_argument("--num-total", type=int, required=True)
    p.add_argument("--num-known", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fit", help="build a calibrator and save it as JSON")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="calibrator JSON path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score a test set and export metrics")
    _add_config_flags(p)
    p.add_argument("--calibrator", help="calibrator JSON from fit (single-seed only)")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-q", help="refit and re-evaluate across tail sizes")
    _add_config_flags(p)
    p.add_argument("--q-values", type=int, nargs="+", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_sweep_q)

    p = sub.add_parser("scatter", help="export activation/distance scatter pairs")
    _add_config_flags(p)
    p.add_argument("--target-class", type=int, required=True)
    p.add_argument("--probe-class", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_scatter)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OpensetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
