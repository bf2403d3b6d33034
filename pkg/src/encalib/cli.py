"""Command-line surface: generate -> fit -> apply -> evaluate -> report.

Exit codes are a stable scripting contract: 0 success, 1 runtime or fit
failure, 2 usage error. Every command is deterministic given its full
flag set; reruns produce byte-identical output files.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from encalib import calibrators as cal
from encalib import metrics
from encalib.dataset import FormatError, LogitDataset, load_csv, save_csv
from encalib.synthetic import KINDS, ShiftScenario, generate, severity_suite

METHODS = ("ts", "energy", "hb", "irova", "ets")
HB_BINS = 15


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _write_csv(path, header: list[str], rows: list[list]):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands

def _cmd_gen(args, parser):
    try:
        sc = ShiftScenario(k=args.k, n=args.n, margin=args.margin,
                           noise=args.noise, overconfidence=args.overconfidence,
                           severity=args.severity, kind=args.kind,
                           seed=args.seed)
    except ValueError as exc:
        parser.error(str(exc))
    save_csv(generate(sc), args.out)
    return 0


def _fit_params(method: str, val: LogitDataset, ood: LogitDataset | None):
    if method == "ts":
        return cal.fit_temperature(val)
    if method == "energy":
        return cal.fit_energy_calibrator(val, ood, cal.fit_temperature(val))
    if method == "hb":
        return cal.fit_histogram_binning(val, HB_BINS)
    if method == "irova":
        return cal.fit_isotonic_ova(val)
    if method == "ets":
        return cal.fit_ensemble_ts(val)
    raise ValueError(f"unknown method {method!r}")


def _cmd_fit(args, parser):
    if args.method == "energy" and args.ood is None:
        parser.error("--method energy requires --ood")
    val = load_csv(args.val)
    ood = load_csv(args.ood) if args.ood is not None else None
    params = _fit_params(args.method, val, ood)
    cal.save_params(params, args.out)
    return 0


def _cmd_apply(args, parser):
    params = cal.load_params(args.params)
    ds = load_csv(args.data)
    preds = cal.apply_calibrator(params, ds)
    header = ["row", "pred_label", "confidence"] + [f"p{j}" for j in range(ds.k)]
    rows = [[i, p.predicted_label, p.confidence] + list(p.probabilities)
            for i, p in enumerate(preds)]
    _write_csv(args.out, header, rows)
    return 0


def _eval_dataset(params, ds: LogitDataset, bins: int):
    """Metric row pieces for one dataset: calibration metrics are computed
    over the labeled rows only; confidence over all rows."""
    preds = cal.apply_calibrator(params, ds)
    conf = np.array([p.confidence for p in preds])
    labeled = ds.labels >= 0
    row = {"n": ds.n, "mean_confidence": float(conf.mean()),
           "accuracy": None, "ece": None, "mce": None, "sce": None}
    if labeled.any():
        lpreds = [p for p, keep in zip(preds, labeled) if keep]
        labels = ds.labels[labeled]
        pred_labels = np.array([p.predicted_label for p in lpreds])
        b = metrics.bin_predictions(lpreds, labels, bins)
        row["accuracy"] = float((pred_labels == labels).mean())
        row["ece"] = metrics.ece(b, int(labeled.sum()))
        row["mce"] = metrics.mce(b)
        row["sce"] = metrics.sce(np.array([p.probabilities for p in lpreds]),
                                 labels, bins)
        row["bins"] = b
    return preds, conf, row


_REPORT_HEADER = ["dataset", "kind", "n", "accuracy", "mean_confidence",
                  "ece", "mce", "sce", "auroc", "aupr_in", "aupr_out"]


def _cmd_eval(args, parser):
    params = cal.load_params(args.params)
    kind = {cal.TemperatureParams: "ts", cal.EnergyCalibratorParams: "energy",
            cal.HistogramBinningParams: "hb", cal.IsotonicOvAParams: "irova",
            cal.EnsembleTsParams: "ets"}[type(params)]
    ds = load_csv(args.data)
    _, conf, row = _eval_dataset(params, ds, args.bins)
    rows = [[Path(args.data).stem, kind, row["n"], row["accuracy"],
             row["mean_confidence"], row["ece"], row["mce"], row["sce"],
             None, None, None]]
    if args.ood is not None:
        ood = load_csv(args.ood)
        _, oconf, orow = _eval_dataset(params, ood, args.bins)
        scores = metrics.OodScores(conf, oconf)
        rows.append([Path(args.ood).stem, kind, orow["n"], orow["accuracy"],
                     orow["mean_confidence"], orow["ece"], orow["mce"],
                     orow["sce"], metrics.auroc(scores),
                     metrics.aupr(scores, "in"), metrics.aupr(scores, "out")])
    _write_csv(args.out, _REPORT_HEADER, rows)
    if args.reliability is not None:
        b = row.get("bins")
        if b is None:
            raise ValueError("reliability table needs labeled rows in --data")
        _write_csv(args.reliability,
                   ["bin", "lower", "upper", "count", "confidence", "accuracy"],
                   [list(r) for r in metrics.reliability_table(b)])
    return 0


# ---------------------------------------------------------------------------
# benchmark

def _cell_seed(i: int, slot: int) -> int:
    return 100 * i + 10 * slot


def bench_cell(k: int, n: int, i: int):
    """Datasets for one benchmark seed: a severity-0 validation set, a small
    semantic set for fitting, the severity suite 0..5, and a held-out
    semantic test set."""
    val = generate(ShiftScenario(k=k, n=n, kind="id", seed=_cell_seed(i, 0)))
    ood_fit = generate(ShiftScenario(k=k, n=max(10, n // 100), kind="semantic",
                                     seed=_cell_seed(i, 1)))
    suite = severity_suite(ShiftScenario(k=k, n=n, seed=_cell_seed(i, 2)))
    ood_test = generate(ShiftScenario(k=k, n=n, kind="semantic",
                                      seed=_cell_seed(i, 3)))
    return val, ood_fit, suite, ood_test


def bench_fit(method: str, val: LogitDataset, ood_fit: LogitDataset):
    return _fit_params(method, val, ood_fit if method == "energy" else None)


def run_bench(k: int, n: int, seeds: int, methods: list[str]):
    """Severity-resolved ECE plus mean semantic-OOD confidence per method,
    averaged over seeds."""
    eces = {m: np.zeros(6) for m in methods}
    oodc = {m: 0.0 for m in methods}
    for i in range(seeds):
        val, ood_fit, suite, ood_test = bench_cell(k, n, i)
        for method in methods:
            params = bench_fit(method, val, ood_fit)
            for s, ds in enumerate(suite):
                preds = cal.apply_calibrator(params, ds)
                b = metrics.bin_predictions(preds, ds.labels, metrics.DEFAULT_BINS)
                eces[method][s] += metrics.ece(b, ds.n)
            preds = cal.apply_calibrator(params, ood_test)
            oodc[method] += float(np.mean([p.confidence for p in preds]))
    header = ["method"] + [f"ece_sev{s}" for s in range(6)] + ["ece_avg",
                                                               "ood_mean_conf"]
    rows = []
    for method in methods:
        per_sev = eces[method] / seeds
        rows.append([method] + [float(e) for e in per_sev]
                    + [float(per_sev.mean()), oodc[method] / seeds])
    return header, rows


def _cmd_bench(args, parser):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        parser.error("--methods must name at least one method")
    for m in methods:
        if m not in METHODS:
            parser.error(f"unknown method {m!r}; choose from {','.join(METHODS)}")
    if args.k < 2 or args.n < 1 or args.seeds < 1:
        parser.error("need --k >= 2, --n >= 1, --seeds >= 1")
    header, rows = run_bench(args.k, args.n, args.seeds, methods)
    _write_csv(args.out, header, rows)
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="encalib",
        description="Post-hoc confidence calibration over logit CSV files.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-synthetic", help="write a synthetic logit dataset")
    g.add_argument("--k", type=int, default=10)
    g.add_argument("--n", type=int, default=5000)
    g.add_argument("--margin", type=float, default=4.0)
    g.add_argument("--noise", type=float, default=1.0)
    g.add_argument("--overconfidence", type=float, default=3.0)
    g.add_argument("--severity", type=int, default=0)
    g.add_argument("--kind", choices=KINDS, default="id")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    f = sub.add_parser("fit", help="fit a calibrator on a validation CSV")
    f.add_argument("--method", choices=METHODS, required=True)
    f.add_argument("--val", required=True)
    f.add_argument("--ood")
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_fit)

    a = sub.add_parser("apply", help="write calibrated predictions for a CSV")
    a.add_argument("--params", required=True)
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=_cmd_apply)

    e = sub.add_parser("eval", help="metric report for a calibrator on a CSV")
    e.add_argument("--params", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--ood")
    e.add_argument("--bins", type=int, default=metrics.DEFAULT_BINS)
    e.add_argument("--out", required=True)
    e.add_argument("--reliability")
    e.set_defaults(func=_cmd_eval)

    b = sub.add_parser("bench", help="severity benchmark across calibrators")
    b.add_argument("--k", type=int, default=10)
    b.add_argument("--n", type=int, default=5000)
    b.add_argument("--seeds", type=int, default=5)
    b.add_argument("--methods", default="ts,energy")
    b.add_argument("--out", required=True)
    b.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (FormatError, cal.FitError, ValueError, OSError) as exc:
        print(f"encalib: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
