"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 data, 4 compute.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from irf.bench import (
    BREAST_CANCER_COMPONENTS,
    BREAST_CANCER_QUANTILES,
    RunConfig,
    compare,
    resolve_labels,
)
from irf.dataset import CsvConfig, OutlierParams, bundled_path, load_csv
from irf.errors import ComputeError, DataError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_COMPUTE = 0, 2, 3, 4

# bundled files come with known columns
_BUNDLED_COLUMNS = dict(label_column="diagnosis", positive_class="M", id_column="id")


class UsageError(Exception):
    pass


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True,
                   help="CSV file, or @wdbc / @wdbc_benchmark for the bundled data")
    p.add_argument("--features", type=_str_list, help="feature columns (default: all others)")
    p.add_argument("--id-col", help="record id column")
    p.add_argument("--label-col", help="ground-truth label column")
    p.add_argument("--positive-class", help="label value marking an anomaly")
    p.add_argument("--outlier-r", type=float, help="distance rule radius r")
    p.add_argument("--outlier-p", type=float, help="distance rule fraction p")


def _add_run_args(p: argparse.ArgumentParser, quantiles, components) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--trees", type=int, help="number of trees K")
    g.add_argument("--confidence", type=int, choices=(90, 95),
                   help="size K for this confidence level (default 90)")
    p.add_argument("--quantiles", type=_float_list, default=quantiles,
                   help="threshold quantiles in percent, comma-separated")
    p.add_argument("--components", type=_int_list, default=components,
                   help="principal component counts, comma-separated")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="irf", description="Isolation random forest tools")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="score points and flag the lowest quantiles")
    _add_data_args(p)
    _add_run_args(p, (5.0,), None)
    p.add_argument("--method", choices=("irf", "dirf"), default="irf")
    p.add_argument("--output", type=Path, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("compare", help="IRF and DIRF over a component/quantile grid")
    _add_data_args(p)
    _add_run_args(p, BREAST_CANCER_QUANTILES, BREAST_CANCER_COMPONENTS)
    p.add_argument("--sweep", choices=("count", "prefix"), default="count",
                   help="count: row c uses components 1..c; prefix: prefixes of the list")
    p.add_argument("--fp-normalization", choices=("flagged", "total"), default="flagged")
    p.add_argument("--output", type=Path, required=True, help="difference table file")
    p.add_argument("--report-dir", type=Path, help="also write both method reports here")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("oracle", help="exact enumeration and counterexample reports")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--input", help="CSV of at most 6 points in at most 3 dimensions")
    g.add_argument("--lengths", type=_float_list, help="interval lengths of a 1D partition")
    g.add_argument("--counterexample", type=int, metavar="N",
                   help="transposition pair with N points besides the origin")
    p.add_argument("--features", type=_str_list)
    p.add_argument("--p1", type=float, default=1e-4, help="first coordinate pair p1 = q1")
    p.add_argument("--trees", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=Path)

    p = sub.add_parser("variance-table", help="maximum depth variance on equidistant sets")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--j", type=_int_list, default=(1, 2, 3),
                   help="exponents j of the sizes 3**j (default 1,2,3)")
    g.add_argument("--sizes", type=_int_list, help="explicit sizes instead of powers of 3")
    p.add_argument("--definition", choices=("interval", "point", "formula", "middle"),
                   default="interval")
    p.add_argument("--method", choices=("auto", "exact", "mc"), default="auto")
    p.add_argument("--trials", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=Path)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("probe-complexity", help="time DIRF across data sizes")
    p.add_argument("--sizes", type=_int_list, default=(1000, 10_000, 100_000))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=Path)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return ap


def _emit(text: str, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text, encoding="utf-8")


def _load(args):
    path = args.input
    cols = dict(label_column=args.label_col, positive_class=args.positive_class,
                id_column=args.id_col)
    if path.startswith("@"):
        path = bundled_path(path[1:] + ".csv")
        cols = {k: v if v is not None else _BUNDLED_COLUMNS[k] for k, v in cols.items()}
    if (cols["label_column"] is None) != (cols["positive_class"] is None):
        raise UsageError("--label-col and --positive-class go together")
    if (args.outlier_r is None) != (args.outlier_p is None):
        raise UsageError("--outlier-r and --outlier-p go together")
    outlier = None
    if args.outlier_r is not None:
        outlier = OutlierParams(args.outlier_r, args.outlier_p)
    cfg = CsvConfig(features=args.features, **cols)
    return load_csv(path, cfg), cfg, outlier


def _run_config(args, method, outlier, cfg, **extra) -> RunConfig:
    try:
        return RunConfig(
            method=method,
            quantiles=args.quantiles,
            components=args.components,
            trials=args.trees,
            confidence=args.confidence if args.confidence is not None else 90,
            seed=args.seed,
            outlier=outlier,
            csv=cfg,
            **extra,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_detect(args) -> int:
    from irf.dirf import dirf_estimate
    from irf.forest import ThresholdCriterion, flag_anomalies, irf_estimate, trials_from_confidence

    s, cfg, outlier = _load(args)
    run = _run_config(args, args.method, outlier, cfg)
    trials = run.trials if run.trials is not None else trials_from_confidence(s, run.confidence)
    if args.method == "irf":
        est = irf_estimate(s, trials, run.seed)
    else:
        comps = None if args.components is None else list(args.components)
        est = dirf_estimate(s, comps, trials, run.seed)
    ids = s.point_ids()
    flags = {q: flag_anomalies(est, ThresholdCriterion(q)) for q in run.quantiles}
    labels = None
    if outlier is not None or s.labels is not None:
        labels, _ = resolve_labels(s, outlier)

    if args.format == "json":
        doc = {
            "method": args.method,
            "trials": trials,
            "seed": run.seed,
            "scores": [{"id": i, "mean_depth": float(m), "sample_variance": float(v)}
                       for i, m, v in zip(ids, est.mean_depth, est.sample_variance)],
            "flags": {repr(q): [ids[k] for k in idx] for q, idx in flags.items()},
        }
        if labels is not None:
            doc["labelled"] = [ids[k] for k in np.flatnonzero(labels)]
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["id", "mean_depth", "sample_variance"] + [f"flag_{q:g}" for q in flags]
        if labels is not None:
            header.append("label")
        w.writerow(header)
        masks = {}
        for q, idx in flags.items():
            m = np.zeros(s.size, dtype=int)
            m[idx] = 1
            masks[q] = m
        for k in range(s.size):
            row = [ids[k], repr(float(est.mean_depth[k])), repr(float(est.sample_variance[k]))]
            row += [int(masks[q][k]) for q in flags]
            if labels is not None:
                row.append(int(labels[k]))
            w.writerow(row)
        text = buf.getvalue()
    _emit(text, args.output)
    if args.output is not None:
        for q, idx in flags.items():
            print(f"q={q:g}: flagged {idx.size} of {s.size}: {' '.join(ids[k] for k in idx)}")
    return EXIT_OK


def cmd_compare(args) -> int:
    s, cfg, outlier = _load(args)
    run = _run_config(args, "irf", outlier, cfg, sweep=args.sweep,
                      fp_normalization=args.fp_normalization)
    a, b, diff = compare(run, s)
    _emit(diff.to_json() if args.format == "json" else diff.to_csv(), args.output)
    if args.report_dir is not None:
        for rep in (a, b):
            ext = "json" if args.format == "json" else "csv"
            text = rep.to_json() if args.format == "json" else rep.to_table_csv()
            _emit(text, args.report_dir / f"{rep.method}.{ext}")
            _emit(rep.to_long_csv(), args.report_dir / f"{rep.method}_long.csv")
    print(f"{s.size} points, {a.n_labelled} labelled ({a.labeling}), K={a.trials}, "
          f"seed={a.seed}; difference table written to {args.output}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from irf.monotone import MonotonePartition
    from irf.oracle import (
        build_counterexample,
        cardinality_formula,
        counterexample_mc_check,
        enumerate_irf,
        enumerate_mrf,
    )

    if args.input is not None:
        path = bundled_path(args.input[1:] + ".csv") if args.input.startswith("@") else args.input
        s = load_csv(path, CsvConfig(features=args.features))
        forest = enumerate_irf(s)
        doc = {
            "kind": "isolation",
            "points": s.size,
            "dim": s.dim,
            "count": forest.count,
            "cardinality_formula": cardinality_formula(s.size, s.dim),
            "total_probability": forest.total_probability,
            "trees": [{"tree": repr(t), "probability": p} for t, p in forest.entries]
            if forest.count <= 200 else [],
        }
    elif args.lengths is not None:
        try:
            p = MonotonePartition.from_lengths(args.lengths)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        forest = enumerate_mrf(p)
        doc = {
            "kind": "monotone",
            "intervals": p.N,
            "count": forest.count,
            "total_probability": forest.total_probability,
            "trees": [{"tree": repr(t), "probability": pr} for t, pr in forest.entries]
            if forest.count <= 200 else [],
        }
    else:
        n = args.counterexample
        if n < 3:
            raise UsageError("--counterexample needs N >= 3")
        seq = [args.p1, 1.0] + [2.0 ** k for k in range(1, n - 1)]
        pair = build_counterexample(seq, seq)
        rep = counterexample_mc_check(pair, args.trees, args.seed)
        doc = {"kind": "counterexample", "N": n, "p": seq, "q": seq, **rep.__dict__,
               "distance_ratio": rep.distance_ratio, "relative_gap": rep.relative_gap}
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.output)
    return EXIT_OK


def cmd_variance_table(args) -> int:
    from irf.monotone import PUBLISHED_MAX_VARIANCE, max_variance_equidistant

    if args.sizes is not None:
        sizes = [("", n) for n in args.sizes]
    else:
        sizes = [(j, 3**j) for j in args.j]
    rows = []
    for j, n in sizes:
        r = max_variance_equidistant(n, args.definition, args.method, args.trials, args.seed)
        rows.append({"j": j, "n": n, "max_variance": r.value, "definition": r.definition,
                     "method": r.method, "index": r.index, "ci_halfwidth": r.ci_halfwidth,
                     "published": PUBLISHED_MAX_VARIANCE.get(n, "")})
    if args.format == "json":
        text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        text = buf.getvalue()
    _emit(text, args.output)
    return EXIT_OK


def cmd_probe(args) -> int:
    from irf.dirf import dirf_complexity_probe, fit_exponent

    rows = dirf_complexity_probe(args.sizes, args.seed)
    try:
        slope = fit_exponent(rows)
    except ComputeError:
        slope = None
    if args.format == "json":
        doc = {"rows": [r.__dict__ for r in rows], "exponent": slope}
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "seconds", "trials", "min_nodes", "max_nodes"])
        for r in rows:
            w.writerow([r.n, repr(r.seconds), r.trials, r.min_nodes, r.max_nodes])
        text = buf.getvalue()
    _emit(text, args.output)
    if slope is not None:
        print(f"fitted exponent of time vs n log n: {slope:.3f}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "detect": cmd_detect,
    "compare": cmd_compare,
    "oracle": cmd_oracle,
    "variance-table": cmd_variance_table,
    "probe-complexity": cmd_probe,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"irf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"irf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ComputeError, ValueError) as exc:
        print(f"irf: compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
