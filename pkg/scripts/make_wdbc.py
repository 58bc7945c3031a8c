"""Write the bundled breast-cancer CSV files from scikit-learn's copy of WDBC.

Produces ``wdbc.csv`` (all 569 records, Kaggle column layout) and
``wdbc_benchmark.csv`` (20 malignant records drawn at random plus 356 benign
ones). scikit-learn is needed only here, not by the package.

Usage:
    python3 scripts/make_wdbc.py [--out src/irf/data] [--seed 20200]
"""

import argparse
import csv
from pathlib import Path

import numpy as np
from sklearn.datasets import load_breast_cancer

from irf.dataset import SampleSet, make_benchmark_subset

STATS = ("mean", "se", "worst")
FEATURES = (
    "radius", "texture", "perimeter", "area", "smoothness", "compactness",
    "concavity", "concave points", "symmetry", "fractal_dimension",
)
COLUMNS = ["id", "diagnosis"] + [f"{f}_{s}" for s in STATS for f in FEATURES]


def write(path: Path, ids, diagnosis, points) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for i, dx, row in zip(ids, diagnosis, points):
            w.writerow([i, dx, *(repr(float(v)) for v in row)])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("src/irf/data"))
    ap.add_argument("--seed", type=int, default=20200)
    ap.add_argument("--inject", type=int, default=20)
    ap.add_argument("--keep", type=int, default=356)
    args = ap.parse_args()

    data = load_breast_cancer()
    malignant = data.target == 0
    ids = [f"wdbc{k + 1:04d}" for k in range(malignant.size)]
    args.out.mkdir(parents=True, exist_ok=True)
    write(args.out / "wdbc.csv", ids, np.where(malignant, "M", "B"), data.data)

    full = SampleSet(data.data, malignant, ids)
    bench = make_benchmark_subset(full, args.inject, args.seed, keep_count=args.keep)
    write(args.out / "wdbc_benchmark.csv", bench.ids,
          np.where(bench.labels, "M", "B"), bench.points)
    print(f"wrote {full.size} and {bench.size} records to {args.out}")


if __name__ == "__main__":
    main()
