"""Run the simulated benchmark on both bundled datasets and print the tables.

    python scripts/run_benchmark.py [--quick] [--out results/]
"""

import argparse
from pathlib import Path

from sarpu.benchmark import METHODS, long_table, run_benchmark, summary_table
from sarpu.dataio import load_breast_cancer
from sarpu.simulate import SimulationConfig, make_blobs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="2 splits x 2 labelings instead of 5 x 5")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", help="directory for summary/long tables")
    args = ap.parse_args()

    reps = 2 if args.quick else 5
    cfg = SimulationConfig(n_splits=reps, n_labelings=reps, seed=args.seed)
    datasets = {
        "synthetic-blobs": make_blobs(2000, 4, 3.0, seed=args.seed),
        "breast-cancer": load_breast_cancer(),
    }
    for name, data in datasets.items():
        bench = run_benchmark(data, cfg, METHODS, dataset_name=name, jobs=args.jobs)
        print(f"== {name} ({reps * reps} instances, {len(bench.failures)} failed fits)")
        print(summary_table(bench))
        if args.out:
            out = Path(args.out) / name
            out.mkdir(parents=True, exist_ok=True)
            (out / "summary.tsv").write_text(summary_table(bench))
            (out / "long.tsv").write_text(long_table(bench))


if __name__ == "__main__":
    main()
