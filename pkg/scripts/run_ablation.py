#!/usr/bin/env python3
"""Run the augmentation-count ablation on the synthetic benchmark.

Builds assets, train demos, and held-out test scenes under --workdir, then
sweeps augmentation counts across seeds and writes the success-rate curve
as CSV. Mirrors `sceneaug ablate` with the benchmark defaults spelled out.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sceneaug.augment import AugmentConfig
from sceneaug.benchmark import (
    BENCHMARK_EVAL,
    make_benchmark,
    train_library,
    train_vocab,
)
from sceneaug.evaluation import ablation_csv, ablation_run, mean_rate_by_count
from sceneaug.genbackend import ProceduralBackend


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="ablation-workdir")
    parser.add_argument("--counts", default="0,10,50,100")
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--train-demos", type=int, default=10)
    parser.add_argument("--test-scenes", type=int, default=100)
    parser.add_argument("--master-seed", type=int, default=7)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    counts = [int(c) for c in args.counts.split(",")]

    t0 = time.monotonic()
    train, test = make_benchmark(workdir / "assets", n_train=args.train_demos,
                                 n_test=args.test_scenes, seed=0)
    library = train_library(workdir / "assets")
    print(f"benchmark ready in {time.monotonic() - t0:.0f}s "
          f"({len(train.demos)} train demos, {len(test.demos)} test scenes)")

    def progress(row, report):
        per_cond = {c: round(report.rates(c)["full_rate"], 3)
                    for c in report.conditions()}
        print(f"count={row.count:4d} seed={row.seed} "
              f"pick={row.pick_rate:.3f} place={row.place_rate:.3f} "
              f"full={row.full_rate:.3f} {per_cond}", flush=True)

    rows = ablation_run(train, counts, AugmentConfig(master_seed=args.master_seed),
                        library, train_vocab(), ProceduralBackend(), test,
                        seeds=list(range(args.seeds)), eval_config=BENCHMARK_EVAL,
                        progress=progress)
    out_csv = workdir / "ablation.csv"
    out_csv.write_text(ablation_csv(rows))
    means = mean_rate_by_count(rows)
    print(f"\nmean full-success by count: "
          f"{ {c: round(r, 3) for c, r in means.items()} }")
    print(f"curve written to {out_csv} ({time.monotonic() - t0:.0f}s total)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
