"""Recovery-accuracy grid over the synthetic setups.

Repeatedly draws each (setup, rho) cell, scores with the requested methods,
selects five features, and reports the percent overlap with the planted
marginal block as mean +- std. The gate methods are much slower than the
closed-form scores, so they default to off.

Usage:
    python scripts/run_recovery_grid.py --reps 100 --methods mls,ls
    python scripts/run_recovery_grid.py --methods dufs --reps 10 --epochs 200
"""

import argparse
import csv
import sys

from mlscore.evaluation import BENCH_RHOS, BENCH_SETUPS, run_recovery_benchmark
from mlscore.gates import TrainConfig


def parse_args(argv):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n", type=int, default=1000, dest="n_samples")
    parser.add_argument("--methods", default="mls,ls")
    parser.add_argument("--setups", default=",".join(str(s) for s in BENCH_SETUPS))
    parser.add_argument("--rhos", default=",".join(str(r) for r in BENCH_RHOS))
    parser.add_argument("--epochs", type=int, default=None,
                        help="override gate training epochs")
    parser.add_argument("--output", default=None, help="summary CSV path")
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    methods = tuple(m.strip() for m in args.methods.split(","))
    setups = tuple(int(s) for s in args.setups.split(","))
    rhos = tuple(float(r) for r in args.rhos.split(","))
    train_config = None
    if args.epochs is not None:
        train_config = TrainConfig(epochs=args.epochs)

    reports = run_recovery_benchmark(
        setups=setups,
        rhos=rhos,
        reps=args.reps,
        methods=methods,
        seed=args.seed,
        n_samples=args.n_samples,
        train_config=train_config,
    )

    print(f"{'setup':>5} {'rho':>5}" + "".join(f" {m:>16}" for m in methods))
    for setup in setups:
        for rho in rhos:
            cells = []
            for method in methods:
                rep = next(
                    r for r in reports
                    if r.method == method and r.setup == setup and r.rho == rho
                )
                cells.append(f"{rep.mean:6.1f} +-{rep.std:6.2f}")
            print(f"{setup:>5} {rho:>5.2f}" + "".join(f" {c:>16}" for c in cells))

    if args.output:
        with open(args.output, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["setup", "rho", "method", "mean", "std", "reps"])
            for rep in reports:
                writer.writerow(
                    [rep.setup, rep.rho, rep.method, rep.mean, rep.std,
                     rep.repetitions]
                )
        print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
