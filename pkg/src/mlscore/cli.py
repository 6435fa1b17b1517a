"""Command-line surface: score, select, synth, validate-margin, bench.

Every command writes a JSON manifest next to its primary output so a run
can be replayed: command name, parameter echo, seed, sha256 of each input
file, output list, tool version, timestamp. Reruns with the same seed and
inputs are byte-identical except for the manifest timestamp.

Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import DataError, load_csv, save_csv, standardize
from .evaluation import (
    BENCH_RHOS,
    BENCH_SETUPS,
    margin_weight_separation,
    run_recovery_benchmark,
)
from .gates import GateState, TrainConfig, train
from .margins import MarginConfig, build_margin_model, export_margin_csv
from .scores import (
    KERNEL_MODES,
    KernelConfig,
    ScoreReport,
    laplacian_score,
    mls,
    ranked_rows,
    select_top,
)
from .synth import SynthSpec, add_noise_features, gen_setup

SCORE_METHODS = ("ls", "mls")
SELECT_METHODS = ("ls", "mls", "dufs", "dufs-mls")
DEFAULT_KS_GRID = tuple(round(0.01 * i, 2) for i in range(1, 31))


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _echo_params(args: argparse.Namespace) -> dict:
    skip = {"func"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        out[key] = str(value) if isinstance(value, Path) else value
    return out


def _write_manifest(primary, command: str, args, seed, inputs, outputs,
                    extra: dict | None = None) -> Path:
    manifest = {
        "command": command,
        "params": _echo_params(args),
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    path = Path(str(primary) + ".manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _default_output(input_path: str, tag: str) -> Path:
    src = Path(input_path)
    return src.with_name(f"{src.stem}-{tag}.csv")


def _margin_config(args, parser) -> MarginConfig:
    try:
        return MarginConfig(
            quantile=args.quantile,
            skew_right=args.skew_right,
            skew_left=args.skew_left,
            k=args.k,
        )
    except ValueError as err:
        parser.error(str(err))


def _kernel_config(args, parser) -> KernelConfig:
    try:
        return KernelConfig(
            bandwidth=args.bandwidth,
            mode=args.kernel,
            n_neighbors=args.n_neighbors,
        )
    except ValueError as err:
        parser.error(str(err))


def _load_for_scoring(args):
    ds = load_csv(args.input, label_column=args.label_col)
    if not args.no_standardize:
        ds, _ = standardize(ds)
    return ds


def _score_dataset(ds, args, margin_config, kernel_config) -> ScoreReport:
    if args.method == "ls":
        return laplacian_score(ds, kernel_config)
    model = build_margin_model(ds, margin_config)
    return mls(ds, model)


def _write_scores_csv(report: ScoreReport, path) -> None:
    rank_of = {name: rank for name, _, rank in ranked_rows(report)}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "score", "rank"])
        for name, value in zip(report.feature_names, report.scores):
            writer.writerow([name, repr(float(value)), rank_of[name]])


def _print_warnings(report: ScoreReport) -> None:
    for line in report.warnings:
        print(f"warning: {line}", file=sys.stderr)


def cmd_score(args, parser) -> int:
    margin_config = _margin_config(args, parser)
    kernel_config = _kernel_config(args, parser)
    ds = _load_for_scoring(args)
    report = _score_dataset(ds, args, margin_config, kernel_config)
    out = Path(args.output) if args.output else _default_output(args.input, "scores")
    _write_scores_csv(report, out)
    _print_warnings(report)
    _write_manifest(out, "score", args, None, [args.input], [out])
    print(f"wrote {out}")
    return 0


def cmd_select(args, parser) -> int:
    if args.num_features < 1:
        parser.error("num-features must be >= 1")
    margin_config = _margin_config(args, parser)
    kernel_config = _kernel_config(args, parser)
    ds = _load_for_scoring(args)
    if args.num_features > ds.n_features:
        parser.error(
            f"num-features {args.num_features} exceeds {ds.n_features} features"
        )
    trace = None
    if args.method in SCORE_METHODS:
        report = _score_dataset(ds, args, margin_config, kernel_config)
    else:
        model = None
        if args.method == "dufs-mls":
            model = build_margin_model(ds, margin_config)
        config = TrainConfig(
            epochs=args.epochs,
            learning_rate=args.lr,
            seed=args.seed,
            loss_variant=args.method,
        )
        try:
            state = GateState.fresh(
                ds.n_features, sigma=args.sigma, sign_flip=args.sign_flip
            )
        except ValueError as err:
            parser.error(str(err))
        trace = train(ds, config, state, model)
        report = ScoreReport(
            method=args.method,
            scores=trace.mu,
            params={
                "epochs": args.epochs,
                "learning_rate": args.lr,
                "sigma": args.sigma,
                "sign_flip": args.sign_flip,
            },
            constant_feature_flags=np.zeros(ds.n_features, dtype=bool),
            feature_names=list(ds.feature_names),
            seed=args.seed,
        )
    picked = select_top(report, args.num_features)
    out = Path(args.output) if args.output else _default_output(args.input, "selected")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "feature", "score"])
        for rank, idx in enumerate(picked, start=1):
            writer.writerow(
                [rank, report.feature_names[idx], repr(float(report.scores[idx]))]
            )
    outputs = [out]
    if trace is not None:
        trace_path = Path(str(out).removesuffix(".csv") + "-trace.json")
        payload = {
            "loss_history": [float(x) for x in trace.loss_history],
            "mu": [float(x) for x in trace.mu],
            "open_probabilities": [float(x) for x in trace.open_probabilities],
            "no_margin_signal": bool(trace.no_margin_signal),
        }
        with open(trace_path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.append(trace_path)
        if trace.no_margin_signal:
            print("warning: no sample fell in any margin; gate training had no"
                  " margin signal", file=sys.stderr)
    _print_warnings(report)
    seed = args.seed if args.method not in SCORE_METHODS else None
    _write_manifest(out, "select", args, seed, [args.input], outputs)
    print(f"wrote {out}")
    return 0


def cmd_synth(args, parser) -> int:
    try:
        spec = SynthSpec(
            setup=args.setup, rho=args.rho, n_samples=args.n, seed=args.seed
        )
    except ValueError as err:
        parser.error(str(err))
    drawn = gen_setup(spec)
    ds = drawn.dataset
    marginal_columns = [ds.feature_names[i] for i in drawn.marginal_feature_indices]
    if args.noisy:
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 309]))
        ds = add_noise_features(ds, rng)
    out = Path(args.output)
    save_csv(ds, out, label_column="label")
    _write_manifest(
        out, "synth", args, args.seed, [], [out],
        extra={"marginal_columns": marginal_columns},
    )
    n_pos = int(ds.labels.sum())
    print(f"wrote {out} ({ds.n_samples} rows, {ds.n_features} features, "
          f"{n_pos} positives)")
    return 0


def _parse_quantiles(text: str, parser) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        parser.error(f"could not parse quantile list {text!r}")
    if not values:
        parser.error("empty quantile list")
    for q in values:
        if not 0.0 < q < 0.5:
            parser.error(f"quantile must be in (0, 0.5), got {q}")
    return values


def cmd_validate_margin(args, parser) -> int:
    with open(args.input, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header is None or args.label_col not in header:
        parser.error(f"label column {args.label_col!r} not found in input")
    ds = load_csv(args.input, label_column=args.label_col)
    quantiles = (
        _parse_quantiles(args.quantiles, parser)
        if args.quantiles
        else DEFAULT_KS_GRID
    )
    base = _margin_config(args, parser)
    try:
        report = margin_weight_separation(ds, base, quantiles=quantiles)
    except ValueError as err:
        parser.error(str(err))
    best = max(range(len(report.ks_by_quantile)),
               key=lambda i: report.ks_by_quantile[i][1])
    print(f"{'quantile':>10} {'D':>10} {'p':>12}")
    for i, (q, d, p) in enumerate(report.ks_by_quantile):
        marker = "  <- max D" if i == best else ""
        print(f"{q:>10.3f} {d:>10.4f} {p:>12.3e}{marker}")
    out = Path(args.output) if args.output else _default_output(args.input, "margin-ks")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantile", "ks_distance", "p_value", "is_max"])
        for i, (q, d, p) in enumerate(report.ks_by_quantile):
            writer.writerow([repr(float(q)), repr(float(d)), repr(float(p)),
                             int(i == best)])
    outputs = [out]
    if args.dump_margins:
        scaled, _ = standardize(ds)
        model = build_margin_model(scaled, base)
        export_margin_csv(model, args.dump_margins)
        outputs.append(Path(args.dump_margins))
    _write_manifest(out, "validate-margin", args, None, [args.input], outputs)
    print(f"wrote {out}")
    return 0


def _parse_list(text: str, parser, kind, label: str):
    try:
        return tuple(kind(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        parser.error(f"could not parse {label} list {text!r}")


def cmd_bench(args, parser) -> int:
    if args.reps < 1:
        parser.error("reps must be >= 1")
    setups = _parse_list(args.setups, parser, int, "setup")
    rhos = _parse_list(args.rhos, parser, float, "rho")
    methods = tuple(tok for tok in args.methods.split(",") if tok.strip())
    if not setups or any(s not in (1, 2, 3) for s in setups):
        parser.error("setups must be a comma list drawn from 1,2,3")
    if not rhos or any(not 0.0 < r < 1.0 for r in rhos):
        parser.error("rhos must be a comma list of values in (0, 1)")
    if not methods or any(m not in SELECT_METHODS for m in methods):
        parser.error(f"methods must be drawn from {','.join(SELECT_METHODS)}")
    margin_config = None
    if args.quantile is not None:
        try:
            margin_config = MarginConfig(
                quantile=args.quantile,
                skew_right=args.skew_right,
                skew_left=args.skew_left,
                k=args.k,
            )
        except ValueError as err:
            parser.error(str(err))
    cells = run_recovery_benchmark(
        setups=setups,
        rhos=rhos,
        reps=args.reps,
        methods=methods,
        seed=args.seed,
        margin_config=margin_config,
    )
    by_cell: dict[tuple[int, float], dict[str, tuple[float, float]]] = {}
    for cell in cells:
        by_cell.setdefault((cell.setup, cell.rho), {})[cell.method] = (
            cell.mean, cell.std)
    header = f"{'setup':>5} {'rho':>5}" + "".join(
        f" {m:>16}" for m in methods)
    print(header)
    for setup in setups:
        for rho in rhos:
            row = f"{setup:>5} {rho:>5.2f}"
            for m in methods:
                mean, std = by_cell[(setup, rho)][m]
                row += f" {mean:>8.1f} +-{std:>5.2f}"
            print(row)
    prefix = args.output
    summary = Path(f"{prefix}-summary.csv")
    with open(summary, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setup", "rho", "method", "reps", "mean", "std"])
        for cell in cells:
            writer.writerow([cell.setup, repr(float(cell.rho)), cell.method,
                             cell.repetitions, repr(float(cell.mean)),
                             repr(float(cell.std))])
    per_rep = Path(f"{prefix}-reps.csv")
    with open(per_rep, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setup", "rho", "method", "rep", "accuracy"])
        for cell in cells:
            for rep, value in enumerate(cell.per_rep):
                writer.writerow([cell.setup, repr(float(cell.rho)), cell.method,
                                 rep, repr(float(value))])
    _write_manifest(summary, "bench", args, args.seed, [], [summary, per_rep])
    print(f"wrote {summary} and {per_rep}")
    return 0


def _add_margin_flags(sub, fixed_quantile=True) -> None:
    defaults = MarginConfig()
    sub.add_argument("--quantile", type=float,
                     default=defaults.quantile if fixed_quantile else None,
                     help="margin quantile in (0, 0.5)" if fixed_quantile else
                     "fixed margin quantile for every cell; when omitted each"
                     " cell matches the quantile to its contamination 1-rho"
                     " (the other margin flags apply only together with this)")
    sub.add_argument("--k", type=int, default=defaults.k,
                     help="minimum margin memberships for a sample to count")
    sub.add_argument("--skew-right", type=float, default=defaults.skew_right,
                     help="skewness at or above this uses the right margin")
    sub.add_argument("--skew-left", type=float, default=defaults.skew_left,
                     help="skewness at or below this uses the left margin")


def _add_scoring_flags(sub) -> None:
    sub.add_argument("--input", required=True, help="input CSV path")
    sub.add_argument("--label-col", default=None,
                     help="column to treat as the 0/1 label")
    sub.add_argument("--no-standardize", action="store_true",
                     help="score the raw values instead of standardized ones")
    sub.add_argument("--output", default=None, help="output CSV path")
    _add_margin_flags(sub)
    sub.add_argument("--kernel", choices=KERNEL_MODES, default="heat",
                     help="affinity kernel for the classic score")
    sub.add_argument("--bandwidth", type=float, default=None,
                     help="heat-kernel bandwidth (default: mean squared distance)")
    sub.add_argument("--n-neighbors", type=int, default=5,
                     help="neighbor count for the binary-knn kernel")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlscore",
        description="Margin-aware Laplacian feature scoring and selection",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    score = subs.add_parser("score", help="score every feature of a CSV")
    _add_scoring_flags(score)
    score.add_argument("--method", choices=SCORE_METHODS, required=True)
    score.set_defaults(func=cmd_score)

    select = subs.add_parser("select", help="rank and keep the top features")
    _add_scoring_flags(select)
    select.add_argument("--method", choices=SELECT_METHODS, required=True)
    select.add_argument("--num-features", type=int, required=True)
    select.add_argument("--epochs", type=int, default=500)
    select.add_argument("--lr", type=float, default=0.1)
    select.add_argument("--sigma", type=float, default=0.5)
    select.add_argument("--seed", type=int, default=0)
    select.add_argument("--sign-flip", action="store_true",
                        help="negate the training loss")
    select.set_defaults(func=cmd_select)

    synth = subs.add_parser("synth", help="generate a benchmark dataset CSV")
    synth.add_argument("--setup", type=int, choices=(1, 2, 3), required=True)
    synth.add_argument("--rho", type=float, required=True,
                       help="majority-class fraction in (0, 1)")
    synth.add_argument("--n", type=int, default=1000, help="sample count")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--noisy", action="store_true",
                       help="append correlated plus iid noise features")
    synth.add_argument("--output", required=True, help="output CSV path")
    synth.set_defaults(func=cmd_synth)

    validate = subs.add_parser(
        "validate-margin",
        help="test whether positives concentrate in the margins",
    )
    validate.add_argument("--input", required=True, help="input CSV path")
    validate.add_argument("--label-col", required=True,
                          help="column holding 0/1 labels")
    validate.add_argument("--quantiles", default=None,
                          help="comma list; default 0.01..0.30 step 0.01")
    validate.add_argument("--output", default=None, help="output CSV path")
    validate.add_argument("--dump-margins", default=None,
                          help="also write per-sample margin stats to this path")
    _add_margin_flags(validate)
    validate.set_defaults(func=cmd_validate_margin)

    bench = subs.add_parser("bench", help="run the synthetic recovery grid")
    bench.add_argument("--reps", type=int, default=100)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--methods", default="mls,ls")
    bench.add_argument("--setups",
                       default=",".join(str(s) for s in BENCH_SETUPS))
    bench.add_argument("--rhos", default=",".join(str(r) for r in BENCH_RHOS))
    bench.add_argument("--output", default="bench",
                       help="prefix for the summary and per-rep CSVs")
    _add_margin_flags(bench, fixed_quantile=False)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (DataError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
