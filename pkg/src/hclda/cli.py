"""Command-line interface: ``hclda <command> [options]``.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from hclda.errors import InputError, InvalidInput, NumericalError
from hclda.experiments import (
    ExperimentConfig,
    cmd_bench_accuracy,
    cmd_bench_timing,
    cmd_compare,
    cmd_cv_curve,
    make_replicate,
)
from hclda.hierarchy import MetaclassPartition, hierarchical_fit, select_partition, two_stage_fit, two_stage_predict
from hclda.io import load_model, read_feature_rows, save_csv, save_model
from hclda.rng import replicate_seeds

log = logging.getLogger("hclda")


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=("model1", "model2", "csv"), default="model2")
    p.add_argument("--csv", help="labeled CSV dataset (implies --model csv)")
    p.add_argument("--n", type=int, help="observations per sample")
    p.add_argument("--p", type=int, default=20, help="feature dimension (Model 2)")
    p.add_argument("--classes", type=int, default=30, help="number of classes J (Model 2)")
    p.add_argument("--dim", type=int, default=2, help="projected dimension D")
    p.add_argument("--delta", type=float, default=1e-5, help="ridge parameter")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--engine", choices=("fast", "exact"), default="fast")
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--loo-means", type=_bool, default=True, metavar="BOOL",
                   help="use leave-one-out class means in fast CV (default true)")
    p.add_argument("--jobs", type=int, default=1, help="parallel replicates")
    p.add_argument("--out", default="out", help="output directory")


def _config(args) -> ExperimentConfig:
    model = "csv" if args.csv else args.model
    return ExperimentConfig(
        model=model, n=args.n, p=args.p, J=args.classes, D=args.dim, delta=args.delta,
        seed=args.seed, replicates=args.replicates, engine=args.engine,
        loo_means=args.loo_means, csv=args.csv, n_jobs=args.jobs,
    )


def run_fit(args) -> int:
    cfg = _config(args)
    seed = None if cfg.model == "csv" else replicate_seeds(cfg.seed, 1)[0]
    data = make_replicate(cfg, seed, with_test=False).train
    trace = hierarchical_fit(data, cfg.D, cfg.delta, cfg.engine, loo_means=cfg.loo_means)
    part = select_partition(trace)
    model = two_stage_fit(data, part, cfg.D, cfg.delta)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.json", data.class_names)
    (out / "trace.json").write_text(json.dumps(trace.to_dict(), indent=1) + "\n")
    print(f"selected t={trace.selected_t} cv={trace.cv_values[trace.selected_t]:.4f} "
          f"blocks={part.m}; wrote {out / 'model.json'}")
    return 0


def run_predict(args) -> int:
    model, names = load_model(args.model_path)
    header, _, X = read_feature_rows(args.input, expect_label=False)
    if not header and X.size == 0:
        return 0
    if X.shape[1] != model.p:
        raise InvalidInput(f"input has {X.shape[1]} feature columns, model expects p={model.p}")
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["label"])
        if X.shape[0]:
            for k in two_stage_predict(model, X):
                w.writerow([names[k - 1] if names else k])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def run_cv_curve(args) -> int:
    report = cmd_cv_curve(_config(args))
    paths = report.write(args.out)
    print(f"selected t per replicate: {report.summary['selected_t']}; wrote {paths[0]}")
    return 0


def run_compare(args) -> int:
    partition = None
    if args.partition:
        blocks = json.loads(Path(args.partition).read_text())
        partition = MetaclassPartition.from_blocks(blocks)
    report = cmd_compare(_config(args), _ints(args.dims), partition)
    paths = report.write(args.out)
    for m in ("lda", "hlda", "partition"):
        if m in report.summary:
            means = [round(c["mean"], 4) for c in report.summary[m]]
            print(f"{m:>9}: {means}")
    print(f"wrote {paths[0]}")
    return 0


def run_bench(args) -> int:
    cfg = _config(args)
    if args.mode == "timing":
        report = cmd_bench_timing(cfg, _ints(args.p_grid), _ints(args.n_grid), args.runs)
        for c in report.summary["cells"]:
            print(c)
    else:
        report = cmd_bench_accuracy(cfg, _ints(args.n_grid))
        print("mean |fast - exact|:", [round(g, 4) for g in report.summary["mean_abs_gap"]])
    paths = report.write(args.out)
    print(f"wrote {paths[0]}")
    return 0


def run_simulate(args) -> int:
    cfg = _config(args)
    rep = make_replicate(cfg, replicate_seeds(cfg.seed, 1)[0], with_test=False)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(rep.train, out)
    print(f"wrote {rep.train.n} rows to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hclda", description="Hierarchical clustered multiclass LDA")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="hierarchical fit; writes model.json and trace.json")
    _add_common(p)
    p.set_defaults(func=run_fit)

    p = sub.add_parser("predict", help="predict labels for a CSV of features")
    p.add_argument("model_path")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.set_defaults(func=run_predict)

    p = sub.add_parser("cv-curve", help="CV error against merge step t")
    _add_common(p)
    p.set_defaults(func=run_cv_curve)

    p = sub.add_parser("compare", help="test error of LDA, HLDA and a fixed partition against D")
    _add_common(p)
    p.add_argument("--dims", default="1,2,3,4")
    p.add_argument("--partition", help="JSON list of blocks; Model 2 defaults to the 3-block truth")
    p.set_defaults(func=run_compare)

    p = sub.add_parser("bench", help="fast vs exact CV: timing grid or accuracy against n")
    _add_common(p)
    p.add_argument("--mode", choices=("timing", "accuracy"), default="timing")
    p.add_argument("--p-grid", default="50,100,200,500")
    p.add_argument("--n-grid", default="2000")
    p.add_argument("--runs", type=int, default=3)
    p.set_defaults(func=run_bench)

    p = sub.add_parser("simulate", help="write one simulated dataset as CSV")
    _add_common(p)
    p.set_defaults(func=run_simulate, out="data.csv")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
