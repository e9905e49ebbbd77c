"""Simulation drivers behind the ``cv-curve``, ``compare`` and ``bench`` commands.

Every driver takes an :class:`ExperimentConfig`, derives one independent
seed per replicate from ``config.seed`` and returns an
:class:`ExperimentReport` whose JSON form is ``{config, per_replicate,
summary}``.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hclda.cv import apparent_error, exact_loo_allocations, fast_loo_allocations
from hclda.errors import InvalidInput
from hclda.hierarchy import (
    MetaclassPartition,
    hierarchical_fit,
    select_partition,
    two_stage_fit,
    two_stage_predict,
)
from hclda.io import load_csv
from hclda.lda import LabeledDataset, class_statistics, classify, fit_lda
from hclda.regression import MAX_DENSE_N
from hclda.rng import ALGORITHM, make_rng, replicate_seeds
from hclda.simulate import MODEL1_CLASSES, draw_model2, model1_means, sample

log = logging.getLogger(__name__)

MODELS = ("model1", "model2", "csv")
DEFAULT_N = {"model1": 200, "model2": 600}


@dataclass
class ExperimentConfig:
    model: str = "model2"
    n: int | None = None
    p: int = 20
    J: int = 30
    D: int = 2
    delta: float = 1e-5
    seed: int = 0
    replicates: int = 10
    engine: str = "fast"
    loo_means: bool = True
    csv: str | None = None
    n_jobs: int = 1

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidInput(f"model must be one of {MODELS}, got {self.model!r}")
        if self.model == "model1":
            self.J, self.p = MODEL1_CLASSES, 2
        if self.n is None and self.model != "csv":
            self.n = DEFAULT_N[self.model]
        if self.delta < 0:
            raise InvalidInput(f"delta must be >= 0, got {self.delta}")
        if self.model != "csv" and self.n < 2 * self.J:
            raise InvalidInput(f"need n >= 2J = {2 * self.J}, got n={self.n}")
        if self.model == "csv" and not self.csv:
            raise InvalidInput("model 'csv' needs a csv path")
        if self.replicates < 1:
            raise InvalidInput("replicates must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rng"] = ALGORITHM
        return d


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    per_replicate: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)  # flat table for the CSV file
    columns: tuple = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "config": self.config,
            "per_replicate": self.per_replicate,
            "summary": self.summary,
        }

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        jpath = out / f"{self.kind}.json"
        cpath = out / f"{self.kind}.csv"
        jpath.write_text(json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n")
        with open(cpath, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            w.writerows(self.rows)
        return jpath, cpath


def standard_error(values) -> float | None:
    """Sample standard deviation over ``sqrt(count)``; ``None`` below two values."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return None
    return float(np.std(v, ddof=1) / np.sqrt(v.size))


def _mean_se(values) -> dict:
    return {"mean": float(np.mean(values)), "se": standard_error(values)}


@dataclass(frozen=True)
class Replicate:
    train: LabeledDataset
    test: LabeledDataset | None
    truth: MetaclassPartition | None


def make_replicate(config: ExperimentConfig, seed, with_test: bool = True, n: int | None = None) -> Replicate:
    """Draw train (and test) data for one replicate from its own seed."""
    n = config.n if n is None else n
    if config.model == "csv":
        return Replicate(load_csv(config.csv), None, None)
    rng = make_rng(seed)
    if config.model == "model1":
        means, truth = model1_means(), None
    else:
        m2 = draw_model2(rng, config.J, config.p)
        means, truth = m2.means, MetaclassPartition.from_blocks(m2.partition, config.J)
    train = sample(rng, means, n)
    test = sample(rng, means, n) if with_test else None
    return Replicate(train, test, truth)


def _map(config: ExperimentConfig, fn, items):
    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _seeds(config: ExperimentConfig):
    if config.model == "csv":
        return [None]
    return replicate_seeds(config.seed, config.replicates)


def cmd_cv_curve(config: ExperimentConfig) -> ExperimentReport:
    """CV error of the hierarchical merge as a function of the step ``t``."""

    def run(seed):
        rep = make_replicate(config, seed, with_test=False)
        return hierarchical_fit(rep.train, config.D, config.delta, config.engine, loo_means=config.loo_means)

    traces = _map(config, run, _seeds(config))
    report = ExperimentReport("cv_curve", config.to_dict(), columns=("replicate", "t", "merged", "cv"))
    for r, tr in enumerate(traces):
        d = tr.to_dict()
        report.per_replicate.append({"replicate": r, "selected_t": d["selected_t"], "steps": d["steps"]})
        for s in d["steps"]:
            merged = "" if s["merged"] is None else "+".join(map(str, s["merged"]))
            report.rows.append((r, s["t"], merged, s["cv"]))
    curves = np.array([tr.cv_values for tr in traces])
    report.summary = {
        "t": list(range(curves.shape[1])),
        "mean_cv": curves.mean(axis=0).tolist(),
        "se_cv": [standard_error(c) for c in curves.T],
        "selected_t": [tr.selected_t for tr in traces],
    }
    return report


def _test_error(pred, truth) -> float:
    return float(np.mean(np.asarray(pred) != truth))


def compare_replicate(config: ExperimentConfig, seed, dims, partition: MetaclassPartition | None = None) -> dict:
    """Test errors of LDA, CV-selected HLDA and a fixed partition for each ``D``."""
    rep = make_replicate(config, seed)
    train, test = rep.train, rep.test
    fixed = partition if partition is not None else rep.truth
    stats = class_statistics(train, config.delta)
    out = {"dims": list(dims), "lda": [], "hlda": [], "selected_t": [], "partition": []}
    for D in dims:
        model = fit_lda(stats, min(D, train.J - 1, train.p))
        out["lda"].append(_test_error(classify(model, test.X), test.y))
        trace = hierarchical_fit(train, D, config.delta, config.engine, loo_means=config.loo_means)
        chosen = select_partition(trace)
        hm = two_stage_fit(train, chosen, D, config.delta)
        out["hlda"].append(_test_error(two_stage_predict(hm, test.X), test.y))
        out["selected_t"].append(trace.selected_t)
        if fixed is not None:
            fm = two_stage_fit(train, fixed, D, config.delta)
            out["partition"].append(_test_error(two_stage_predict(fm, test.X), test.y))
    if fixed is None:
        del out["partition"]
    return out


def cmd_compare(config: ExperimentConfig, dims=(1, 2, 3, 4), partition=None) -> ExperimentReport:
    if config.model == "csv":
        raise InvalidInput("compare needs a generative model (model1 or model2)")
    dims = [int(d) for d in dims]
    results = _map(config, lambda s: compare_replicate(config, s, dims, partition), _seeds(config))
    methods = [m for m in ("lda", "hlda", "partition") if m in results[0]]
    report = ExperimentReport(
        "compare", config.to_dict(), per_replicate=[{"replicate": r, **res} for r, res in enumerate(results)],
        columns=("replicate", "D", "method", "test_error"),
    )
    for r, res in enumerate(results):
        for k, D in enumerate(dims):
            for m in methods:
                report.rows.append((r, D, m, res[m][k]))
    report.summary = {
        "dims": dims,
        **{m: [_mean_se([res[m][k] for res in results]) for k in range(len(dims))] for m in methods},
    }
    return report


def _timed(fn, *args):
    t0 = time.perf_counter()
    fn(*args)
    return time.perf_counter() - t0


def cmd_bench_timing(config: ExperimentConfig, p_grid, n_grid, runs: int = 3) -> ExperimentReport:
    """Wall time of fast and exact CV on Model 2 data over a ``(p, n)`` grid."""
    report = ExperimentReport(
        "bench_timing", {**config.to_dict(), "p_grid": list(p_grid), "n_grid": list(n_grid), "runs": runs},
        columns=("p", "n", "run", "fast_seconds", "exact_seconds"),
    )
    seeds = replicate_seeds(config.seed, runs)
    cells = []
    for p in p_grid:
        for n in n_grid:
            if n > MAX_DENSE_N:
                log.warning("skipping cell p=%d n=%d: n exceeds %d", p, n, MAX_DENSE_N)
                cells.append({"p": p, "n": n, "skipped": True})
                continue
            fast, exact = [], []
            cfg = ExperimentConfig("model2", n, p, config.J, config.D, config.delta, config.seed, 1)
            for r, s in enumerate(seeds):
                data = make_replicate(cfg, s, with_test=False).train
                fast.append(_timed(fast_loo_allocations, data, config.D, config.delta))
                exact.append(_timed(exact_loo_allocations, data, config.D, config.delta))
                report.rows.append((p, n, r, fast[-1], exact[-1]))
            cells.append({
                "p": p, "n": n, "skipped": False, "fast": fast, "exact": exact,
                "fast_stats": _spread(fast), "exact_stats": _spread(exact),
                "ratio": float(np.median(exact) / np.median(fast)),
            })
    report.per_replicate = cells
    report.summary = {"cells": [{k: c[k] for k in ("p", "n", "skipped") if k in c}
                                | ({"ratio": c["ratio"]} if not c["skipped"] else {}) for c in cells]}
    return report


def _spread(values) -> dict:
    return {"min": float(np.min(values)), "median": float(np.median(values)), "max": float(np.max(values))}


def cmd_bench_accuracy(config: ExperimentConfig, n_grid) -> ExperimentReport:
    """Fast CV, exact CV and apparent error on Model 2 as ``n`` grows.

    Replicate ``r`` uses the same class means at every ``n``.
    """
    report = ExperimentReport(
        "bench_accuracy", {**config.to_dict(), "n_grid": list(n_grid)},
        columns=("replicate", "n", "fast", "exact", "aer"),
    )
    seeds = replicate_seeds(config.seed, config.replicates)

    def run(seed):
        rows = []
        for n in n_grid:
            cfg = ExperimentConfig("model2", n, config.p, config.J, config.D, config.delta, config.seed, 1)
            data = make_replicate(cfg, seed, with_test=False).train
            rows.append((
                fast_loo_allocations(data, config.D, config.delta, loo_means=config.loo_means).error,
                exact_loo_allocations(data, config.D, config.delta).error,
                apparent_error(data, config.D, config.delta),
            ))
        return rows

    results = _map(config, run, seeds)
    for r, rows in enumerate(results):
        per = {"replicate": r, "n": list(n_grid), "fast": [], "exact": [], "aer": []}
        for n, (f, e, a) in zip(n_grid, rows):
            per["fast"].append(f)
            per["exact"].append(e)
            per["aer"].append(a)
            report.rows.append((r, n, f, e, a))
        report.per_replicate.append(per)
    arr = np.array(results)  # replicates x n x 3
    report.summary = {
        "n": list(n_grid),
        "fast": [_mean_se(c) for c in arr[:, :, 0].T],
        "exact": [_mean_se(c) for c in arr[:, :, 1].T],
        "aer": [_mean_se(c) for c in arr[:, :, 2].T],
        "mean_abs_gap": np.mean(np.abs(arr[:, :, 0] - arr[:, :, 1]), axis=0).tolist(),
    }
    return report
