"""CSV datasets and JSON model files."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from hclda.errors import InvalidDataset, ParseError
from hclda.hierarchy import MetaclassPartition, TwoStageModel
from hclda.lda import DiscriminantModel, LabeledDataset

MODEL_VERSION = 1
LABEL_COLUMN = "label"


def _float(value: str, row: int, col: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"row {row}: column {col!r} is not numeric ({value!r})") from None


def _encode_labels(raw: list[str]):
    try:
        ints = [int(v) for v in raw]
    except ValueError:
        names = sorted(set(raw))
        lookup = {v: k + 1 for k, v in enumerate(names)}
        return np.array([lookup[v] for v in raw]), tuple(names)
    names = sorted(set(ints))
    lookup = {v: k + 1 for k, v in enumerate(names)}
    return np.array([lookup[v] for v in ints]), tuple(names)


def read_feature_rows(path, expect_label: bool):
    """Header, labels (or None) and the float feature matrix of a CSV file."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], None, np.zeros((0, 0))
    header = [h.strip() for h in rows[0]]
    if expect_label and LABEL_COLUMN not in header:
        raise ParseError(f"missing required column {LABEL_COLUMN!r} in header {header}")
    li = header.index(LABEL_COLUMN) if LABEL_COLUMN in header else None
    feat_cols = [k for k in range(len(header)) if k != li]
    labels, feats = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"row {r}: expected {len(header)} fields, got {len(row)}")
        if li is not None:
            labels.append(row[li].strip())
        feats.append([_float(row[k], r, header[k]) for k in feat_cols])
    X = np.array(feats, dtype=float).reshape(len(feats), len(feat_cols))
    return [header[k] for k in feat_cols], (labels if li is not None else None), X


def load_csv(path) -> LabeledDataset:
    """Labeled dataset from a CSV with a ``label`` column and numeric features."""
    _, labels, X = read_feature_rows(path, expect_label=True)
    if not labels:
        raise ParseError(f"{path}: no observations")
    y, names = _encode_labels(labels)
    if len(names) < 2:
        raise ParseError(f"{path}: only one class ({names[0]!r}) present")
    try:
        return LabeledDataset(X, y, len(names), names)
    except InvalidDataset as exc:
        raise ParseError(f"{path}: {exc}") from None


def save_csv(data: LabeledDataset, path) -> None:
    names = data.class_names or tuple(range(1, data.J + 1))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([LABEL_COLUMN] + [f"x{k + 1}" for k in range(data.p)])
        for yi, row in zip(data.y, data.X):
            w.writerow([names[yi - 1]] + [repr(float(v)) for v in row])


def _lda_to_dict(m: DiscriminantModel) -> dict:
    return {
        "T": m.T.tolist(),
        "lambdas": m.lambdas.tolist(),
        "centroids": m.centroids.tolist(),
        "labels": [int(v) for v in m.labels],
    }


def _lda_from_dict(d: dict, delta: float) -> DiscriminantModel:
    T = np.array(d["T"], dtype=float)
    cen = np.array(d["centroids"], dtype=float).reshape(len(d["labels"]), T.shape[1])
    return DiscriminantModel(T, np.array(d["lambdas"], dtype=float), cen, delta, tuple(d["labels"]))


def model_to_dict(model: TwoStageModel, class_names=None) -> dict:
    return {
        "version": MODEL_VERSION,
        "delta": model.delta,
        "D": model.D,
        "p": model.p,
        "partition": model.partition.to_list(),
        "class_names": list(class_names) if class_names is not None else None,
        "stage1": _lda_to_dict(model.stage1) if model.stage1 is not None else None,
        "stage2": [dict(block=k, **_lda_to_dict(m)) for k, m in sorted(model.stage2.items())],
    }


def model_from_dict(d: dict) -> tuple[TwoStageModel, tuple | None]:
    if d.get("version") != MODEL_VERSION:
        raise ParseError(f"unsupported model version {d.get('version')!r}")
    delta = float(d["delta"])
    part = MetaclassPartition.from_blocks(d["partition"])
    stage1 = _lda_from_dict(d["stage1"], delta) if d["stage1"] is not None else None
    stage2 = {int(s["block"]): _lda_from_dict(s, delta) for s in d["stage2"]}
    names = tuple(d["class_names"]) if d.get("class_names") is not None else None
    return TwoStageModel(part, stage1, stage2, int(d["D"]), delta, int(d["p"])), names


def save_model(model: TwoStageModel, path, class_names=None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, class_names), indent=1))


def load_model(path) -> tuple[TwoStageModel, tuple | None]:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(d)
