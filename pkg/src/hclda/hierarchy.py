"""Metaclasses, two-stage LDA and the CV-driven hierarchical merge.

A two-stage classifier first routes a point to a metaclass (a block of
original classes) and then, inside blocks with more than one class, runs a
second LDA restricted to that block's observations.

Leave-one-out CV of the two-stage rule is assembled as

    correct_i = stage1_correct_i and stage2_correct_i

where stage 2 is validated only inside the true block of observation ``i``.
A point routed to the wrong block can never receive its own label, so this
equals full two-stage LOO scoring, and the stage-2 part depends only on the
block's content.  Those per-block results are memoized across the whole
merge search.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

import numpy as np

from hclda.cv import FastCvWorkspace, exact_loo_allocations
from hclda.errors import InsufficientData, InvalidDataset, InvalidInput, InvalidPartition, NumericalError
from hclda.lda import DiscriminantModel, LabeledDataset, class_statistics, fit_lda, nearest_centroid

log = logging.getLogger(__name__)

ENGINES = ("fast", "exact")


@dataclass(frozen=True)
class MetaclassPartition:
    """Disjoint blocks of class labels covering ``1..J``.

    Blocks are kept sorted internally and ordered by their smallest label,
    which is also the block's representative.
    """

    blocks: tuple
    J: int

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(int(c) for c in b)) for b in self.blocks), key=lambda b: b[0] if b else 0))
        if any(len(b) == 0 for b in blocks):
            raise InvalidPartition("blocks must be nonempty")
        flat = [c for b in blocks for c in b]
        if len(flat) != len(set(flat)):
            raise InvalidPartition("blocks overlap")
        if set(flat) != set(range(1, self.J + 1)):
            missing = sorted(set(range(1, self.J + 1)) - set(flat))
            extra = sorted(set(flat) - set(range(1, self.J + 1)))
            raise InvalidPartition(f"blocks must cover 1..{self.J} exactly (missing {missing}, unknown {extra})")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], J: int | None = None) -> "MetaclassPartition":
        blocks = [list(b) for b in blocks]
        if J is None:
            J = max((max(b) for b in blocks if b), default=0)
        return cls(tuple(blocks), int(J))

    @classmethod
    def singletons(cls, J: int) -> "MetaclassPartition":
        return cls(tuple((j,) for j in range(1, J + 1)), J)

    @classmethod
    def one_block(cls, J: int) -> "MetaclassPartition":
        return cls((tuple(range(1, J + 1)),), J)

    @property
    def m(self) -> int:
        return len(self.blocks)

    @property
    def groups(self) -> np.ndarray:
        """``groups[j - 1]`` is the 1-based block index of class ``j``."""
        g = np.zeros(self.J, dtype=np.int64)
        for k, b in enumerate(self.blocks):
            g[np.asarray(b) - 1] = k + 1
        return g

    def merge(self, a: int, b: int) -> "MetaclassPartition":
        """Merge blocks at positions ``a`` and ``b``."""
        merged = self.blocks[a] + self.blocks[b]
        rest = [blk for k, blk in enumerate(self.blocks) if k not in (a, b)]
        return MetaclassPartition(tuple(rest) + (merged,), self.J)

    def refines(self, other: "MetaclassPartition") -> bool:
        """True if every block of ``self`` lies inside a block of ``other``."""
        g = other.groups
        return all(len({g[c - 1] for c in b}) == 1 for b in self.blocks)

    def to_list(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]


def relabel(data: LabeledDataset, partition: MetaclassPartition) -> LabeledDataset:
    if partition.J != data.J:
        raise InvalidPartition(f"partition covers {partition.J} classes, data has {data.J}")
    return LabeledDataset(data.X, partition.groups[data.y - 1], partition.m)


def _effective_dim(D: int, J: int, p: int) -> int:
    return min(D, J - 1, p)


# --------------------------------------------------------------------------
# two-stage classifier
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoStageModel:
    partition: MetaclassPartition
    stage1: DiscriminantModel | None  # None when the partition is a single block
    stage2: dict = field(default_factory=dict)  # block position -> model over original labels
    D: int = 1
    delta: float = 0.0
    p: int = 0

    def effective_dims(self) -> dict:
        return {k: m.D for k, m in self.stage2.items()}


def two_stage_fit(data: LabeledDataset, partition: MetaclassPartition, D: int, delta: float) -> TwoStageModel:
    if partition.J != data.J:
        raise InvalidPartition(f"partition covers {partition.J} classes, data has {data.J}")
    stage1 = None
    if partition.m >= 2:
        meta = relabel(data, partition)
        stage1 = fit_lda(class_statistics(meta, delta), _effective_dim(D, partition.m, data.p))
    stage2 = {}
    for k, block in enumerate(partition.blocks):
        if len(block) < 2:
            continue
        rows = np.flatnonzero(np.isin(data.y, block))
        if rows.size < 2:
            raise InsufficientData(f"block {list(block)} has {rows.size} observation(s)")
        sub = data.subset(rows)
        stage2[k] = fit_lda(class_statistics(sub, delta), _effective_dim(D, len(block), data.p), labels=block)
    return TwoStageModel(partition, stage1, stage2, int(D), float(delta), data.p)


def two_stage_predict(model: TwoStageModel, x):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != model.p:
        raise InvalidInput(f"expected input with p={model.p} features, got shape {np.shape(x)}")
    if model.stage1 is None:
        route = np.zeros(X.shape[0], dtype=np.int64)
    else:
        s1 = model.stage1
        route = nearest_centroid(X @ s1.T, s1.centroids)
    out = np.empty(X.shape[0], dtype=np.int64)
    for k, block in enumerate(model.partition.blocks):
        hit = route == k
        if not hit.any():
            continue
        if len(block) == 1:
            out[hit] = block[0]
        else:
            s2 = model.stage2[k]
            out[hit] = np.asarray(s2.labels)[nearest_centroid(X[hit] @ s2.T, s2.centroids)]
    return out[0].item() if single else out


# --------------------------------------------------------------------------
# CV of the two-stage rule
# --------------------------------------------------------------------------


class TwoStageCv:
    """Leave-one-out correctness masks for two-stage rules on one dataset.

    With the fast engine a single ridge factorization of the full data serves
    every stage-1 evaluation; stage-2 masks are memoized by block content.
    The memo tolerates concurrent use: racing inserts store identical values.
    """

    def __init__(self, data: LabeledDataset, D: int, delta: float, engine: str = "fast", loo_means: bool = True):
        if engine not in ENGINES:
            raise InvalidInput(f"engine must be one of {ENGINES}, got {engine!r}")
        if data.J < 2:
            raise InvalidDataset("need at least two classes")
        self.data = data
        self.D = int(D)
        self.delta = float(delta)
        self.engine = engine
        self.loo_means = loo_means
        self._ws = FastCvWorkspace(data, delta) if engine == "fast" else None
        self._blocks: dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()

    def _mask(self, data: LabeledDataset, groups=None, m=None, ws=None) -> np.ndarray:
        m = data.J if m is None else m
        if m == 1:
            return np.ones(data.n, dtype=bool)
        D = _effective_dim(self.D, m, data.p)
        if self.engine == "fast":
            ws = ws if ws is not None else FastCvWorkspace(data, self.delta)
            return ws.loo(groups, D, self.loo_means).correct
        if groups is not None:
            data = LabeledDataset(data.X, np.asarray(groups)[data.y - 1], m)
        return exact_loo_allocations(data, D, self.delta).correct

    def plain(self) -> np.ndarray:
        """Mask of ordinary LDA on the original classes."""
        return self._mask(self.data, ws=self._ws)

    def stage1(self, partition: MetaclassPartition) -> np.ndarray:
        if partition.m == partition.J:
            return self.plain()
        return self._mask(self.data, partition.groups, partition.m, ws=self._ws)

    def block(self, block: tuple) -> np.ndarray:
        """Stage-2 mask over the rows of ``block`` (in data order)."""
        block = tuple(sorted(block))
        hit = self._blocks.get(block)
        if hit is not None:
            return hit
        mask = self.block_uncached(block)
        with self._lock:
            return self._blocks.setdefault(block, mask)

    def block_uncached(self, block: tuple) -> np.ndarray:
        if len(block) == self.data.J:
            return self.plain()
        rows = np.flatnonzero(np.isin(self.data.y, block))
        return self._mask(self.data.subset(rows))

    def correct(self, partition: MetaclassPartition) -> np.ndarray:
        ok = self.stage1(partition).copy()
        for block in partition.blocks:
            if len(block) > 1:
                rows = np.isin(self.data.y, block)
                ok[rows] &= self.block(block)
        return ok

    def error(self, partition: MetaclassPartition) -> float:
        return float(np.mean(~self.correct(partition)))


def two_stage_cv(
    data: LabeledDataset,
    partition: MetaclassPartition,
    D: int,
    delta: float,
    engine: str = "fast",
    loo_means: bool = True,
) -> float:
    return TwoStageCv(data, D, delta, engine, loo_means).error(partition)


# --------------------------------------------------------------------------
# hierarchical merge
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MergeStep:
    t: int
    merged: tuple | None  # representatives (smallest labels) of the merged blocks
    partition: MetaclassPartition
    cv: float


@dataclass(frozen=True)
class MergeTrace:
    steps: tuple
    D: int
    delta: float
    engine: str

    @property
    def cv_values(self) -> np.ndarray:
        return np.array([s.cv for s in self.steps])

    @property
    def selected_t(self) -> int:
        return int(np.argmin(self.cv_values))

    def to_dict(self) -> dict:
        return {
            "D": self.D,
            "delta": self.delta,
            "engine": self.engine,
            "selected_t": self.selected_t,
            "steps": [
                {
                    "t": s.t,
                    "merged": list(s.merged) if s.merged else None,
                    "blocks": s.partition.to_list(),
                    "cv": s.cv if np.isfinite(s.cv) else None,
                }
                for s in self.steps
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MergeTrace":
        steps = []
        for s in d["steps"]:
            part = MetaclassPartition.from_blocks(s["blocks"])
            merged = tuple(s["merged"]) if s["merged"] else None
            cv = float("inf") if s["cv"] is None else float(s["cv"])
            steps.append(MergeStep(int(s["t"]), merged, part, cv))
        return cls(tuple(steps), int(d["D"]), float(d["delta"]), d["engine"])


def _safe_error(cv: TwoStageCv, partition: MetaclassPartition) -> float:
    try:
        return cv.error(partition)
    except NumericalError as exc:
        log.warning("candidate %s skipped: %s", partition.to_list(), exc)
        return float("inf")


def hierarchical_fit(
    data: LabeledDataset,
    D: int,
    delta: float,
    engine: str = "fast",
    *,
    loo_means: bool = True,
    n_jobs: int = 1,
) -> MergeTrace:
    """Greedy merge of metaclasses minimizing two-stage LOO CV.

    Step ``t`` holds ``J - t`` blocks; ``t = 0`` is plain LDA and
    ``t = J - 1`` the single-block rule.  Ties between candidate merges go to
    the lexicographically smallest pair of block representatives.
    """
    if data.J < 2:
        raise InvalidDataset("hierarchical fit needs at least two classes")
    cv = TwoStageCv(data, D, delta, engine, loo_means)
    part = MetaclassPartition.singletons(data.J)
    steps = [MergeStep(0, None, part, _safe_error(cv, part))]
    pool = ThreadPoolExecutor(n_jobs) if n_jobs > 1 else None
    try:
        for t in range(data.J - 1):
            pairs = list(combinations(range(part.m), 2))
            candidates = [part.merge(a, b) for a, b in pairs]
            if pool is None:
                values = [_safe_error(cv, c) for c in candidates]
            else:
                values = list(pool.map(lambda c: _safe_error(cv, c), candidates))
            best = int(np.argmin(values))
            a, b = pairs[best]
            merged = (part.blocks[a][0], part.blocks[b][0])
            part = candidates[best]
            steps.append(MergeStep(t + 1, merged, part, float(values[best])))
            log.debug("t=%d merged %s cv=%.4f", t + 1, merged, values[best])
    finally:
        if pool is not None:
            pool.shutdown()
    return MergeTrace(tuple(steps), int(D), float(delta), engine)


def select_partition(trace: MergeTrace) -> MetaclassPartition:
    """Partition at the CV minimum; ties resolve to the fewest merges."""
    return trace.steps[trace.selected_t].partition
