"""Ridge-regularized multiclass LDA and the nearest-centroid rule.

Scatter matrices are normalized by ``1/n`` and the ridge enters as
``S_W + (delta / n) I``; the regression identities in
:mod:`hclda.regression` depend on exactly this scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from hclda.errors import InvalidDataset, InvalidDimension, InvalidInput, SingularMatrix

# smallest/largest eigenvalue ratio below which a matrix is treated as singular
PD_RTOL = 1e-12
SIGN_ATOL = 1e-12


@dataclass(frozen=True)
class LabeledDataset:
    """``n`` observations of ``p`` features with labels in ``1..J``.

    ``class_names`` optionally records the original label of each class
    index (e.g. strings read from a CSV file).
    """

    X: np.ndarray
    y: np.ndarray
    J: int = 0
    class_names: tuple | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y)
        if X.ndim != 2:
            raise InvalidDataset(f"X must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise InvalidDataset("y must be a vector with one label per row of X")
        if X.shape[0] == 0:
            raise InvalidDataset("dataset has no observations")
        if not np.all(np.isfinite(X)):
            raise InvalidDataset("X contains non-finite entries")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise InvalidDataset("labels must be integers")
        y = y.astype(np.int64)
        J = int(self.J) if self.J else int(y.max())
        if y.min() < 1 or y.max() > J:
            raise InvalidDataset(f"labels must lie in 1..{J}")
        counts = np.bincount(y - 1, minlength=J)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            raise InvalidDataset(f"classes with no observations: {(empty + 1).tolist()}")
        if self.class_names is not None and len(self.class_names) != J:
            raise InvalidDataset("class_names must have one entry per class")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "J", J)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.y - 1, minlength=self.J)

    def subset(self, rows) -> "LabeledDataset":
        """Rows ``rows`` with labels compacted to ``1..J'`` in increasing order."""
        rows = np.asarray(rows)
        y = self.y[rows]
        present = np.unique(y)
        remap = np.zeros(self.J + 1, dtype=np.int64)
        remap[present] = np.arange(1, present.size + 1)
        names = None
        if self.class_names is not None:
            names = tuple(self.class_names[k - 1] for k in present)
        return LabeledDataset(self.X[rows], remap[y], present.size, names)


@dataclass(frozen=True)
class ClassStatistics:
    counts: np.ndarray
    means: np.ndarray  # J x p
    grand_mean: np.ndarray
    S_B: np.ndarray
    S_W: np.ndarray
    delta: float
    n: int

    @property
    def J(self) -> int:
        return self.counts.shape[0]

    @property
    def p(self) -> int:
        return self.means.shape[1]

    @property
    def S_Wd(self) -> np.ndarray:
        return self.S_W + (self.delta / self.n) * np.eye(self.p)


@dataclass(frozen=True)
class DiscriminantModel:
    """Fitted projection ``T`` (p x D) with class centroids in the projected space.

    ``eigvecs`` holds the eigenvectors ``s_d`` of the whitened between-class
    matrix; ``T = S_Wd^{-1/2} eigvecs``.
    """

    T: np.ndarray
    lambdas: np.ndarray
    centroids: np.ndarray  # J x D
    delta: float
    labels: tuple = field(default=())
    eigvecs: np.ndarray | None = None

    @property
    def D(self) -> int:
        return self.T.shape[1]

    @property
    def p(self) -> int:
        return self.T.shape[0]


def class_statistics(data: LabeledDataset, delta: float = 0.0) -> ClassStatistics:
    if delta < 0 or not np.isfinite(delta):
        raise InvalidInput(f"delta must be a finite nonnegative number, got {delta}")
    X, idx = data.X, data.y - 1
    n, p, J = data.n, data.p, data.J
    counts = np.bincount(idx, minlength=J)
    if np.any(counts == 0):
        raise InvalidDataset("every class needs at least one observation")
    sums = np.zeros((J, p))
    np.add.at(sums, idx, X)
    means = sums / counts[:, None]
    grand = counts @ means / n
    R = X - means[idx]
    S_W = R.T @ R / n
    C = np.sqrt(counts)[:, None] * (means - grand)
    S_B = C.T @ C / n
    return ClassStatistics(counts, means, grand, _sym(S_B), _sym(S_W), float(delta), n)


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _check_spd(w: np.ndarray) -> None:
    top = w[-1]
    if not top > 0 or w[0] <= PD_RTOL * top:
        raise SingularMatrix(
            f"matrix is not safely positive definite (eigenvalues in [{w[0]:.3g}, {top:.3g}]); "
            "increase delta"
        )


def inv_sqrt_sym(M: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root ``R`` with ``R M R = I``."""
    w, V = np.linalg.eigh(_sym(np.asarray(M, dtype=float)))
    _check_spd(w)
    return _sym((V / np.sqrt(w)) @ V.T)


def sqrt_sym(M: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(_sym(np.asarray(M, dtype=float)))
    _check_spd(w)
    return _sym((V * np.sqrt(w)) @ V.T)


def _fix_signs(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for d in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, d]) > SIGN_ATOL)
        if nz.size and V[nz[0], d] < 0:
            V[:, d] = -V[:, d]
    return V


def top_eigenpairs(S_B: np.ndarray, S_Wd: np.ndarray, D: int):
    """Largest ``D`` eigenpairs of ``S_Wd^{-1/2} S_B S_Wd^{-1/2}``.

    Returns ``(lambdas, s, R)`` where ``R = S_Wd^{-1/2}``; eigenvalues are
    sorted in decreasing order and clipped at zero.
    """
    R = inv_sqrt_sym(S_Wd)
    w, V = np.linalg.eigh(_sym(R @ S_B @ R))
    order = np.argsort(w)[::-1][:D]
    lambdas = np.maximum(w[order], 0.0)
    return lambdas, _fix_signs(V[:, order]), R


def max_dimension(J: int, p: int) -> int:
    return min(J - 1, p)


def fit_lda(stats: ClassStatistics, D: int, labels: Sequence | None = None) -> DiscriminantModel:
    D = int(D)
    if D < 1 or D > max_dimension(stats.J, stats.p):
        raise InvalidDimension(
            f"D={D} must satisfy 1 <= D <= min(J-1, p) = {max_dimension(stats.J, stats.p)}"
        )
    lambdas, s, R = top_eigenpairs(stats.S_B, stats.S_Wd, D)
    T = R @ s
    if labels is None:
        labels = tuple(range(1, stats.J + 1))
    return DiscriminantModel(T, lambdas, stats.means @ T, stats.delta, tuple(labels), s)


def lda(data: LabeledDataset, D: int, delta: float = 0.0) -> DiscriminantModel:
    """Convenience wrapper: statistics followed by :func:`fit_lda`."""
    return fit_lda(class_statistics(data, delta), D)


def _as_rows(model: DiscriminantModel, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.ndim != 2 or x.shape[1] != model.p:
        raise InvalidInput(f"expected input with {model.p} features, got shape {np.shape(x)}")
    return x, single


def transform(model: DiscriminantModel, x) -> np.ndarray:
    rows, single = _as_rows(model, x)
    Z = rows @ model.T
    return Z[0] if single else Z


def nearest_centroid(Z: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Row index of the closest centroid; ties go to the lowest index."""
    d2 = ((Z[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def classify(model: DiscriminantModel, x):
    """Label of the nearest projected centroid for one point or a matrix of rows."""
    rows, single = _as_rows(model, x)
    k = nearest_centroid(rows @ model.T, model.centroids)
    out = np.asarray(model.labels)[k]
    return out[0].item() if single else out
