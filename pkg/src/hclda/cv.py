"""Leave-one-out cross-validation of ridge LDA.

Two engines share the :class:`CvResult` output:

* :func:`exact_loo_allocations` refits the eigenproblem without each
  observation (``O(p^3)`` per observation) and is the reference oracle.
* :func:`fast_loo_allocations` works from a single ridge factorization.
  Deleting row ``i`` from the regression is a rank-one downdate, so the
  leave-one-out coefficients are ``alpha + a_i c_i`` with
  ``a_i = (yhat_i - y_i) / (1 - h_ii)``.  Responses are kept at their
  full-data values, which makes the result approximate but consistent as
  the class sizes grow.

Everything the fast engine needs per observation is an inner product
against a handful of ``n x J`` aggregates of the hat matrix, so the whole
sweep is vectorized over observations.  Merging classes into metaclasses
only sums columns of those aggregates, which is what makes the hierarchical
search affordable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from hclda.errors import DegenerateEigenvalue, InvalidDimension, LeverageOverflow
from hclda.lda import (
    LabeledDataset,
    class_statistics,
    classify,
    fit_lda,
    nearest_centroid,
    top_eigenpairs,
)
from hclda.regression import HatMatrixBundle, hat_bundle, response_scores

LEVERAGE_GUARD = 1e-10


@dataclass(frozen=True)
class CvResult:
    allocations: np.ndarray
    truth: np.ndarray

    @property
    def correct(self) -> np.ndarray:
        return self.allocations == self.truth

    @property
    def error(self) -> float:
        return cv_error(self)


def cv_error(result: CvResult) -> float:
    n = len(result.truth)
    return float(np.count_nonzero(result.allocations != result.truth)) / n if n else 0.0


def _check_dimension(D: int, J: int, p: int) -> None:
    if D < 1 or D > min(J - 1, p):
        raise InvalidDimension(f"D={D} must satisfy 1 <= D <= min(J-1, p) = {min(J - 1, p)}")


# --------------------------------------------------------------------------
# exact oracle
# --------------------------------------------------------------------------


def exact_loo_allocations(data: LabeledDataset, D: int, delta: float) -> CvResult:
    """Brute-force leave-one-out CV.

    Class sums and the within-class scatter are downdated exactly for each
    deleted row; the whitening and the eigendecomposition are recomputed
    from scratch.  If the deleted row is the only member of its class the
    allocation is made among the surviving classes (and is therefore wrong).
    """
    if data.J == 1:
        return CvResult(data.y.copy(), data.y)
    _check_dimension(D, data.J, data.p)
    X, idx = data.X, data.y - 1
    n, p, J = data.n, data.p, data.J
    counts = np.bincount(idx, minlength=J).astype(float)
    sums = np.zeros((J, p))
    np.add.at(sums, idx, X)
    means = sums / counts[:, None]
    resid = X - means[idx]
    scatter = resid.T @ resid
    total = sums.sum(axis=0)
    eye = np.eye(p)
    alloc = np.empty(n, dtype=np.int64)
    for i in range(n):
        j = idx[i]
        x = X[i]
        cnt = counts.copy()
        mu = means.copy()
        if cnt[j] > 1:
            u = x - means[j]
            sc = scatter - (cnt[j] / (cnt[j] - 1)) * np.outer(u, u)
            mu[j] = (sums[j] - x) / (cnt[j] - 1)
            cnt[j] -= 1
            alive = np.arange(J)
        else:
            sc = scatter
            alive = np.flatnonzero(np.arange(J) != j)
        cnt, mu = cnt[alive], mu[alive]
        m = n - 1
        Dm = min(D, alive.size - 1, p)
        if Dm < 1:
            alloc[i] = alive[0] + 1
            continue
        grand = (total - x) / m
        C = np.sqrt(cnt)[:, None] * (mu - grand)
        S_B = C.T @ C / m
        S_Wd = sc / m + (delta / m) * eye
        _, s, R = top_eigenpairs(S_B, S_Wd, Dm)
        T = R @ s
        k = nearest_centroid((x @ T)[None, :], mu @ T)[0]
        alloc[i] = alive[k] + 1
    return CvResult(alloc, data.y)


# --------------------------------------------------------------------------
# fast approximate engine
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FastLooDetail:
    """Per-observation intermediates of the fast sweep (all ``n x D``)."""

    a: np.ndarray  # (yhat_i - y_i) / (1 - h_ii)
    self_proj: np.ndarray  # xt_i^T alpha*(-i)
    sumsq: np.ndarray  # sum_{k != i} (xt_k^T alpha*(-i))^2
    beta_sq: np.ndarray  # |beta*(-i)|^2
    lambdas: np.ndarray  # lambda*(-i)
    class_proj: np.ndarray  # n x m x D class-mean projections
    scores: np.ndarray  # n x m allocation scores, inf for excluded classes


class FastCvWorkspace:
    """Label-aware aggregates of one ridge factorization.

    Built once per ``(X, delta, base labels)``.  :meth:`loo` evaluates any
    grouping of the base classes into metaclasses without touching the
    ``n x n`` hat matrix.
    """

    def __init__(self, data: LabeledDataset, delta: float, bundle: HatMatrixBundle | None = None):
        self.data = data
        self.delta = float(delta)
        self.bundle = bundle if bundle is not None else hat_bundle(data, delta)
        h = self.bundle.leverages
        worst = int(np.argmax(h))
        if h[worst] >= 1.0 - LEVERAGE_GUARD:
            raise LeverageOverflow(
                f"observation {worst} has leverage {h[worst]:.12f}; it is fitted exactly, "
                "so its leave-one-out update is undefined (increase delta)"
            )

    @cached_property
    def _aggregates(self):
        b = self.bundle
        idx = self.data.y - 1
        ind = np.zeros((b.n, self.data.J))
        ind[np.arange(b.n), idx] = 1.0
        A = b.XC.T @ ind  # C^{-1} Xt^T Ind, (p+1) x J
        K = b.Xt @ A  # H Ind
        G = b.Xt.T @ b.Xt
        K2 = b.XC @ (G @ A)  # H H Ind
        hh = np.einsum("ij,ij->i", b.XC @ G, b.XC)  # diag(H H)
        Cb = b.XC[:, 1:]
        PA = Cb @ A[1:]
        Agram = A[1:].T @ A[1:]
        cn2 = np.einsum("ij,ij->i", Cb, Cb)
        return K, K2, hh, PA, Agram, cn2

    def loo(
        self, groups: np.ndarray | None = None, D: int = 1, loo_means: bool = True
    ) -> CvResult:
        """Fast LOO allocations for base classes grouped by ``groups``.

        ``groups[j]`` is the metaclass (``1..m``) of base class ``j + 1``;
        ``None`` keeps the base classes.  ``D`` must satisfy
        ``D <= min(m - 1, p)``; the two-stage code caps it before calling.
        """
        detail, truth = self.loo_detail(groups, D, loo_means)
        if detail is None:
            return CvResult(truth.copy(), truth)
        return CvResult(np.argmin(detail.scores, axis=1) + 1, truth)

    def loo_detail(self, groups=None, D: int = 1, loo_means: bool = True):
        data = self.data
        if groups is None:
            lab = data.y
            m = data.J
        else:
            groups = np.asarray(groups, dtype=np.int64)
            lab = groups[data.y - 1]
            m = int(groups.max())
        if m == 1:
            return None, lab
        _check_dimension(D, m, data.p)
        meta = LabeledDataset(data.X, lab, m)
        stats = class_statistics(meta, self.delta)
        model = fit_lda(stats, D)
        xi = response_scores(stats, model)  # m x D
        K, K2, hh, PA, Agram, cn2 = self._aggregates
        if groups is not None:
            M = np.zeros((data.J, m))
            M[np.arange(data.J), groups - 1] = 1.0
            K, K2, PA, Agram = K @ M, K2 @ M, PA @ M, M.T @ Agram @ M
        n = data.n
        idx = lab - 1
        h = self.bundle.leverages[:, None]
        y = xi[idx]
        yhat = K @ xi
        a = (yhat - y) / (1.0 - h)
        self_proj = yhat + a * h
        Hyhat = K2 @ xi
        sumsq = (
            (np.sum(yhat**2, axis=0) - yhat**2)
            + 2.0 * a * (Hyhat - yhat * h)
            + a**2 * (hh[:, None] - h**2)
        )
        bb = np.einsum("jd,jk,kd->d", xi, Agram, xi)
        beta_sq = bb + 2.0 * a * (PA @ xi) + a**2 * cn2[:, None]
        q = (sumsq + self.delta * beta_sq) / (n - 1)
        if np.any(q <= 0):
            raise DegenerateEigenvalue("leave-one-out eigenvalue reconstruction is non-positive")
        lam = 1.0 / q - 1.0

        counts = stats.counts.astype(float)
        Syh = np.zeros((m, D))
        np.add.at(Syh, idx, yhat)
        own = np.zeros((n, m))
        own[np.arange(n), idx] = 1.0
        if loo_means:
            num = (
                Syh[None, :, :]
                - own[:, :, None] * yhat[:, None, :]
                + a[:, None, :] * (K[:, :, None] - own[:, :, None] * h[:, :, None])
            )
            den = counts[None, :] - own
        else:
            num = Syh[None, :, :] + a[:, None, :] * K[:, :, None]
            den = np.broadcast_to(counts[None, :], (n, m)).copy()
        # a class emptied by the deletion has no leave-one-out mean
        ghost = (counts[None, :] - own) == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            class_proj = num / np.where(ghost, 1.0, den)[:, :, None]
        w = (1.0 + lam) ** 2
        scores = np.einsum("nd,njd->nj", w, (self_proj[:, None, :] - class_proj) ** 2)
        scores[ghost] = np.inf
        detail = FastLooDetail(a, self_proj, sumsq, beta_sq, lam, class_proj, scores)
        return detail, lab

    def loo_coefficients(self, D: int, i: int) -> np.ndarray:
        """``alpha*(-i)`` for every ``d``, from the rank-one downdate."""
        stats = class_statistics(self.data, self.delta)
        model = fit_lda(stats, D)
        xi = response_scores(stats, model)
        b = self.bundle
        Y = xi[self.data.y - 1]
        alpha = b.solve(b.Xt.T @ Y)
        yhat_i = b.Xt[i] @ alpha
        a = (yhat_i - Y[i]) / (1.0 - b.leverages[i])
        return alpha + np.outer(b.XC[i], a)


def fast_loo_allocations(
    data: LabeledDataset, D: int, delta: float, *, loo_means: bool = True
) -> CvResult:
    if data.J == 1:
        return CvResult(data.y.copy(), data.y)
    _check_dimension(D, data.J, data.p)
    return FastCvWorkspace(data, delta).loo(None, D, loo_means)


def apparent_error(data: LabeledDataset, D: int, delta: float) -> float:
    """Training error of the model fitted on all of ``data``."""
    if data.J == 1:
        return 0.0
    model = fit_lda(class_statistics(data, delta), D)
    return float(np.mean(classify(model, data.X) != data.y))
