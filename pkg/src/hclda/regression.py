"""Least-squares formulation of multiclass LDA.

Each discriminant direction ``d`` gets a class-constant response vector
``y_d`` (entry ``xi[j, d]`` for every observation of class ``j``).  Ridge
regression of ``y_d`` on ``(1, X)`` with an unpenalized intercept then
returns coefficients parallel to the discriminant direction:

    beta_d = t_d / (1 + lambda_d)
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from hclda.errors import DegenerateEigenvalue, InvalidInput, SingularMatrix
from hclda.lda import ClassStatistics, DiscriminantModel, LabeledDataset

LAMBDA_ATOL = 1e-10
MAX_DENSE_N = 10_000


@dataclass(frozen=True)
class ResponseSet:
    xi: np.ndarray  # J x D
    Y: np.ndarray  # n x D, column d is y_d

    @property
    def D(self) -> int:
        return self.xi.shape[1]


@dataclass(frozen=True)
class RidgeSolution:
    alpha: np.ndarray  # (p+1) x D, row 0 is the intercept
    fitted: np.ndarray  # n x D

    @property
    def intercept(self) -> np.ndarray:
        return self.alpha[0]

    @property
    def beta(self) -> np.ndarray:
        return self.alpha[1:]


def response_scores(stats: ClassStatistics, model: DiscriminantModel) -> np.ndarray:
    """``xi[j, d] = (xbar_j - xbar)^T t_d / lambda_d``."""
    lam = model.lambdas
    bad = np.flatnonzero(lam <= LAMBDA_ATOL)
    if bad.size:
        raise DegenerateEigenvalue(
            f"eigenvalue(s) {lam[bad].tolist()} at d={(bad + 1).tolist()} are numerically zero; "
            "class means are indistinguishable in that direction"
        )
    return (stats.means - stats.grand_mean) @ model.T / lam


def build_responses(stats: ClassStatistics, model: DiscriminantModel, y: np.ndarray) -> ResponseSet:
    """Response coding for labels ``y`` (values in ``1..J``)."""
    xi = response_scores(stats, model)
    return ResponseSet(xi, xi[np.asarray(y) - 1])


def augment(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.hstack([np.ones((X.shape[0], 1)), X])


def penalty(p: int, delta: float) -> np.ndarray:
    return np.diag(np.r_[0.0, np.full(p, float(delta))])


@dataclass(frozen=True, eq=False)
class HatMatrixBundle:
    """Factorized ridge system ``C = Xt^T Xt + diag(0, delta, ..., delta)``.

    ``XC`` stores ``Xt C^{-1}``; its ``i``-th row is ``c_i``.  The dense hat
    matrix is materialized lazily and only for ``n <= MAX_DENSE_N``.
    """

    Xt: np.ndarray
    delta: float
    chol: tuple
    Cinv: np.ndarray
    XC: np.ndarray

    @property
    def n(self) -> int:
        return self.Xt.shape[0]

    @property
    def p(self) -> int:
        return self.Xt.shape[1] - 1

    @cached_property
    def leverages(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.XC, self.Xt)

    @cached_property
    def H(self) -> np.ndarray:
        if self.n > MAX_DENSE_N:
            raise InvalidInput(
                f"dense hat matrix needs {8 * self.n**2 / 1e9:.1f} GB for n={self.n}; "
                f"limit is n <= {MAX_DENSE_N}"
            )
        H = self.XC @ self.Xt.T
        return 0.5 * (H + H.T)

    def solve(self, B: np.ndarray) -> np.ndarray:
        return linalg.cho_solve(self.chol, B)


def hat_bundle(data: LabeledDataset | np.ndarray, delta: float) -> HatMatrixBundle:
    X = data.X if isinstance(data, LabeledDataset) else np.asarray(data, dtype=float)
    Xt = augment(X)
    C = Xt.T @ Xt + penalty(X.shape[1], delta)
    try:
        chol = linalg.cho_factor(C, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularMatrix(f"ridge system is singular at delta={delta}: {exc}") from None
    piv = np.abs(np.diag(chol[0]))
    if piv.min() ** 2 <= 1e-14 * piv.max() ** 2:
        raise SingularMatrix(f"ridge system is numerically singular at delta={delta}")
    Cinv = linalg.cho_solve(chol, np.eye(C.shape[0]))
    Cinv = 0.5 * (Cinv + Cinv.T)
    return HatMatrixBundle(Xt, float(delta), chol, Cinv, Xt @ Cinv)


def ridge_solve(bundle: HatMatrixBundle, responses: ResponseSet | np.ndarray) -> RidgeSolution:
    Y = responses.Y if isinstance(responses, ResponseSet) else np.asarray(responses, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != bundle.n:
        raise InvalidInput(f"responses have {Y.shape[0]} rows, design has {bundle.n}")
    alpha = bundle.solve(bundle.Xt.T @ Y)
    return RidgeSolution(alpha, bundle.Xt @ alpha)


def eigenvalue_from_fit(fitted: np.ndarray, beta: np.ndarray, delta: float) -> np.ndarray:
    """Recover ``lambda_d`` from a ridge fit on ``m = len(fitted)`` points.

    Uses ``(1/m) sum_k fit_k^2 + (delta/m) |beta|^2 = 1 / (1 + lambda)``,
    which holds exactly when the responses are the coding of the fitted
    sample itself.
    """
    m = fitted.shape[0]
    q = (np.sum(fitted**2, axis=0) + delta * np.sum(beta**2, axis=0)) / m
    return 1.0 / q - 1.0
