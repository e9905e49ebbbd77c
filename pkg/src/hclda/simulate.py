"""Synthetic class structures used in the experiments.

Model 1 places nine unit-variance Gaussian classes on a 3 x 3 grid with
spacing 5 in the plane.  Model 2 draws ``J`` class means around three
cluster centres (``1``, ``10`` and ``-10`` times the all-ones vector), so
the classes form three natural metaclasses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hclda.errors import InvalidInput
from hclda.lda import LabeledDataset
from hclda.rng import categorical, make_rng, normals

MODEL1_CLASSES = 9


def model1_means() -> np.ndarray:
    j = np.arange(1, MODEL1_CLASSES + 1)
    q = (j - 1) // 3
    return 5.0 * np.column_stack([q - 1, j - 2 - 3 * q]).astype(float)


def model2_centers(J: int, p: int) -> np.ndarray:
    if J % 3:
        raise InvalidInput(f"Model 2 needs J divisible by 3, got {J}")
    scale = np.repeat([1.0, 10.0, -10.0], J // 3)
    return scale[:, None] * np.ones((J, p))


def truth_partition(J: int) -> list[list[int]]:
    k = J // 3
    return [list(range(1, k + 1)), list(range(k + 1, 2 * k + 1)), list(range(2 * k + 1, J + 1))]


def _labels(rng, n: int, J: int) -> np.ndarray:
    # redraw until every class is observed so the dataset is well defined
    while True:
        y = categorical(rng, n, J)
        if np.unique(y).size == J:
            return y


def sample(rng, means: np.ndarray, n: int) -> LabeledDataset:
    J, p = means.shape
    if n < J:
        raise InvalidInput(f"need n >= J = {J}, got n={n}")
    y = _labels(rng, n, J)
    X = means[y - 1] + normals(rng, (n, p))
    return LabeledDataset(X, y, J)


def generate_model1(n: int = 200, seed: int = 0) -> LabeledDataset:
    return sample(make_rng(seed), model1_means(), n)


@dataclass(frozen=True)
class Model2:
    means: np.ndarray
    partition: list

    def sample(self, rng, n: int) -> LabeledDataset:
        return sample(rng, self.means, n)


def draw_model2(rng, J: int = 30, p: int = 20) -> Model2:
    means = model2_centers(J, p) + np.sqrt(10.0) * normals(rng, (J, p))
    return Model2(means, truth_partition(J))


def generate_model2(n: int = 600, p: int = 20, J: int = 30, seed: int = 0):
    """Returns ``(data, model)``; ``model`` carries the class means and the 3-block truth."""
    rng = make_rng(seed)
    model = draw_model2(rng, J, p)
    return model.sample(rng, n), model
