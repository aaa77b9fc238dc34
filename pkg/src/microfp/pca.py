"""PCA over fingerprint stacks via thin SVD (no covariance matrix is formed)."""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (r, n), orthonormal rows
    explained_variance: np.ndarray  # (r,), non-increasing

    @property
    def r(self) -> int:
        return self.components.shape[0]


def _as_matrix(data) -> np.ndarray:
    matrix = getattr(data, "matrix", data)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise DataError(f"expected an N x n matrix, got shape {matrix.shape}")
    return matrix


def fit_pca(data, r: int, reduce_rank_deficient: bool = True) -> PcaModel:
    """Fit an r-component PCA with a deterministic sign convention.

    Rank-deficient input reduces r to the numerical rank with a warning
    unless ``reduce_rank_deficient`` is False, in which case the trailing
    components are an arbitrary orthonormal completion with ~zero variance.
    """
    matrix = _as_matrix(data)
    n_rows, n_cols = matrix.shape
    if not 1 <= r <= min(n_rows, n_cols):
        raise DataError(f"r={r} out of range for a {n_rows} x {n_cols} stack")
    mean = matrix.mean(axis=0)
    centred = matrix - mean
    _, svals, vt = np.linalg.svd(centred, full_matrices=False)
    if svals[0] > 0:
        rank = int(np.sum(svals > max(n_rows, n_cols) * np.finfo(np.float64).eps * svals[0]))
    else:
        rank = 0
    if reduce_rank_deficient and rank < r:
        warnings.warn(f"rank-deficient stack: reducing r from {r} to {max(rank, 1)}", stacklevel=2)
        r = max(rank, 1)
    components = vt[:r].copy()
    # sign convention: the largest-magnitude entry of each component is positive
    flip = components[np.arange(r), np.abs(components).argmax(axis=1)] < 0
    components[flip] *= -1.0
    explained = svals[:r] ** 2 / max(n_rows - 1, 1)
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def transform(model: PcaModel, data):
    """Project rows onto the principal components: (x - mean) @ components.T."""
    matrix = _as_matrix(data)
    if matrix.shape[1] != model.mean.shape[0]:
        raise DataError(f"stack has n={matrix.shape[1]}, model expects n={model.mean.shape[0]}")
    projected = (matrix - model.mean) @ model.components.T
    if hasattr(data, "matrix") and hasattr(data, "recipe"):
        recipe = dataclasses.replace(data.recipe, reductions=data.recipe.reductions + ("stack-pca",))
        return dataclasses.replace(data, matrix=projected, recipe=recipe)
    return projected
