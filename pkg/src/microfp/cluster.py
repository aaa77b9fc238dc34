"""Lloyd k-means with k-means++ seeding, restarts and empty-cluster reseeding.

All distance arithmetic runs in float64 regardless of storage dtype so the
per-iteration inertia sequence is reliably non-increasing.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import featureio
from .errors import DataError, NumericalError

_CHUNK = 2048


@dataclass
class Dictionary:
    """K cluster centres fitted on a feature population."""

    centres: np.ndarray
    inertia: float
    descriptor_kind: str = ""
    inertia_history: np.ndarray = field(default_factory=lambda: np.empty(0))
    n_iter: int = 0

    def __post_init__(self) -> None:
        self.centres = np.asarray(self.centres, dtype=np.float64)
        if self.centres.ndim != 2 or self.centres.shape[0] < 1:
            raise DataError(f"centres must be a K x d matrix, got shape {self.centres.shape}")
        if not np.all(np.isfinite(self.centres)):
            raise NumericalError("non-finite cluster centres")
        if not (np.isfinite(self.inertia) and self.inertia >= 0.0):
            raise NumericalError(f"inertia must be finite and >= 0, got {self.inertia}")

    @property
    def k(self) -> int:
        return self.centres.shape[0]

    @property
    def d(self) -> int:
        return self.centres.shape[1]


def _as_features(data) -> np.ndarray:
    feats = getattr(data, "features", None)
    if feats is None:
        feats = getattr(data, "matrix", data)
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2:
        raise DataError(f"expected a 2-D feature array, got shape {feats.shape}")
    if feats.size and not np.all(np.isfinite(feats)):
        raise NumericalError("non-finite inputs to k-means")
    return feats


def _nearest(X: np.ndarray, centres: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centre labels and squared distances; ties go to the lowest index."""
    n = X.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        d2 = ((X[start:stop, None, :] - centres[None, :, :]) ** 2).sum(axis=2)
        labels[start:stop] = np.argmin(d2, axis=1)
        dists[start:stop] = d2[np.arange(stop - start), labels[start:stop]]
    return labels, dists


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centres = np.empty((k, X.shape[1]))
    centres[0] = X[rng.integers(n)]
    closest = ((X - centres[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centres[j] = X[idx]
        closest = np.minimum(closest, ((X - centres[j]) ** 2).sum(axis=1))
    return centres


def _update_centres(X: np.ndarray, labels: np.ndarray, old: np.ndarray) -> np.ndarray:
    k, d = old.shape
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros((k, d))
    np.add.at(sums, labels, X)
    new = old.copy()
    nonempty = counts > 0
    new[nonempty] = sums[nonempty] / counts[nonempty, None]
    taken: set[int] = set()
    for j in np.flatnonzero(~nonempty):
        # reseed a starved cluster at the point farthest from its former centre
        far = ((X - old[j]) ** 2).sum(axis=1)
        order = np.argsort(-far, kind="stable")
        pick = next(int(i) for i in order if int(i) not in taken)
        taken.add(pick)
        new[j] = X[pick]
    return new


def _lloyd(X: np.ndarray, centres: np.ndarray, max_iter: int, tol: float):
    history = []
    n_iter = 0
    for _ in range(max_iter):
        labels, dists = _nearest(X, centres)
        history.append(dists.sum())
        new = _update_centres(X, labels, centres)
        shift = np.sqrt(((new - centres) ** 2).sum(axis=1)).max()
        centres = new
        n_iter += 1
        if shift < tol:
            break
    labels, dists = _nearest(X, centres)
    history.append(dists.sum())
    # a cluster can still end up starved at the final assignment; reseeding
    # strictly lowers the objective, so a few extra passes settle it
    for _ in range(centres.shape[0]):
        if np.bincount(labels, minlength=centres.shape[0]).min() > 0:
            break
        centres = _update_centres(X, labels, centres)
        labels, dists = _nearest(X, centres)
        history.append(dists.sum())
        n_iter += 1
    return centres, history[-1], np.asarray(history), n_iter


def fit_kmeans(
    pop,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-4,
    n_init: int = 10,
) -> Dictionary:
    """Best-of-``n_init`` Lloyd runs with k-means++ seeding from ``seed``."""
    X = _as_features(pop)
    n = X.shape[0]
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if n < k:
        raise DataError(f"population of {n} points cannot support k={k}")
    rng = np.random.default_rng(seed)
    best: tuple | None = None
    for _ in range(n_init):
        centres0 = _kmeans_pp(X, k, rng)
        centres, inertia, history, n_iter = _lloyd(X, centres0, max_iter, tol)
        if best is None or inertia < best[1]:
            best = (centres, inertia, history, n_iter)
    centres, inertia, history, n_iter = best
    return Dictionary(
        centres=centres,
        inertia=float(inertia),
        descriptor_kind=getattr(pop, "descriptor_kind", ""),
        inertia_history=history,
        n_iter=n_iter,
    )


def assign(dictionary: Dictionary, fs) -> np.ndarray:
    """Index of the nearest centre for every feature row; ties break low."""
    X = _as_features(fs)
    if X.shape[1] != dictionary.d:
        raise DataError(f"feature dimension {X.shape[1]} does not match dictionary d={dictionary.d}")
    labels, _ = _nearest(X, dictionary.centres)
    return labels


def save_dictionary(dictionary: Dictionary, path: str | Path) -> None:
    path = Path(path)
    featureio.write_array(path, dictionary.centres, f"centres:{dictionary.descriptor_kind}")
    sidecar = {"inertia": dictionary.inertia, "n_iter": dictionary.n_iter}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, sort_keys=True))


def load_dictionary(path: str | Path) -> Dictionary:
    path = Path(path)
    values, kind = featureio.read_array(path)
    if values.ndim != 2 or not kind.startswith("centres:"):
        raise DataError(f"not a dictionary file: {path}")
    sidecar_path = path.with_suffix(path.suffix + ".json")
    inertia, n_iter = 0.0, 0
    if sidecar_path.is_file():
        sidecar = json.loads(sidecar_path.read_text())
        inertia = float(sidecar.get("inertia", 0.0))
        n_iter = int(sidecar.get("n_iter", 0))
    return Dictionary(
        centres=values.astype(np.float64),
        inertia=inertia,
        descriptor_kind=kind.split(":", 1)[1],
        n_iter=n_iter,
    )
