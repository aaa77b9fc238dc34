"""Moment fingerprints of clustered base features.

Order 0 is the visual-bag-of-words histogram, order 1 the per-cluster mean
feature (VLAD when centred on the cluster centre and L2-normalised), order 2
the per-cluster covariance of deviations (full d x d blocks or diagonals).
Fingerprints concatenate across cluster counts for multi-scale variants, and
CNN activation tensors can be flattened, max-pooled or re-read as features.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import featureio
from .cluster import Dictionary, assign
from .errors import DataError
from .keypoints import FeatureSet

logger = logging.getLogger(__name__)

# full second-order fingerprints beyond this many values are usually a mistake
H2_VALUE_BUDGET = 10**7


@dataclass(frozen=True)
class FingerprintRecipe:
    """How a fingerprint was built; shared by every row of a stack."""

    descriptor_kind: str
    order: int | str  # 0, 1, 2 or "flatten" / "maxpool" for pooled CNN tensors
    k_values: tuple[int, ...] = ()
    vlad: bool = False
    diagonal: bool = False
    combined: bool = False  # an order-0 histogram is prepended to a higher order
    reductions: tuple[str, ...] = ()

    def tag(self) -> str:
        parts = [self.descriptor_kind, f"h{self.order}"]
        if self.k_values:
            parts.append("+".join(str(k) for k in self.k_values))
        if self.vlad:
            parts.append("vlad")
        if self.diagonal:
            parts.append("diag")
        if self.combined:
            parts.append("with-h0")
        parts.extend(self.reductions)
        return ":".join(parts)


@dataclass
class Fingerprint:
    image_id: str
    values: np.ndarray
    recipe: FingerprintRecipe

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.values.size == 0:
            raise DataError(f"empty fingerprint for {self.image_id!r}")
        if not np.all(np.isfinite(self.values)):
            raise DataError(f"non-finite fingerprint for {self.image_id!r}")

    @property
    def n(self) -> int:
        return self.values.size


@dataclass
class FingerprintStack:
    """N fingerprints with one shared recipe, stacked into an N x n matrix."""

    matrix: np.ndarray
    ids: list[str]
    recipe: FingerprintRecipe

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise DataError(f"stack must be N x n, got shape {self.matrix.shape}")
        if len(self.ids) != self.matrix.shape[0]:
            raise DataError("stack ids do not match row count")

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def from_fingerprints(cls, fps: list[Fingerprint]) -> "FingerprintStack":
        if not fps:
            raise DataError("cannot stack zero fingerprints")
        recipes = {fp.recipe for fp in fps}
        if len(recipes) > 1:
            raise DataError("cannot stack fingerprints with different recipes")
        lengths = {fp.n for fp in fps}
        if len(lengths) > 1:
            raise DataError(f"inconsistent fingerprint lengths: {sorted(lengths)}")
        return cls(
            matrix=np.vstack([fp.values for fp in fps]),
            ids=[fp.image_id for fp in fps],
            recipe=fps[0].recipe,
        )


def _check_pair(fs: FeatureSet, dictionary: Dictionary) -> None:
    if len(fs) == 0:
        raise DataError(f"empty feature set for {fs.image_id!r}")
    if fs.d != dictionary.d:
        raise DataError(f"feature d={fs.d} does not match dictionary d={dictionary.d}")


def _cluster_stats(fs: FeatureSet, dictionary: Dictionary):
    labels = assign(dictionary, fs)
    feats = fs.features.astype(np.float64)
    k = dictionary.k
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros((k, fs.d))
    np.add.at(sums, labels, feats)
    means = np.zeros_like(sums)
    nonempty = counts > 0
    means[nonempty] = sums[nonempty] / counts[nonempty, None]
    return labels, feats, counts, means


def h0(fs: FeatureSet, dictionary: Dictionary) -> Fingerprint:
    """Normalised histogram of feature-to-cluster assignments (length K)."""
    _check_pair(fs, dictionary)
    labels = assign(dictionary, fs)
    hist = np.bincount(labels, minlength=dictionary.k).astype(np.float64) / len(fs)
    recipe = FingerprintRecipe(fs.descriptor_kind, 0, (dictionary.k,))
    return Fingerprint(fs.image_id, hist, recipe)


def h1(fs: FeatureSet, dictionary: Dictionary, vlad: bool = False) -> Fingerprint:
    """Per-cluster mean features (length K*d); VLAD centres and L2-normalises each row."""
    _check_pair(fs, dictionary)
    _, _, counts, means = _cluster_stats(fs, dictionary)
    if not vlad:
        rows = means.copy()
        rows[counts == 0] = 0.0
    else:
        rows = np.zeros_like(means)
        diffs = means - dictionary.centres
        norms = np.linalg.norm(diffs, axis=1)
        for k in range(dictionary.k):
            if counts[k] == 0:
                continue
            if norms[k] <= 1e-12:
                logger.warning("degenerate VLAD row %d for %s: mean equals centre", k, fs.image_id)
                continue
            rows[k] = diffs[k] / norms[k]
    recipe = FingerprintRecipe(fs.descriptor_kind, 1, (dictionary.k,), vlad=vlad)
    return Fingerprint(fs.image_id, rows.ravel(), recipe)


def h2(fs: FeatureSet, dictionary: Dictionary, vlad: bool = False, diagonal: bool = False) -> Fingerprint:
    """Per-cluster second moments of deviations (length K*d*d, or K*d when diagonal)."""
    _check_pair(fs, dictionary)
    labels, feats, counts, means = _cluster_stats(fs, dictionary)
    k, d = dictionary.k, fs.d
    if not diagonal and k * d * d > H2_VALUE_BUDGET:
        warnings.warn(
            f"full order-2 fingerprint has {k * d * d} values; consider diagonal=True",
            stacklevel=2,
        )
    blocks = np.zeros((k, d)) if diagonal else np.zeros((k, d, d))
    if vlad:
        norms = np.linalg.norm(means - dictionary.centres, axis=1)
    for j in range(k):
        members = feats[labels == j]
        if members.shape[0] == 0:
            continue
        if vlad:
            if norms[j] <= 1e-12:
                logger.warning("degenerate VLAD scaling for cluster %d of %s", j, fs.image_id)
                continue
            dev = (members - dictionary.centres[j]) / norms[j]
        else:
            dev = members - means[j]
        if diagonal:
            blocks[j] = (dev**2).mean(axis=0)
        else:
            blocks[j] = dev.T @ dev / dev.shape[0]
    recipe = FingerprintRecipe(fs.descriptor_kind, 2, (dictionary.k,), vlad=vlad, diagonal=diagonal)
    return Fingerprint(fs.image_id, blocks.ravel(), recipe)


def multiscale(fps: list[Fingerprint]) -> Fingerprint:
    """Concatenate same-order fingerprints built with different cluster counts."""
    if not fps:
        raise DataError("nothing to concatenate")
    if len(fps) == 1:
        return fps[0]
    ids = {fp.image_id for fp in fps}
    if len(ids) > 1:
        raise DataError(f"multiscale fingerprints must share one image, got {sorted(ids)}")
    orders = {fp.recipe.order for fp in fps}
    if len(orders) > 1:
        raise DataError(f"multiscale fingerprints must share the order, got {sorted(map(str, orders))}")
    k_values = tuple(k for fp in fps for k in fp.recipe.k_values)
    if len(set(k_values)) != len(k_values):
        raise DataError(f"multiscale cluster counts must be distinct, got {k_values}")
    recipe = dataclasses.replace(fps[0].recipe, k_values=k_values)
    return Fingerprint(fps[0].image_id, np.concatenate([fp.values for fp in fps]), recipe)


def combine_with_h0(hist: Fingerprint, other: Fingerprint) -> Fingerprint:
    """Prepend the order-0 histogram to a higher-order fingerprint of the same image."""
    if hist.image_id != other.image_id:
        raise DataError("combined fingerprints must share one image")
    if hist.recipe.order != 0:
        raise DataError("first argument must be an order-0 fingerprint")
    recipe = dataclasses.replace(other.recipe, combined=True)
    return Fingerprint(other.image_id, np.concatenate([hist.values, other.values]), recipe)


def build_fingerprint(
    fs: FeatureSet,
    dictionaries: list[Dictionary],
    order: int,
    vlad: bool = False,
    diagonal: bool = False,
    with_h0: bool = False,
) -> Fingerprint:
    """Build one fingerprint from a feature set, concatenating across dictionaries."""
    fps = []
    for dictionary in dictionaries:
        if order == 0:
            one = h0(fs, dictionary)
        elif order == 1:
            one = h1(fs, dictionary, vlad=vlad)
        elif order == 2:
            one = h2(fs, dictionary, vlad=vlad, diagonal=diagonal)
        else:
            raise DataError(f"unsupported fingerprint order {order}")
        if with_h0 and order != 0:
            one = combine_with_h0(h0(fs, dictionary), one)
        fps.append(one)
    return multiscale(fps)


def cnn_flatten(tensor: np.ndarray, image_id: str = "", kind: str = "cnn") -> Fingerprint:
    """Row-major flatten of a (d1, d2, d) activation tensor."""
    tensor = np.asarray(tensor)
    if tensor.ndim != 3:
        raise DataError(f"expected a rank-3 tensor, got shape {tensor.shape}")
    recipe = FingerprintRecipe(kind, "flatten")
    return Fingerprint(image_id, tensor.reshape(-1).astype(np.float64), recipe)


def cnn_maxpool(tensor: np.ndarray, image_id: str = "", kind: str = "cnn") -> Fingerprint:
    """Per-channel maximum over the spatial grid of a (d1, d2, d) tensor."""
    tensor = np.asarray(tensor)
    if tensor.ndim != 3:
        raise DataError(f"expected a rank-3 tensor, got shape {tensor.shape}")
    recipe = FingerprintRecipe(kind, "maxpool")
    return Fingerprint(image_id, tensor.max(axis=(0, 1)).astype(np.float64), recipe)


def cnn_as_features(tensor: np.ndarray, image_id: str = "", kind: str = "cnn") -> FeatureSet:
    """Reshape a (d1, d2, d) tensor into d1*d2 feature rows, row-major over the grid."""
    tensor = np.asarray(tensor)
    if tensor.ndim != 3:
        raise DataError(f"expected a rank-3 tensor, got shape {tensor.shape}")
    d1, d2, d = tensor.shape
    return FeatureSet(image_id=image_id, features=tensor.reshape(d1 * d2, d), descriptor_kind=kind)


def save_stack(stack: FingerprintStack, path: str | Path) -> None:
    """Write the stack matrix as MFP1 plus a JSON sidecar with recipe and ids."""
    path = Path(path)
    featureio.write_array(path, stack.matrix, f"stack:{stack.recipe.tag()}")
    sidecar = {"ids": stack.ids, "recipe": dataclasses.asdict(stack.recipe)}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, sort_keys=True))


def load_stack(path: str | Path) -> FingerprintStack:
    path = Path(path)
    values, kind = featureio.read_array(path)
    if not kind.startswith("stack:"):
        raise DataError(f"not a fingerprint stack: {path}")
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    raw = sidecar["recipe"]
    raw["k_values"] = tuple(raw.get("k_values", ()))
    raw["reductions"] = tuple(raw.get("reductions", ()))
    recipe = FingerprintRecipe(**raw)
    return FingerprintStack(matrix=values.astype(np.float64), ids=list(sidecar["ids"]), recipe=recipe)
