"""Supervised and unsupervised classifiers over fingerprint stacks.

The SVM solves the soft-margin dual by sequential minimal optimisation with
maximal-violating-pair working sets (no shrinking, so runs are deterministic);
multi-class problems are handled by a one-vs-one error-correcting output code.
The random forest bags axis-aligned decision trees grown on Gini impurity with
a random feature subset per split. Plain k-means over fingerprints is the
unsupervised baseline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .cluster import assign, fit_kmeans
from .errors import DataError

_EPS = 1e-12


# -- kernels -----------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"  # "linear" or "chi2"
    gamma: float | None = None  # chi2 scale; defaults to 1/n at fit time

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "chi2"):
            raise DataError(f"unknown kernel {self.kind!r}")


def chi2_kernel(u: np.ndarray, v: np.ndarray, gamma: float) -> float:
    """exp(-gamma * sum (u_i - v_i)^2 / (u_i + v_i)) with 0/0 terms dropped."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u < 0) or np.any(v < 0):
        raise DataError("chi2 kernel requires non-negative inputs")
    num = (u - v) ** 2
    den = u + v
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(np.exp(-gamma * terms.sum()))


def kernel_gram(X: np.ndarray, Y: np.ndarray, spec: KernelSpec) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if spec.kind == "linear":
        return X @ Y.T
    if np.any(X < 0) or np.any(Y < 0):
        raise DataError("chi2 kernel requires non-negative fingerprints; use the linear kernel instead")
    gamma = spec.gamma if spec.gamma is not None else 1.0 / X.shape[1]
    gram = np.empty((X.shape[0], Y.shape[0]))
    for i, row in enumerate(X):
        num = (row[None, :] - Y) ** 2
        den = row[None, :] + Y
        terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        gram[i] = terms.sum(axis=1)
    return np.exp(-gamma * gram)


# -- support vector machine ---------------------------------------------------


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i at the support vectors
    bias: float
    kernel: KernelSpec
    C: float
    alphas: np.ndarray = field(default_factory=lambda: np.empty(0))
    kkt_gap: float = 0.0
    n_iter: int = 0
    converged: bool = True


def svm_train(
    X: np.ndarray,
    y: np.ndarray,
    kernel: KernelSpec = KernelSpec(),
    C: float = 1.0,
    tol: float = 1e-3,
    max_iter: int | None = None,
) -> SvmModel:
    """Soft-margin binary SVM on +/-1 labels, solved by SMO to the KKT gap ``tol``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if y.shape[0] != n:
        raise DataError("X and y disagree on the sample count")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("labels must be +1/-1")
    if np.all(y > 0) or np.all(y < 0):
        raise DataError("both classes must be present")
    if kernel.kind == "chi2" and kernel.gamma is None:
        kernel = KernelSpec("chi2", gamma=1.0 / X.shape[1])
    gram = kernel_gram(X, X, kernel)
    q = gram * np.outer(y, y)
    q_diag = np.diag(q).copy()

    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - e'a
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        yg = -y * grad
        up = ((y > 0) & (alpha < C - _EPS)) | ((y < 0) & (alpha > _EPS))
        low = ((y > 0) & (alpha > _EPS)) | ((y < 0) & (alpha < C - _EPS))
        if not up.any() or not low.any():
            gap = 0.0
            break
        up_idx = np.flatnonzero(up)
        low_idx = np.flatnonzero(low)
        i = up_idx[np.argmax(yg[up_idx])]
        j = low_idx[np.argmin(yg[low_idx])]
        gap = yg[i] - yg[j]
        if gap <= tol:
            break
        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = q_diag[i] + q_diag[j] + 2.0 * q[i, j]
            if quad <= 0:
                quad = _EPS
            delta = (-grad[i] - grad[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            else:
                if ai < 0:
                    ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            else:
                if aj > C:
                    aj, ai = C, C + diff
        else:
            quad = q_diag[i] + q_diag[j] - 2.0 * q[i, j]
            if quad <= 0:
                quad = _EPS
            delta = (grad[i] - grad[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            else:
                if aj < 0:
                    aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            else:
                if ai < 0:
                    ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        grad += q[:, i] * (ai - ai_old) + q[:, j] * (aj - aj_old)
    converged = gap <= tol

    yg = -y * grad
    free = (alpha > _EPS) & (alpha < C - _EPS)
    if free.any():
        rho = -float(np.mean(yg[free]))
    else:
        up = ((y > 0) & (alpha < C - _EPS)) | ((y < 0) & (alpha > _EPS))
        low = ((y > 0) & (alpha > _EPS)) | ((y < 0) & (alpha < C - _EPS))
        hi = yg[up].max() if up.any() else 0.0
        lo = yg[low].min() if low.any() else 0.0
        rho = -float(hi + lo) / 2.0
    sv = alpha > _EPS
    return SvmModel(
        support_vectors=X[sv],
        dual_coef=(alpha * y)[sv],
        bias=rho,
        kernel=kernel,
        C=C,
        alphas=alpha,
        kkt_gap=float(max(gap, 0.0)),
        n_iter=it,
        converged=converged,
    )


def svm_decision(model: SvmModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    gram = kernel_gram(X, model.support_vectors, model.kernel)
    return gram @ model.dual_coef - model.bias


def svm_predict(model: SvmModel, X: np.ndarray) -> np.ndarray:
    return np.where(svm_decision(model, X) >= 0, 1, -1)


def svm_slacks(model: SvmModel, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.asarray(y, dtype=np.float64) * svm_decision(model, X))


# -- one-vs-one error-correcting output code ----------------------------------


@dataclass
class EcocModel:
    classes: np.ndarray
    code: np.ndarray  # (n_classes, n_learners) with entries +1, -1, 0
    models: list[SvmModel]


def ecoc_train(
    X: np.ndarray,
    y: np.ndarray,
    kernel: KernelSpec = KernelSpec(),
    C: float = 1.0,
    n_classes: int | None = None,
    tol: float = 1e-3,
) -> EcocModel:
    """One binary SVM per class pair; a lone pair degenerates to plain binary SVM."""
    y = np.asarray(y, dtype=np.int64)
    present = np.unique(y)
    if n_classes is not None:
        expected = np.arange(n_classes)
        missing = np.setdiff1d(expected, present)
        if missing.size:
            raise DataError(f"training fold is missing classes {missing.tolist()}")
        classes = expected
    else:
        classes = present
    if classes.size < 2:
        raise DataError("need at least two classes")
    pairs = list(combinations(range(classes.size), 2))
    code = np.zeros((classes.size, len(pairs)), dtype=np.int64)
    models = []
    X = np.asarray(X, dtype=np.float64)
    for ell, (a, b) in enumerate(pairs):
        mask = (y == classes[a]) | (y == classes[b])
        y_bin = np.where(y[mask] == classes[a], 1.0, -1.0)
        models.append(svm_train(X[mask], y_bin, kernel=kernel, C=C, tol=tol))
        code[a, ell] = 1
        code[b, ell] = -1
    return EcocModel(classes=classes, code=code, models=models)


def ecoc_predict(model: EcocModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    signs = np.stack([np.sign(svm_decision(m, X)) for m in model.models], axis=1)
    # Hamming-style decoding; a zero code entry means the learner abstains
    losses = np.zeros((X.shape[0], model.classes.size))
    for c in range(model.classes.size):
        active = model.code[c] != 0
        losses[:, c] = (np.abs(model.code[c][active][None, :] - signs[:, active]) / 2.0).sum(axis=1)
    return model.classes[np.argmin(losses, axis=1)]


# -- random forest -------------------------------------------------------------


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 10000
    max_depth: int = 10
    min_leaf: int = 1
    bootstrap: bool = True
    max_features: int | str = "sqrt"
    seed: int = 0


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    counts: np.ndarray | None = None  # set on leaves only


@dataclass
class ForestModel:
    trees: list[TreeNode]
    n_classes: int
    params: ForestParams


def gini(counts: np.ndarray) -> float:
    """Expected misclassification rate 1 - sum_c p_c^2 at a node."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts / total
    return float(1.0 - (p**2).sum())


def _resolve_max_features(option: int | str, n_features: int) -> int:
    if option == "sqrt":
        return min(math.ceil(math.sqrt(n_features)), n_features)
    if isinstance(option, int) and option >= 1:
        return min(option, n_features)
    raise DataError(f"bad max_features {option!r}")


def _best_split(X, y, idx, features, n_classes, min_leaf):
    best = None
    n = idx.size
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sl = y[idx][order]
        cut = np.flatnonzero(sv[:-1] < sv[1:]) + 1  # points left of each candidate
        cut = cut[(cut >= min_leaf) & (n - cut >= min_leaf)]
        if cut.size == 0:
            continue
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), sl] = 1.0
        prefix = np.cumsum(onehot, axis=0)
        left_counts = prefix[cut - 1]
        right_counts = prefix[-1] - left_counts
        nl = cut.astype(np.float64)
        nr = n - nl
        gini_left = 1.0 - ((left_counts / nl[:, None]) ** 2).sum(axis=1)
        gini_right = 1.0 - ((right_counts / nr[:, None]) ** 2).sum(axis=1)
        weighted = (nl * gini_left + nr * gini_right) / n
        b = int(np.argmin(weighted))
        if best is None or weighted[b] < best[0]:
            threshold = 0.5 * (sv[cut[b] - 1] + sv[cut[b]])
            best = (float(weighted[b]), int(f), threshold)
    return best


def _grow(X, y, idx, depth, params, rng, n_classes, m_features):
    counts = np.bincount(y[idx], minlength=n_classes)
    if depth >= params.max_depth or idx.size < 2 * params.min_leaf or gini(counts) == 0.0:
        return TreeNode(counts=counts)
    features = rng.choice(X.shape[1], size=m_features, replace=False)
    split = _best_split(X, y, idx, features, n_classes, params.min_leaf)
    if split is None:
        return TreeNode(counts=counts)
    _, f, a = split
    mask = X[idx, f] < a
    left = _grow(X, y, idx[mask], depth + 1, params, rng, n_classes, m_features)
    right = _grow(X, y, idx[~mask], depth + 1, params, rng, n_classes, m_features)
    return TreeNode(feature=f, threshold=a, left=left, right=right)


def forest_train(X: np.ndarray, y: np.ndarray, params: ForestParams = ForestParams()) -> ForestModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] < 2:
        raise DataError("need at least two samples")
    n_classes = int(y.max()) + 1
    m_features = _resolve_max_features(params.max_features, X.shape[1])
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    trees = []
    n = X.shape[0]
    for seq in seeds:
        rng = np.random.default_rng(seq)
        idx = rng.integers(n, size=n) if params.bootstrap else np.arange(n)
        trees.append(_grow(X, y, idx, 0, params, rng, n_classes, m_features))
    return ForestModel(trees=trees, n_classes=n_classes, params=params)


def _tree_votes(node: TreeNode, X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    if node.counts is not None:
        out[idx] = int(np.argmax(node.counts))
        return
    mask = X[idx, node.feature] < node.threshold
    _tree_votes(node.left, X, idx[mask], out)
    _tree_votes(node.right, X, idx[~mask], out)


def forest_predict(model: ForestModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    votes = np.zeros((n, model.n_classes), dtype=np.int64)
    pred = np.empty(n, dtype=np.int64)
    for tree in model.trees:
        _tree_votes(tree, X, np.arange(n), pred)
        votes[np.arange(n), pred] += 1
    return np.argmax(votes, axis=1)


# -- unsupervised baseline -----------------------------------------------------


def kmeans_classify(stack, k_classes: int, seed: int) -> np.ndarray:
    """Cluster the fingerprint stack itself; labels are defined up to permutation."""
    matrix = np.asarray(getattr(stack, "matrix", stack), dtype=np.float64)
    dictionary = fit_kmeans(matrix, k_classes, seed=seed)
    return assign(dictionary, matrix)
