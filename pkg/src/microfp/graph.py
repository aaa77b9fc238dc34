"""kNN graphs over fingerprint stacks and graph-based UL/SSL classifiers.

The unweighted adjacency is symmetrised by OR, the Laplacian is L = D - A.
Spectral clustering k-means the smallest nontrivial eigenvectors; Laplace
learning solves L u = 0 with labelled nodes clamped; Poisson learning solves
L u = b with zero-mean point sources at the labelled nodes and no boundary
conditions, using projected preconditioned conjugate gradients.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh, splu
from scipy.spatial.distance import cdist

from .cluster import assign, fit_kmeans
from .errors import DataError, NumericalError

_DENSE_EIG_LIMIT = 2048
_CHUNK = 1024


@dataclass
class LabeledGraph:
    """Symmetric 0/1 kNN adjacency with an optional partial labelling."""

    adjacency: sparse.csr_matrix
    labels: np.ndarray | None = None
    label_mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        a = sparse.csr_matrix(self.adjacency)
        if a.shape[0] != a.shape[1]:
            raise DataError(f"adjacency must be square, got {a.shape}")
        if abs(a - a.T).nnz != 0:
            raise DataError("adjacency must be symmetric")
        if a.diagonal().any():
            raise DataError("adjacency must have a zero diagonal")
        self.adjacency = a

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.ravel(self.adjacency.sum(axis=1)).astype(np.float64)

    @cached_property
    def laplacian(self) -> sparse.csr_matrix:
        return (sparse.diags(self.degrees) - self.adjacency).tocsr()

    def with_labels(self, labels: np.ndarray, label_mask: np.ndarray) -> "LabeledGraph":
        labels = np.asarray(labels, dtype=np.int64)
        label_mask = np.asarray(label_mask, dtype=bool)
        if labels.shape[0] != self.n or label_mask.shape[0] != self.n:
            raise DataError("labels and mask must cover every node")
        return LabeledGraph(adjacency=self.adjacency, labels=labels, label_mask=label_mask)


@dataclass
class LabelField:
    """Per-node class scores from a propagation solve."""

    u: np.ndarray
    flagged: np.ndarray | None = None  # nodes whose scores were underdetermined
    converged: bool = True
    residual: float = 0.0

    def __post_init__(self) -> None:
        self.u = np.asarray(self.u, dtype=np.float64)
        if not np.all(np.isfinite(self.u)):
            raise NumericalError("non-finite label field")


def knn_graph(stack, k: int) -> LabeledGraph:
    """Symmetrised k-nearest-neighbour graph under Euclidean distance."""
    X = np.asarray(getattr(stack, "matrix", stack), dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"expected an N x n stack, got shape {X.shape}")
    n = X.shape[0]
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if k >= n:
        raise DataError(f"k={k} needs more than k points, got {n}")
    rows = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        dist = cdist(X[start:stop], X)
        dist[np.arange(stop - start), np.arange(start, stop)] = np.inf
        rows[start:stop] = np.argsort(dist, axis=1, kind="stable")[:, :k]
    indptr = np.arange(0, n * k + 1, k)
    directed = sparse.csr_matrix((np.ones(n * k), rows.ravel(), indptr), shape=(n, n))
    return LabeledGraph(adjacency=directed.maximum(directed.T))


def _one_hot(labels: np.ndarray, mask: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], n_classes))
    idx = np.flatnonzero(mask)
    out[idx, labels[idx]] = 1.0
    return out


def _infer_classes(labels: np.ndarray, mask: np.ndarray, n_classes: int | None) -> int:
    if not np.any(mask):
        raise DataError("no labelled nodes")
    inferred = int(labels[mask].max()) + 1
    if n_classes is None:
        return inferred
    if n_classes < inferred:
        raise DataError(f"n_classes={n_classes} smaller than max label {inferred - 1}")
    return n_classes


def _smallest_eigvecs(g: LabeledGraph, count: int) -> tuple[np.ndarray, np.ndarray]:
    lap = g.laplacian
    n = g.n
    if n <= _DENSE_EIG_LIMIT:
        vals, vecs = np.linalg.eigh(lap.toarray())
        return vals[:count], vecs[:, :count]
    v0 = np.linspace(1.0, 2.0, n)
    vals, vecs = eigsh(lap.astype(np.float64), k=count, which="SA", v0=v0, maxiter=50 * n)
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def laplacian_spectrum(g: LabeledGraph, count: int = 10) -> np.ndarray:
    """Smallest Laplacian eigenvalues, ascending.

    Diagnostic only: the first large gap hints at the cluster count, but the
    reading is subjective, so nothing in the pipeline picks K from it.
    """
    count = min(count, g.n - 1)
    vals, _ = _smallest_eigvecs(g, count)
    return vals


def spectral_cluster(g: LabeledGraph, k_classes: int, seed: int) -> np.ndarray:
    """k-means over the smallest nontrivial Laplacian eigenvectors; labels up to permutation."""
    if k_classes < 2:
        raise DataError(f"need at least 2 classes, got {k_classes}")
    n = g.n
    if n < k_classes:
        raise DataError(f"cannot split {n} nodes into {k_classes} classes")
    n_comp, _ = connected_components(g.adjacency, directed=False)
    if n_comp > k_classes:
        warnings.warn(f"graph has {n_comp} components for {k_classes} classes; k-means will merge them", stacklevel=2)

    count = min(n, k_classes - 1 + n_comp)
    vals, vecs = _smallest_eigvecs(g, count)
    zero_tol = 1e-8 * max(g.degrees.max(), 1.0)
    zero = vals < zero_tol

    columns: list[np.ndarray] = []
    if np.any(zero):
        # replace the zero eigenspace by a basis orthogonal to the constant vector
        ones = np.full((n, 1), 1.0 / np.sqrt(n))
        q, _ = np.linalg.qr(np.hstack([ones, vecs[:, zero]]))
        z = int(zero.sum())
        if z > 1:
            columns.append(q[:, 1:z])
    if np.any(~zero):
        columns.append(vecs[:, ~zero])
    if not columns:
        raise NumericalError("no usable eigenvectors for the spectral embedding")
    embedding = np.hstack(columns)[:, : k_classes - 1]
    dictionary = fit_kmeans(embedding, k_classes, seed=seed)
    return assign(dictionary, embedding)


def laplace_learn(g: LabeledGraph, n_classes: int | None = None) -> tuple[LabelField, np.ndarray]:
    """Propagate labels by solving L u = 0 on unlabelled nodes with clamped boundaries.

    Connected components without any labelled node get uniform scores and are
    flagged; their argmax falls back to class 0.
    """
    if g.labels is None or g.label_mask is None:
        raise DataError("graph carries no labels; call with_labels first")
    labels, mask = g.labels, g.label_mask
    k = _infer_classes(labels, mask, n_classes)
    n = g.n
    y = _one_hot(labels, mask, k)
    u = np.zeros((n, k))
    u[mask] = y[mask]
    flagged = np.zeros(n, dtype=bool)

    if not np.all(mask):
        _, comp = connected_components(g.adjacency, directed=False)
        labelled_comps = set(comp[mask].tolist())
        orphan = ~np.isin(comp, list(labelled_comps)) & ~mask
        if np.any(orphan):
            warnings.warn(f"{int(orphan.sum())} unlabelled nodes in components without labels", stacklevel=2)
            u[orphan] = 1.0 / k
            flagged[orphan] = True
        solve = ~mask & ~orphan
        if np.any(solve):
            lap = g.laplacian.tocsc()
            idx = np.flatnonzero(solve)
            lab = np.flatnonzero(mask)
            l_uu = lap[idx][:, idx]
            rhs = -lap[idx][:, lab] @ y[lab]
            u[idx] = splu(l_uu.tocsc()).solve(np.asarray(rhs))

    preds = np.argmax(u, axis=1)
    return LabelField(u=u, flagged=flagged if flagged.any() else None), preds


def poisson_rhs(labels: np.ndarray, mask: np.ndarray, n_classes: int | None = None) -> np.ndarray:
    """Point sources y_i - ybar at labelled nodes; every column sums to zero."""
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    k = _infer_classes(labels, mask, n_classes)
    y = _one_hot(labels, mask, k)
    ybar = y[mask].mean(axis=0)
    b = np.zeros_like(y)
    b[mask] = y[mask] - ybar
    return b


def _projected_pcg(lap: sparse.csr_matrix, b: np.ndarray, tol: float, max_iter: int):
    """Jacobi-preconditioned CG for L x = b restricted to mean-zero columns."""

    def project(v: np.ndarray) -> np.ndarray:
        return v - v.mean(axis=0, keepdims=True)

    minv = 1.0 / np.maximum(lap.diagonal(), 1e-12)
    b = project(b)
    b_norm = np.linalg.norm(b)
    x = np.zeros_like(b)
    if b_norm == 0.0:
        return x, True, 0.0
    r = b.copy()
    z = project(minv[:, None] * r)
    p = z.copy()
    rz = float(np.sum(r * z))
    best_x, best_res = x.copy(), np.linalg.norm(r)
    for _ in range(max_iter):
        q = project(lap @ p)
        denom = float(np.sum(p * q))
        if denom <= 0.0:
            break
        alpha = rz / denom
        x = x + alpha * p
        r = r - alpha * q
        res = np.linalg.norm(r)
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= tol * b_norm:
            return x, True, float(res)
        z = project(minv[:, None] * r)
        rz_new = float(np.sum(r * z))
        if rz_new <= 0.0 or rz <= 0.0:
            break
        p = z + (rz_new / rz) * p
        rz = rz_new
    return best_x, False, float(best_res)


def poisson_learn(
    g: LabeledGraph,
    max_iter: int | None = None,
    tol: float = 1e-10,
    n_classes: int | None = None,
) -> tuple[LabelField, np.ndarray]:
    """Propagate labels by solving L u = b with zero-mean sources at labelled nodes.

    Disconnected graphs are handled per component: a component whose labelled
    nodes all share one class saturates to that class; a component with no
    labels gets uniform flagged scores.
    """
    if g.labels is None or g.label_mask is None:
        raise DataError("graph carries no labels; call with_labels first")
    labels, mask = g.labels, g.label_mask
    k = _infer_classes(labels, mask, n_classes)
    n = g.n
    y = _one_hot(labels, mask, k)
    u = np.zeros((n, k))
    flagged = np.zeros(n, dtype=bool)
    converged = True
    worst_residual = 0.0

    _, comp = connected_components(g.adjacency, directed=False)
    for c in np.unique(comp):
        nodes = np.flatnonzero(comp == c)
        lab = nodes[mask[nodes]]
        if lab.size == 0:
            u[nodes] = 1.0 / k
            flagged[nodes] = True
            continue
        present = np.unique(labels[lab])
        if present.size == 1:
            u[nodes, present[0]] = 1.0
            continue
        ybar = y[lab].mean(axis=0)
        b = np.zeros((nodes.size, k))
        local_lab = np.flatnonzero(mask[nodes])
        b[local_lab] = y[lab] - ybar
        sub = g.laplacian[nodes][:, nodes].tocsr()
        sol, ok, res = _projected_pcg(sub, b, tol, max_iter if max_iter is not None else 10 * nodes.size)
        u[nodes] = sol
        converged = converged and ok
        worst_residual = max(worst_residual, res)

    preds = np.argmax(u, axis=1)
    return (
        LabelField(
            u=u,
            flagged=flagged if flagged.any() else None,
            converged=converged,
            residual=worst_residual,
        ),
        preds,
    )
