"""Cross-validated accuracy scoring for SL, SSL and UL classifiers.

SL methods train on the nine training folds and score the held-out fold. SSL
methods build the kNN graph over all fingerprints, reveal a stratified subset
of training-fold labels and score either the held-out fold (default) or every
unrevealed node. UL methods cluster once without labels; the label permutation
is fitted on the training folds and applied to the held-out fold.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import fingerprint as fp
from .cluster import fit_kmeans
from .dataset import FoldPlan, stratified_fold_assignments
from .errors import DataError
from .featureio import build_population
from .graph import knn_graph, laplace_learn, poisson_learn, spectral_cluster
from .supervised import (
    EcocModel,
    ForestParams,
    KernelSpec,
    ecoc_predict,
    ecoc_train,
    forest_predict,
    forest_train,
    kmeans_classify,
)

SL_KINDS = ("svm", "rf", "majority")
UL_KINDS = ("kmeans", "spectral")
SSL_KINDS = ("laplace", "poisson")


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns are predictions."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise DataError(f"confusion matrix must be square, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise DataError("confusion matrix counts must be non-negative")

    @classmethod
    def from_labels(cls, true: np.ndarray, pred: np.ndarray, n_classes: int) -> "ConfusionMatrix":
        true = np.asarray(true, dtype=np.int64)
        pred = np.asarray(pred, dtype=np.int64)
        if true.shape != pred.shape:
            raise DataError("true and predicted labels differ in length")
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (true, pred), 1)
        return cls(counts=counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def accuracy(confusion: ConfusionMatrix) -> float:
    """Trace over total count."""
    total = confusion.total
    if total == 0:
        raise DataError("empty confusion matrix")
    return float(np.trace(confusion.counts)) / total


def accuracy_score(true: np.ndarray, pred: np.ndarray, n_classes: int) -> float:
    return accuracy(ConfusionMatrix.from_labels(true, pred, n_classes))


def match_permutation(true: np.ndarray, pred: np.ndarray, n_classes: int) -> tuple[tuple[int, ...], float]:
    """Relabelling of predicted clusters that maximises agreement with the truth.

    Exhaustive over all permutations up to 8 classes, assignment-problem
    solver beyond that. Ties go to the lexicographically smallest permutation.
    """
    true = np.asarray(true, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if true.shape != pred.shape:
        raise DataError("true and predicted labels differ in length")
    confusion = ConfusionMatrix.from_labels(pred, true, n_classes).counts  # rows: predicted
    if n_classes <= 8:
        best_perm: tuple[int, ...] | None = None
        best_hits = -1
        for perm in permutations(range(n_classes)):
            hits = int(sum(confusion[c, perm[c]] for c in range(n_classes)))
            if hits > best_hits:
                best_hits = hits
                best_perm = perm
        assert best_perm is not None
        return best_perm, best_hits / true.shape[0]
    rows, cols = linear_sum_assignment(-confusion)
    perm = np.empty(n_classes, dtype=np.int64)
    perm[rows] = cols
    hits = int(confusion[rows, cols].sum())
    return tuple(int(c) for c in perm), hits / true.shape[0]


@dataclass(frozen=True)
class MethodSpec:
    """Classifier choice plus its fixed hyperparameters."""

    kind: str
    kernel: str = "linear"
    gamma: float | None = None
    C: float = 1.0
    n_trees: int = 500
    max_depth: int = 10
    min_leaf: int = 1
    knn: int = 10
    label_rate: float = 0.05

    def __post_init__(self) -> None:
        if self.kind not in SL_KINDS + UL_KINDS + SSL_KINDS:
            raise DataError(f"unknown method {self.kind!r}")


@dataclass
class CvResult:
    fold_accuracies: np.ndarray
    mean: float
    std: float
    recipe: fp.FingerprintRecipe | None
    protocol: dict
    confusions: list[ConfusionMatrix] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.fold_accuracies = np.asarray(self.fold_accuracies, dtype=np.float64)
        if np.any(self.fold_accuracies < 0) or np.any(self.fold_accuracies > 1):
            raise DataError("accuracies must lie in [0, 1]")


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence((seed, fold)).generate_state(1)[0])


def _stratified_subset(labels: np.ndarray, pool: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """Pick m indices from pool, spread over classes proportionally, >= 1 each."""
    classes, counts = np.unique(labels[pool], return_counts=True)
    if m < classes.size:
        raise DataError(f"cannot cover {classes.size} classes with {m} labels")
    if m > pool.size:
        raise DataError(f"cannot reveal {m} labels from a pool of {pool.size}")
    quota = m * counts / counts.sum()
    take = np.minimum(np.maximum(np.floor(quota).astype(np.int64), 1), counts)
    while take.sum() > m:
        over = np.argsort(-(take - quota), kind="stable")
        for idx in over:
            if take[idx] > 1:
                take[idx] -= 1
                break
    while take.sum() < m:
        under = np.argsort(-(quota - take), kind="stable")
        moved = False
        for idx in under:
            if take[idx] < counts[idx]:
                take[idx] += 1
                moved = True
                break
        if not moved:
            break
    chosen = [
        rng.choice(pool[labels[pool] == cls], size=int(k), replace=False) for cls, k in zip(classes, take)
    ]
    return np.sort(np.concatenate(chosen))


def _fit_predict_sl(
    X_train, y_train, X_test, method: MethodSpec, n_classes: int, seed: int
) -> np.ndarray:
    if method.kind == "svm":
        kernel = KernelSpec(method.kernel, method.gamma)
        model: EcocModel = ecoc_train(X_train, y_train, kernel=kernel, C=method.C, n_classes=n_classes)
        return ecoc_predict(model, X_test)
    if method.kind == "rf":
        params = ForestParams(
            n_trees=method.n_trees,
            max_depth=method.max_depth,
            min_leaf=method.min_leaf,
            seed=seed,
        )
        return forest_predict(forest_train(X_train, y_train, params), X_test)
    if method.kind == "majority":
        winner = int(np.argmax(np.bincount(np.asarray(y_train, dtype=np.int64), minlength=n_classes)))
        return np.full(np.atleast_2d(X_test).shape[0], winner, dtype=np.int64)
    raise DataError(f"{method.kind!r} is not a supervised method")


def _propagate(graph, labels, reveal_mask, method: MethodSpec, n_classes: int):
    labelled = graph.with_labels(labels, reveal_mask)
    if method.kind == "laplace":
        _, preds = laplace_learn(labelled, n_classes=n_classes)
    else:
        _, preds = poisson_learn(labelled, n_classes=n_classes)
    return preds


def _shared_models(matrix: np.ndarray, method: MethodSpec, k_classes: int, seed: int):
    """Graph or clustering that SSL/UL methods share across folds."""
    graph = None
    cluster_pred = None
    if method.kind in SSL_KINDS:
        graph = knn_graph(matrix, method.knn)
    elif method.kind == "kmeans":
        cluster_pred = kmeans_classify(matrix, k_classes, seed=seed)
    elif method.kind == "spectral":
        cluster_pred = spectral_cluster(knn_graph(matrix, method.knn), k_classes, seed=seed)
    return graph, cluster_pred


def _eval_fold(
    matrix, labels, method, k_classes, fold, train_idx, test_idx, graph, cluster_pred, seed, ssl_score
) -> ConfusionMatrix:
    n = labels.shape[0]
    if method.kind in SL_KINDS:
        preds = _fit_predict_sl(
            matrix[train_idx], labels[train_idx], matrix[test_idx], method, k_classes, _fold_seed(seed, fold)
        )
        return ConfusionMatrix.from_labels(labels[test_idx], preds, k_classes)
    if method.kind in SSL_KINDS:
        rng = np.random.default_rng(np.random.SeedSequence((seed, fold)))
        m = max(int(round(method.label_rate * n)), k_classes)
        reveal = _stratified_subset(labels, train_idx, min(m, train_idx.size), rng)
        mask = np.zeros(n, dtype=bool)
        mask[reveal] = True
        preds = _propagate(graph, labels, mask, method, k_classes)
        score_idx = test_idx if ssl_score == "holdout" else np.flatnonzero(~mask)
        return ConfusionMatrix.from_labels(labels[score_idx], preds[score_idx], k_classes)
    perm, _ = match_permutation(labels[train_idx], cluster_pred[train_idx], k_classes)
    mapped = np.asarray(perm, dtype=np.int64)[cluster_pred[test_idx]]
    return ConfusionMatrix.from_labels(labels[test_idx], mapped, k_classes)


def run_cv(
    stack,
    labels: np.ndarray,
    method: MethodSpec,
    folds: FoldPlan,
    seed: int = 0,
    ssl_score: str = "holdout",
    n_classes: int | None = None,
    pca_r: int | None = None,
    pca_per_fold: bool = False,
    protocol_flags: dict | None = None,
) -> CvResult:
    """Evaluate one method under an existing fold plan; returns per-fold accuracies.

    ``pca_r`` reduces the stack before classification; by default the reducer
    is fitted once on the full stack, with ``pca_per_fold`` it is refitted on
    the training folds of every split (the leakage-free protocol).
    """
    from .pca import fit_pca, transform  # local import keeps module load light

    raw = np.asarray(getattr(stack, "matrix", stack), dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if raw.shape[0] != labels.shape[0]:
        raise DataError("stack and labels disagree on the sample count")
    if ssl_score not in ("holdout", "all-unlabelled"):
        raise DataError(f"unknown ssl_score {ssl_score!r}")
    k_classes = n_classes if n_classes is not None else int(labels.max()) + 1

    refit_pca = pca_per_fold and pca_r is not None
    matrix = raw
    if pca_r is not None and not refit_pca:
        matrix = transform(fit_pca(raw, pca_r), raw)
    graph = cluster_pred = None
    if not refit_pca:
        graph, cluster_pred = _shared_models(matrix, method, k_classes, seed)

    fold_accuracies = []
    confusions = []
    for fold in range(folds.n_folds):
        train_idx = folds.train_indices(fold)
        test_idx = folds.test_indices(fold)
        if refit_pca:
            model = fit_pca(raw[train_idx], min(pca_r, train_idx.size))
            fold_matrix = transform(model, raw)
            fold_graph, fold_cluster = _shared_models(fold_matrix, method, k_classes, seed)
        else:
            fold_matrix, fold_graph, fold_cluster = matrix, graph, cluster_pred
        confusion = _eval_fold(
            fold_matrix, labels, method, k_classes, fold, train_idx, test_idx, fold_graph, fold_cluster, seed, ssl_score
        )
        confusions.append(confusion)
        fold_accuracies.append(accuracy(confusion))

    fold_accuracies = np.asarray(fold_accuracies)
    protocol = {
        "method": method.kind,
        "kernel": method.kernel if method.kind == "svm" else "",
        "n_trees": method.n_trees if method.kind == "rf" else "",
        "ssl_score": ssl_score if method.kind in SSL_KINDS else "",
        "label_rate": method.label_rate if method.kind in SSL_KINDS else "",
        "dict_per_fold": False,
        "pca_per_fold": bool(refit_pca),
        "seed": seed,
    }
    if protocol_flags:
        protocol.update(protocol_flags)
    return CvResult(
        fold_accuracies=fold_accuracies,
        mean=float(fold_accuracies.mean()),
        std=float(fold_accuracies.std()),
        recipe=getattr(stack, "recipe", None),
        protocol=protocol,
        confusions=confusions,
    )


def run_cv_refit(
    feature_sets,
    labels: np.ndarray,
    method: MethodSpec,
    folds: FoldPlan,
    k_values: tuple[int, ...],
    order: int = 0,
    vlad: bool = False,
    diagonal: bool = False,
    seed: int = 0,
    kmeans_seed: int = 0,
    ssl_score: str = "holdout",
    n_classes: int | None = None,
) -> CvResult:
    """Strict protocol: refit the cluster dictionary on the training folds of every split."""
    labels = np.asarray(labels, dtype=np.int64)
    k_classes = n_classes if n_classes is not None else int(labels.max()) + 1
    fold_accuracies = []
    confusions = []
    for fold in range(folds.n_folds):
        train_idx = folds.train_indices(fold)
        test_idx = folds.test_indices(fold)
        pop = build_population([feature_sets[i] for i in train_idx])
        dictionaries = [fit_kmeans(pop, k, seed=kmeans_seed) for k in k_values]
        fps = [fp.build_fingerprint(fs, dictionaries, order, vlad=vlad, diagonal=diagonal) for fs in feature_sets]
        stack = fp.FingerprintStack.from_fingerprints(fps)
        graph, cluster_pred = _shared_models(stack.matrix, method, k_classes, seed)
        confusion = _eval_fold(
            stack.matrix, labels, method, k_classes, fold, train_idx, test_idx, graph, cluster_pred, seed, ssl_score
        )
        confusions.append(confusion)
        fold_accuracies.append(accuracy(confusion))

    fold_accuracies = np.asarray(fold_accuracies)
    protocol = {
        "method": method.kind,
        "kernel": method.kernel if method.kind == "svm" else "",
        "n_trees": method.n_trees if method.kind == "rf" else "",
        "ssl_score": ssl_score if method.kind in SSL_KINDS else "",
        "label_rate": method.label_rate if method.kind in SSL_KINDS else "",
        "dict_per_fold": True,
        "pca_per_fold": False,
        "seed": seed,
    }
    return CvResult(
        fold_accuracies=fold_accuracies,
        mean=float(fold_accuracies.mean()),
        std=float(fold_accuracies.std()),
        recipe=None,
        protocol=protocol,
        confusions=confusions,
    )


def label_rate_sweep(
    stack,
    labels: np.ndarray,
    p_list,
    methods,
    repetitions: int = 3,
    seed: int = 0,
    n_classes: int | None = None,
    n_folds: int = 10,
) -> list[dict]:
    """Accuracy of SL on a pN subset versus SSL propagation of pN labels.

    For p < 1 each repetition reveals a fresh stratified subset; SL trains on
    it and SSL propagates from it, both scored on the complement. p = 1 falls
    back to plain k-fold CV for SL methods and is invalid for SSL.
    """
    matrix = np.asarray(getattr(stack, "matrix", stack), dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    k_classes = n_classes if n_classes is not None else int(labels.max()) + 1
    n = labels.shape[0]
    graphs: dict[int, object] = {}
    rows: list[dict] = []
    recipe = getattr(stack, "recipe", None)
    recipe_tag = recipe.tag() if recipe is not None else ""

    for method in methods:
        if method.kind in SSL_KINDS and method.knn not in graphs:
            graphs[method.knn] = knn_graph(matrix, method.knn)
        for p in p_list:
            if not 0.0 < p <= 1.0:
                raise DataError(f"label rate must be in (0, 1], got {p}")
            m = int(round(p * n))
            row = {
                "recipe": recipe_tag,
                "method": method.kind,
                "p": p,
                "mean_acc": float("nan"),
                "std_acc": float("nan"),
                "repetitions": repetitions,
                "seed": seed,
                "valid": True,
            }
            if m < k_classes or (p >= 1.0 and method.kind not in SL_KINDS):
                row["valid"] = False
                rows.append(row)
                continue
            accs = []
            for rep in range(repetitions):
                rep_seed = _fold_seed(seed, rep)
                if p >= 1.0:
                    plan = FoldPlan(n_folds, stratified_fold_assignments(labels, n_folds, rep_seed))
                    accs.append(run_cv(stack, labels, method, plan, seed=rep_seed, n_classes=k_classes).mean)
                    continue
                rng = np.random.default_rng(np.random.SeedSequence((seed, rep)))
                reveal = _stratified_subset(labels, np.arange(n), m, rng)
                mask = np.zeros(n, dtype=bool)
                mask[reveal] = True
                rest = np.flatnonzero(~mask)
                if method.kind in SL_KINDS:
                    preds = _fit_predict_sl(
                        matrix[reveal], labels[reveal], matrix[rest], method, k_classes, rep_seed
                    )
                    accs.append(accuracy_score(labels[rest], preds, k_classes))
                elif method.kind in SSL_KINDS:
                    preds = _propagate(graphs[method.knn], labels, mask, method, k_classes)
                    accs.append(accuracy_score(labels[rest], preds[rest], k_classes))
                else:
                    if method.kind == "spectral":
                        if method.knn not in graphs:
                            graphs[method.knn] = knn_graph(matrix, method.knn)
                        cluster_pred = spectral_cluster(graphs[method.knn], k_classes, seed=rep_seed)
                    else:
                        cluster_pred = kmeans_classify(matrix, k_classes, seed=rep_seed)
                    perm, _ = match_permutation(labels[reveal], cluster_pred[reveal], k_classes)
                    mapped = np.asarray(perm, dtype=np.int64)[cluster_pred[rest]]
                    accs.append(accuracy_score(labels[rest], mapped, k_classes))
            accs = np.asarray(accs)
            row["mean_acc"] = float(accs.mean())
            row["std_acc"] = float(accs.std())
            rows.append(row)
    return rows


def sweep_to_csv(rows: list[dict], path: str | Path, config_echo: dict | None = None) -> None:
    path = Path(path)
    fields = ["recipe", "method", "p", "mean_acc", "std_acc", "repetitions", "seed", "valid"]
    with path.open("w", newline="") as fh:
        if config_echo is not None:
            fh.write(f"# config {json.dumps(config_echo, sort_keys=True)}\n")
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for key in ("mean_acc", "std_acc"):
                out[key] = "" if isinstance(out[key], float) and np.isnan(out[key]) else f"{out[key]:.6f}"
            out["p"] = f"{row['p']:.6g}"
            writer.writerow(out)
