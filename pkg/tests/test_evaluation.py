from itertools import permutations

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from microfp.dataset import FoldPlan, stratified_fold_assignments
from microfp.errors import DataError
from microfp.evaluation import (
    ConfusionMatrix,
    MethodSpec,
    accuracy,
    accuracy_score,
    label_rate_sweep,
    match_permutation,
    run_cv,
    run_cv_refit,
)
from microfp.fingerprint import FingerprintRecipe, FingerprintStack
from microfp.keypoints import FeatureSet


def make_stack(X, recipe_kind="patch"):
    recipe = FingerprintRecipe(recipe_kind, 0, (X.shape[1],))
    return FingerprintStack(matrix=X, ids=[f"i{k}" for k in range(X.shape[0])], recipe=recipe)


def separable_stack(rng, n_per=30, n_classes=2, gap=6.0, spread=0.5, d=4):
    X = np.vstack([rng.normal(gap * c, spread, size=(n_per, d)) for c in range(n_classes)])
    X = np.abs(X)  # keep chi2-compatible
    y = np.repeat(np.arange(n_classes), n_per)
    return make_stack(X), y


def plan_for(labels, n_folds=5, seed=0):
    return FoldPlan(n_folds, stratified_fold_assignments(labels, n_folds, seed))


class TestAccuracy:
    def test_diagonal_is_one(self):
        c = ConfusionMatrix(np.diag([5, 3, 2]))
        assert accuracy(c) == 1.0

    def test_zero_diagonal_is_zero(self):
        c = ConfusionMatrix(np.array([[0, 4], [6, 0]]))
        assert accuracy(c) == 0.0

    def test_hand_computed(self):
        c = ConfusionMatrix(np.array([[3, 1], [2, 4]]))
        assert accuracy(c) == pytest.approx(7 / 10)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            accuracy(ConfusionMatrix(np.zeros((2, 2), dtype=int)))

    def test_counts_total(self, rng):
        true = rng.integers(0, 3, 50)
        pred = rng.integers(0, 3, 50)
        c = ConfusionMatrix.from_labels(true, pred, 3)
        assert c.total == 50


class TestMatchPermutation:
    def test_renamed_labels_recover_full_accuracy(self, rng):
        true = rng.integers(0, 2, 30)
        pred = 1 - true
        perm, acc = match_permutation(true, pred, 2)
        assert acc == 1.0
        assert perm == (1, 0)

    def test_identity_when_identical(self, rng):
        true = rng.integers(0, 3, 30)
        perm, acc = match_permutation(true, true, 3)
        assert acc == 1.0
        assert perm == (0, 1, 2)

    def test_matches_assignment_solver(self, rng):
        for _ in range(25):
            true = rng.integers(0, 3, 12)
            pred = rng.integers(0, 3, 12)
            perm, acc = match_permutation(true, pred, 3)
            confusion = ConfusionMatrix.from_labels(pred, true, 3).counts
            rows, cols = linear_sum_assignment(-confusion)
            lsa_acc = confusion[rows, cols].sum() / 12
            assert acc == pytest.approx(lsa_acc)

    def test_never_worse_than_unpermuted(self, rng):
        for _ in range(20):
            true = rng.integers(0, 4, 25)
            pred = rng.integers(0, 4, 25)
            _, acc = match_permutation(true, pred, 4)
            assert acc >= (true == pred).mean() - 1e-12

    def test_exhaustive_is_optimal(self, rng):
        true = rng.integers(0, 3, 15)
        pred = rng.integers(0, 3, 15)
        _, acc = match_permutation(true, pred, 3)
        best = max(np.mean(np.asarray(p)[pred] == true) for p in permutations(range(3)))
        assert acc == pytest.approx(best)


class TestRunCv:
    def test_svm_separable_perfect(self, rng):
        stack, y = separable_stack(rng)
        res = run_cv(stack, y, MethodSpec(kind="svm", kernel="linear"), plan_for(y), seed=0)
        assert res.mean == 1.0

    def test_majority_baseline_equals_class_share(self, rng):
        X = np.abs(rng.standard_normal((40, 3)))
        y = np.array([0] * 30 + [1] * 10)
        res = run_cv(make_stack(X), y, MethodSpec(kind="majority"), plan_for(y), seed=0)
        assert res.mean == pytest.approx(0.75, abs=1e-9)

    def test_std_is_population_std(self, rng):
        stack, y = separable_stack(rng, n_per=20, spread=3.0, gap=4.0)
        res = run_cv(stack, y, MethodSpec(kind="rf", n_trees=10), plan_for(y), seed=1)
        assert res.std == pytest.approx(float(np.std(res.fold_accuracies)))

    def test_fold_confusions_cover_everything_once(self, rng):
        stack, y = separable_stack(rng, n_per=25)
        res = run_cv(stack, y, MethodSpec(kind="svm"), plan_for(y), seed=0)
        total = sum(c.total for c in res.confusions)
        assert total == len(y)

    def test_ssl_full_reveal_boundary_identity(self, rng):
        stack, y = separable_stack(rng)
        method = MethodSpec(kind="laplace", knn=6, label_rate=1.0)
        res = run_cv(stack, y, method, plan_for(y), seed=0)
        assert res.mean == 1.0

    def test_poisson_cv_runs(self, rng):
        stack, y = separable_stack(rng)
        method = MethodSpec(kind="poisson", knn=6, label_rate=0.1)
        res = run_cv(stack, y, method, plan_for(y), seed=0)
        assert res.mean >= 0.9
        assert res.protocol["ssl_score"] == "holdout"

    def test_ul_methods_run(self, rng):
        stack, y = separable_stack(rng)
        for kind in ("kmeans", "spectral"):
            res = run_cv(stack, y, MethodSpec(kind=kind, knn=6), plan_for(y), seed=0)
            assert res.mean == 1.0

    def test_all_unlabelled_scoring(self, rng):
        stack, y = separable_stack(rng)
        res = run_cv(stack, y, MethodSpec(kind="laplace", knn=6), plan_for(y), seed=0, ssl_score="all-unlabelled")
        assert res.protocol["ssl_score"] == "all-unlabelled"
        assert res.mean >= 0.9

    def test_pca_reduction_keeps_accuracy(self, rng):
        stack, y = separable_stack(rng, d=10)
        res = run_cv(stack, y, MethodSpec(kind="svm"), plan_for(y), seed=0, pca_r=3)
        assert res.mean == 1.0
        res2 = run_cv(stack, y, MethodSpec(kind="svm"), plan_for(y), seed=0, pca_r=3, pca_per_fold=True)
        assert res2.mean == 1.0
        assert res2.protocol["pca_per_fold"]

    def test_refit_protocol(self, rng):
        sets = []
        y = []
        for i in range(24):
            cls = i % 2
            centre = np.array([0.0, 0.0]) if cls == 0 else np.array([8.0, 8.0])
            sets.append(FeatureSet(f"i{i}", np.abs(rng.normal(centre, 0.5, size=(15, 2))), "patch"))
            y.append(cls)
        y = np.asarray(y)
        res = run_cv_refit(sets, y, MethodSpec(kind="svm"), plan_for(y, 4), k_values=(4,), order=0)
        assert res.mean == 1.0
        assert res.protocol["dict_per_fold"]


class TestLabelRateSweep:
    def test_full_rate_equals_plain_cv(self, rng):
        stack, y = separable_stack(rng)
        method = MethodSpec(kind="svm")
        rows = label_rate_sweep(stack, y, [1.0], [method], repetitions=2, seed=4)
        baseline = []
        for rep in range(2):
            rep_seed = int(np.random.SeedSequence((4, rep)).generate_state(1)[0])
            plan = FoldPlan(10, stratified_fold_assignments(y, 10, rep_seed))
            baseline.append(run_cv(stack, y, method, plan, seed=rep_seed).mean)
        assert rows[0]["mean_acc"] == pytest.approx(float(np.mean(baseline)))

    def test_too_small_p_marked_invalid(self, rng):
        stack, y = separable_stack(rng, n_per=20)
        rows = label_rate_sweep(stack, y, [0.01], [MethodSpec(kind="svm")], repetitions=1, seed=0)
        assert rows[0]["valid"] is False

    def test_endpoint_monotonicity_on_separable_data(self, rng):
        stack, y = separable_stack(rng, n_per=50, spread=1.0)
        methods = [MethodSpec(kind="svm"), MethodSpec(kind="laplace", knn=8), MethodSpec(kind="poisson", knn=8)]
        rows = label_rate_sweep(stack, y, [0.05, 0.5], methods, repetitions=2, seed=0)
        by_method = {}
        for row in rows:
            by_method.setdefault(row["method"], {})[row["p"]] = row["mean_acc"]
        for method, accs in by_method.items():
            assert accs[0.5] >= accs[0.05] - 1e-9

    def test_ssl_invalid_at_p_one(self, rng):
        stack, y = separable_stack(rng)
        rows = label_rate_sweep(stack, y, [1.0], [MethodSpec(kind="laplace")], repetitions=1, seed=0)
        assert rows[0]["valid"] is False

    def test_accuracy_score_helper(self, rng):
        y = rng.integers(0, 2, 20)
        assert accuracy_score(y, y, 2) == 1.0
