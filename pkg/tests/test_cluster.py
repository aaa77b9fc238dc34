from itertools import product

import numpy as np
import pytest

from microfp.cluster import Dictionary, assign, fit_kmeans, load_dictionary, save_dictionary
from microfp.errors import DataError
from microfp.featureio import Population
from microfp.keypoints import FeatureSet


def brute_force_assign(X, centres):
    """Independent per-row nearest-centre scan."""
    labels = np.empty(X.shape[0], dtype=np.int64)
    for i, row in enumerate(X):
        d2 = [np.sum((row - c) ** 2) for c in centres]
        labels[i] = int(np.argmin(d2))
    return labels


def brute_force_two_cluster_sse(points):
    """Exhaustive best 2-partition by within-cluster SSE; returns centres."""
    n = len(points)
    best = None
    for bits in product([0, 1], repeat=n):
        bits = np.asarray(bits)
        if bits.min() == bits.max():
            continue
        sse = 0.0
        centres = []
        for side in (0, 1):
            grp = points[bits == side]
            mu = grp.mean(axis=0)
            centres.append(mu)
            sse += np.sum((grp - mu) ** 2)
        if best is None or sse < best[0]:
            best = (sse, centres)
    return best[1]


class TestFitKmeans:
    def test_single_cluster_is_column_mean(self, rng):
        X = rng.standard_normal((50, 4))
        dictionary = fit_kmeans(X, 1, seed=0)
        assert np.allclose(dictionary.centres[0], X.mean(axis=0), atol=1e-12)

    def test_two_clusters_match_exhaustive_partition(self):
        points = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
        expected = brute_force_two_cluster_sse(points)
        dictionary = fit_kmeans(points, 2, seed=1)
        got = sorted(dictionary.centres.tolist())
        want = sorted(np.asarray(expected).tolist())
        assert np.allclose(got, want)
        assert np.allclose(sorted(c[0] for c in got), [0.0, 10.0])
        assert np.allclose([c[1] for c in got], [0.5, 0.5])

    def test_inertia_history_non_increasing(self, rng):
        X = rng.standard_normal((400, 8))
        dictionary = fit_kmeans(X, 7, seed=3)
        hist = dictionary.inertia_history
        assert len(hist) >= 2
        drops = np.diff(hist)
        assert np.all(drops <= 1e-9 * np.abs(hist[:-1]))

    def test_every_centre_keeps_members(self, rng):
        X = rng.standard_normal((60, 3))
        dictionary = fit_kmeans(X, 12, seed=5)
        labels = assign(dictionary, X)
        assert set(labels.tolist()) == set(range(12))

    def test_deterministic_given_seed(self, rng):
        X = rng.standard_normal((100, 5))
        a = fit_kmeans(X, 6, seed=11)
        b = fit_kmeans(X, 6, seed=11)
        assert np.array_equal(a.centres, b.centres)
        assert a.inertia == b.inertia

    def test_k_larger_than_population(self, rng):
        with pytest.raises(DataError):
            fit_kmeans(rng.standard_normal((4, 2)), 5, seed=0)

    def test_non_finite_rejected(self):
        X = np.full((10, 2), np.nan)
        with pytest.raises(Exception):
            fit_kmeans(X, 2, seed=0)

    def test_population_kind_carried(self, rng):
        pop = Population(rng.random((30, 4)), [("a", i) for i in range(30)], descriptor_kind="surf")
        dictionary = fit_kmeans(pop, 3, seed=0)
        assert dictionary.descriptor_kind == "surf"


class TestAssign:
    def test_feature_at_centre(self):
        dictionary = Dictionary(centres=np.eye(3), inertia=0.0)
        labels = assign(dictionary, np.array([[0.0, 0.0, 1.0]]))
        assert labels.tolist() == [2]

    def test_tie_breaks_to_lowest_index(self):
        dictionary = Dictionary(centres=np.array([[0.0, 0.0], [2.0, 0.0]]), inertia=0.0)
        labels = assign(dictionary, np.array([[1.0, 0.0]]))
        assert labels.tolist() == [0]

    def test_matches_brute_force_scan(self, rng):
        X = rng.standard_normal((200, 6))
        dictionary = fit_kmeans(X, 9, seed=2)
        assert np.array_equal(assign(dictionary, X), brute_force_assign(X, dictionary.centres))

    def test_dimension_mismatch(self, rng):
        dictionary = Dictionary(centres=rng.random((3, 4)), inertia=0.0)
        with pytest.raises(DataError):
            assign(dictionary, rng.random((5, 6)))


class TestDictionaryIo:
    def test_save_load_round_trip(self, tmp_path, rng):
        fs = FeatureSet("x", rng.random((40, 8)), "patch")
        dictionary = fit_kmeans(fs, 4, seed=7)
        path = tmp_path / "dict.mfp1"
        save_dictionary(dictionary, path)
        loaded = load_dictionary(path)
        assert loaded.k == 4
        assert loaded.descriptor_kind == "patch"
        assert np.allclose(loaded.centres, dictionary.centres, atol=1e-6)
