import numpy as np
import pytest

from microfp.cluster import Dictionary
from microfp.errors import DataError
from microfp.fingerprint import (
    FingerprintStack,
    build_fingerprint,
    cnn_as_features,
    cnn_flatten,
    cnn_maxpool,
    combine_with_h0,
    h0,
    h1,
    h2,
    load_stack,
    multiscale,
    save_stack,
)
from microfp.keypoints import FeatureSet


def make_dictionary(centres):
    return Dictionary(centres=np.asarray(centres, dtype=float), inertia=0.0, descriptor_kind="patch")


@pytest.fixture
def dict3():
    return make_dictionary([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])


def random_pair(rng, j=40, d=5, k=4):
    feats = FeatureSet("r", rng.standard_normal((j, d)), "patch")
    centres = rng.standard_normal((k, d)) * 2
    return feats, make_dictionary(centres)


class TestH0:
    def test_all_in_one_cluster(self, dict3):
        fs = FeatureSet("a", np.zeros((7, 2)), "patch")
        assert np.allclose(h0(fs, dict3).values, [1.0, 0.0, 0.0])

    def test_counting(self, dict3):
        rows = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        fs = FeatureSet("b", rows, "patch")
        assert np.allclose(h0(fs, dict3).values, [0.5, 0.25, 0.25])

    def test_matches_counting_oracle(self, rng):
        fs, dic = random_pair(rng)
        # independent oracle: per-row nearest centre scan, then bin counting
        labels = [int(np.argmin([np.sum((row - c) ** 2) for c in dic.centres])) for row in fs.features]
        expected = np.zeros(dic.k)
        for lab in labels:
            expected[lab] += 1
        expected /= len(labels)
        assert np.allclose(h0(fs, dic).values, expected, atol=1e-12)

    def test_sums_to_one(self, rng):
        for _ in range(20):
            fs, dic = random_pair(rng, j=int(rng.integers(1, 60)))
            assert abs(h0(fs, dic).values.sum() - 1.0) < 1e-12

    def test_empty_feature_set_rejected(self, dict3):
        fs = FeatureSet("e", np.empty((0, 2)), "patch")
        with pytest.raises(DataError):
            h0(fs, dict3)


class TestH1:
    def test_single_feature(self, dict3):
        s = np.array([[1.0, 2.0]])
        fp = h1(FeatureSet("a", s, "patch"), dict3)
        rows = fp.values.reshape(3, 2)
        assert np.allclose(rows[0], s[0])
        assert np.allclose(rows[1:], 0.0)

    def test_means_by_hand(self, dict3):
        rows = np.array([[0.0, 1.0], [2.0, 1.0], [9.0, 0.0], [11.0, 2.0]])
        fp = h1(FeatureSet("b", rows, "patch"), dict3)
        out = fp.values.reshape(3, 2)
        assert np.allclose(out[0], [1.0, 1.0])
        assert np.allclose(out[1], [10.0, 1.0])
        assert np.allclose(out[2], [0.0, 0.0])

    def test_vlad_unit_norm_blocks(self, rng):
        fs, dic = random_pair(rng, j=80)
        fp = h1(fs, dic, vlad=True)
        rows = fp.values.reshape(dic.k, -1)
        for row in rows:
            norm = np.linalg.norm(row)
            assert norm < 1e-12 or abs(norm - 1.0) < 1e-9

    def test_vlad_direction(self, dict3):
        rows = np.array([[2.0, 0.0]])
        fp = h1(FeatureSet("c", rows, "patch"), dict3, vlad=True)
        out = fp.values.reshape(3, 2)
        assert np.allclose(out[0], [1.0, 0.0])  # (mean - centre) normalised


class TestH2:
    def test_single_member_cluster_zero_block(self, dict3):
        fp = h2(FeatureSet("a", np.array([[1.0, 1.0]]), "patch"), dict3)
        assert np.allclose(fp.values, 0.0)

    def test_population_variance_diagonal(self):
        dic = make_dictionary([[1.0, 0.0]])
        fs = FeatureSet("b", np.array([[0.0, 0.0], [2.0, 0.0]]), "patch")
        fp = h2(fs, dic, diagonal=True)
        # divisor is the member count: var = ((0-1)^2 + (2-1)^2) / 2 = 1
        assert np.allclose(fp.values, [1.0, 0.0])

    def test_full_blocks_symmetric_psd(self, rng):
        fs, dic = random_pair(rng, j=60, d=4, k=3)
        fp = h2(fs, dic)
        blocks = fp.values.reshape(3, 4, 4)
        for block in blocks:
            assert np.allclose(block, block.T, atol=1e-12)
            assert np.linalg.eigvalsh(block).min() >= -1e-10
            assert np.all(np.diag(block) >= -1e-12)

    def test_duplication_invariance(self, rng):
        fs, dic = random_pair(rng, j=30)
        doubled = FeatureSet("d", np.vstack([fs.features, fs.features]), "patch")
        for build in (
            lambda f: h0(f, dic).values,
            lambda f: h1(f, dic).values,
            lambda f: h1(f, dic, vlad=True).values,
            lambda f: h2(f, dic).values,
        ):
            assert np.allclose(build(fs), build(doubled), atol=1e-12)

    def test_permutation_invariance(self, rng):
        fs, dic = random_pair(rng, j=50)
        perm = rng.permutation(50)
        shuffled = FeatureSet("p", fs.features[perm], "patch")
        for build in (
            lambda f: h0(f, dic).values,
            lambda f: h1(f, dic).values,
            lambda f: h2(f, dic, vlad=True).values,
            lambda f: h2(f, dic, diagonal=True).values,
        ):
            assert np.allclose(build(fs), build(shuffled), atol=1e-12)

    def test_lengths(self, rng):
        fs, dic = random_pair(rng, j=20, d=5, k=4)
        assert h0(fs, dic).n == 4
        assert h1(fs, dic).n == 20
        assert h2(fs, dic).n == 100
        assert h2(fs, dic, diagonal=True).n == 20


class TestMultiscale:
    def test_concatenated_length(self, rng):
        fs = FeatureSet("m", rng.standard_normal((30, 3)), "patch")
        d20 = make_dictionary(rng.standard_normal((20, 3)))
        d30 = make_dictionary(rng.standard_normal((30, 3)))
        fp = multiscale([h0(fs, d20), h0(fs, d30)])
        assert fp.n == 50
        assert fp.recipe.k_values == (20, 30)

    def test_single_identity(self, rng):
        fs = FeatureSet("m", rng.standard_normal((10, 3)), "patch")
        d = make_dictionary(rng.standard_normal((5, 3)))
        one = h0(fs, d)
        assert multiscale([one]) is one

    def test_triple_matches_h0_100(self, rng):
        fs = FeatureSet("m", rng.standard_normal((40, 3)), "patch")
        parts = [h0(fs, make_dictionary(rng.standard_normal((k, 3)))) for k in (20, 30, 50)]
        combined = multiscale(parts)
        d100 = make_dictionary(rng.standard_normal((100, 3)))
        assert combined.n == h0(fs, d100).n == 100

    def test_mismatched_image_rejected(self, rng):
        d = make_dictionary(rng.standard_normal((4, 3)))
        a = h0(FeatureSet("a", rng.standard_normal((5, 3)), "patch"), d)
        b = h0(FeatureSet("b", rng.standard_normal((5, 3)), "patch"), d)
        with pytest.raises(DataError, match="share one image"):
            multiscale([a, b])

    def test_duplicate_k_rejected(self, rng):
        fs = FeatureSet("a", rng.standard_normal((5, 3)), "patch")
        d = make_dictionary(rng.standard_normal((4, 3)))
        with pytest.raises(DataError, match="distinct"):
            multiscale([h0(fs, d), h0(fs, d)])

    def test_combined_with_h0_length(self, rng):
        fs = FeatureSet("a", rng.standard_normal((12, 5)), "patch")
        d = make_dictionary(rng.standard_normal((4, 5)))
        fp = combine_with_h0(h0(fs, d), h1(fs, d))
        assert fp.n == 4 * (5 + 1)
        assert fp.recipe.combined


class TestCnn:
    def test_flatten_length(self, rng):
        t = rng.standard_normal((7, 7, 512))
        assert cnn_flatten(t).n == 25088

    def test_flatten_roundtrip(self, rng):
        t = rng.standard_normal((3, 4, 5))
        flat = cnn_flatten(t).values
        assert np.array_equal(flat.reshape(3, 4, 5), t)

    def test_flatten_1x1(self, rng):
        t = rng.standard_normal((1, 1, 6))
        assert np.allclose(cnn_flatten(t).values, t[0, 0])

    def test_maxpool_constant_channel(self, rng):
        t = rng.standard_normal((4, 5, 6))
        t[..., 3] = 5.0
        assert cnn_maxpool(t).values[3] == 5.0

    def test_maxpool_matches_loop_oracle(self, rng):
        t = rng.standard_normal((6, 3, 8))
        expected = [max(t[i, j, c] for i in range(6) for j in range(3)) for c in range(8)]
        assert np.allclose(cnn_maxpool(t).values, expected)

    def test_as_features_shape_and_order(self, rng):
        t = rng.standard_normal((7, 7, 512))
        fs = cnn_as_features(t, image_id="x")
        assert fs.features.shape == (49, 512)
        t2 = rng.standard_normal((2, 1, 3))
        fs2 = cnn_as_features(t2)
        assert np.allclose(fs2.features[0], t2[0, 0])
        assert np.allclose(fs2.features[1], t2[1, 0])

    def test_rows_concatenate_to_flatten(self, rng):
        t = rng.standard_normal((4, 6, 5))
        assert np.array_equal(cnn_as_features(t).features.ravel(), cnn_flatten(t).values)


class TestStackIo:
    def test_stack_round_trip(self, tmp_path, rng):
        d = make_dictionary(rng.standard_normal((4, 3)))
        fps = [h0(FeatureSet(f"i{k}", rng.standard_normal((9, 3)), "patch"), d) for k in range(6)]
        stack = FingerprintStack.from_fingerprints(fps)
        path = tmp_path / "stack.mfp1"
        save_stack(stack, path)
        loaded = load_stack(path)
        assert loaded.ids == stack.ids
        assert loaded.recipe == stack.recipe
        assert np.allclose(loaded.matrix, stack.matrix, atol=1e-7)

    def test_mixed_recipes_rejected(self, rng):
        d = make_dictionary(rng.standard_normal((4, 3)))
        fs = FeatureSet("a", rng.standard_normal((9, 3)), "patch")
        with pytest.raises(DataError):
            FingerprintStack.from_fingerprints([h0(fs, d), h1(fs, d)])

    def test_build_fingerprint_dispatch(self, rng):
        fs = FeatureSet("a", rng.standard_normal((15, 3)), "patch")
        dicts = [make_dictionary(rng.standard_normal((k, 3))) for k in (4, 6)]
        fp = build_fingerprint(fs, dicts, order=2, diagonal=True)
        assert fp.n == (4 + 6) * 3
