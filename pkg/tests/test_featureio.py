import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from microfp.errors import DataError
from microfp.featureio import (
    FeatureTensor,
    build_population,
    read_array,
    read_features,
    reduce_population,
    write_array,
    write_features,
)
from microfp.keypoints import FeatureSet


class TestFormat:
    def test_header_byte_count(self, tmp_path):
        # header+payload bytes counted from the format definition:
        # magic(4) + kind_len(1) + kind + rank(1) + 4*rank + 4*values
        path = tmp_path / "z.mfp1"
        write_array(path, np.zeros((2, 3), dtype=np.float32), "sift")
        expected = 4 + 1 + len(b"sift") + 1 + 4 * 2 + 4 * (2 * 3)
        assert expected == 42
        assert path.stat().st_size == expected

    def test_rank3_shape_and_payload(self, tmp_path, rng):
        path = tmp_path / "t.mfp1"
        tensor = rng.standard_normal((7, 7, 512)).astype(np.float32)
        write_array(path, tensor, "cnn:vgg19")
        values, kind = read_array(path)
        assert kind == "cnn:vgg19"
        assert values.shape == (7, 7, 512)
        assert values.size == 7 * 7 * 512 == 25088
        header = 4 + 1 + len(b"cnn:vgg19") + 1 + 4 * 3
        assert path.stat().st_size - header == 25088 * 4 == 100352
        assert np.array_equal(values, tensor)

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(DataError, match="empty"):
            write_array(tmp_path / "e.mfp1", np.empty((0, 4), dtype=np.float32), "sift")

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.mfp1"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(DataError, match="not an MFP1"):
            read_array(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.mfp1"
        write_array(path, np.ones((4, 4), dtype=np.float32), "sift")
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(DataError, match="payload"):
            read_array(path)

    def test_shape_payload_mismatch(self, tmp_path):
        path = tmp_path / "t.mfp1"
        write_array(path, np.ones((4, 4), dtype=np.float32), "sift")
        raw = bytearray(path.read_bytes())
        raw[10] = 9  # first shape u32 (after magic+len+"sift"+rank): 4 -> 9
        path.write_bytes(bytes(raw))
        with pytest.raises(DataError, match="payload"):
            read_array(path)

    @given(
        values=hnp.arrays(
            dtype=np.float32,
            shape=hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=8),
            elements=st.floats(width=32, allow_nan=False, allow_infinity=False),
        )
    )
    def test_round_trip_bit_exact(self, values, tmp_path_factory):
        path = tmp_path_factory.mktemp("rt") / "x.mfp1"
        write_array(path, values, "patch")
        out, kind = read_array(path)
        assert kind == "patch"
        assert out.tobytes() == values.astype("<f4").tobytes()

    def test_signed_zero_preserved(self, tmp_path):
        path = tmp_path / "z.mfp1"
        values = np.array([[0.0, -0.0]], dtype=np.float32)
        write_array(path, values, "patch")
        out, _ = read_array(path)
        assert np.signbit(out[0, 1]) and not np.signbit(out[0, 0])

    def test_read_features_dispatch(self, tmp_path, rng):
        mat = rng.random((3, 5)).astype(np.float32)
        write_features(FeatureSet("img7", mat, "patch"), tmp_path / "img7.mfp1")
        loaded = read_features(tmp_path / "img7.mfp1")
        assert isinstance(loaded, FeatureSet)
        assert loaded.image_id == "img7"
        tensor = rng.random((2, 3, 4)).astype(np.float32)
        write_features(tensor, tmp_path / "t.mfp1", kind="cnn:alexnet")
        loaded = read_features(tmp_path / "t.mfp1")
        assert isinstance(loaded, FeatureTensor)
        assert loaded.kind == "cnn:alexnet"


class TestPopulation:
    def test_row_counts_add_up(self, rng):
        a = FeatureSet("a", rng.random((3, 8)), "patch")
        b = FeatureSet("b", rng.random((5, 8)), "patch")
        pop = build_population([a, b])
        assert len(pop) == 8

    def test_mixed_dimensions_rejected(self, rng):
        a = FeatureSet("a", rng.random((3, 64)), "surf")
        b = FeatureSet("b", rng.random((3, 128)), "sift")
        with pytest.raises(DataError):
            build_population([a, b])

    def test_provenance_round_trip(self, rng):
        sets = [FeatureSet(f"img{i}", rng.random((1 + i % 4, 6)), "patch") for i in range(40)]
        pop = build_population(sets)
        by_id = {fs.image_id: fs for fs in sets}
        for row in rng.choice(len(pop), size=25, replace=False):
            image_id, j = pop.provenance[row]
            assert np.allclose(pop.features[row], by_id[image_id].features[j])

    def test_manifest_order_preserved(self, rng):
        sets = [FeatureSet(f"i{k}", np.full((2, 3), k, dtype=float), "patch") for k in range(4)]
        pop = build_population(sets)
        assert np.array_equal(pop.features[::2, 0], np.arange(4.0))


class TestReducePopulation:
    def test_large_set_reduced_to_d_by_d(self, rng):
        fs = FeatureSet("big", rng.standard_normal((1000, 64)), "surf")
        out = reduce_population(fs)
        assert out.features.shape == (64, 64)
        assert np.all(np.isfinite(out.features))

    def test_small_set_unchanged(self, rng):
        fs = FeatureSet("small", rng.standard_normal((10, 64)), "surf")
        out = reduce_population(fs)
        assert out is fs

    def test_rank_one_falls_back(self):
        row = np.linspace(0.0, 1.0, 16)
        fs = FeatureSet("flat", np.tile(row, (50, 1)), "patch")
        out = reduce_population(fs)
        assert out.note.startswith("degenerate")
        assert out.features.shape == (16, 16)
        assert np.allclose(out.features, out.features[0])

    def test_column_count_preserved(self, rng):
        for d in (5, 12):
            fs = FeatureSet("x", rng.standard_normal((40, d)), "patch")
            out = reduce_population(fs)
            assert out.features.shape == (d, d)
