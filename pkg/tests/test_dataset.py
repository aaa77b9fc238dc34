import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from microfp.dataset import (
    Micrograph,
    load_image,
    load_manifest,
    stratified_fold_assignments,
    stratified_folds,
)
from microfp.errors import DataError

LUMA = (0.299, 0.587, 0.114)


def write_manifest(path, rows):
    path.write_text("path,label\n" + "\n".join(f"{p},{c}" for p, c in rows) + "\n")


class TestManifest:
    def test_lexicographic_class_order(self, tmp_path):
        man = tmp_path / "m.csv"
        write_manifest(man, [("a.png", "spheroidite"), ("b.png", "pearlite")])
        manifest = load_manifest(man)
        assert manifest.class_names == ["pearlite", "spheroidite"]
        labels = manifest.labels()
        assert labels[0] == 1  # a.png -> spheroidite
        assert labels[1] == 0  # b.png -> pearlite

    def test_600_rows_three_classes(self, tmp_path):
        rows = []
        for c, name in enumerate(["carbide", "pearlite", "spheroidite"]):
            rows += [(f"{name}_{i}.png", name) for i in range(200)]
        man = tmp_path / "m.csv"
        write_manifest(man, rows)
        manifest = load_manifest(man)
        assert manifest.n_classes == 3
        assert len(manifest) == 600
        counts = np.bincount(manifest.labels())
        assert counts.tolist() == [200, 200, 200]

    def test_empty_file_rejected(self, tmp_path):
        man = tmp_path / "m.csv"
        man.write_text("")
        with pytest.raises(DataError):
            load_manifest(man)

    def test_header_only_rejected(self, tmp_path):
        man = tmp_path / "m.csv"
        man.write_text("path,label\n")
        with pytest.raises(DataError, match="no entries"):
            load_manifest(man)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_manifest(tmp_path / "nope.csv")

    def test_malformed_row(self, tmp_path):
        man = tmp_path / "m.csv"
        man.write_text("path,label\nonly_one_field\n")
        with pytest.raises(DataError, match="malformed"):
            load_manifest(man)

    def test_duplicate_paths_rejected(self, tmp_path):
        man = tmp_path / "m.csv"
        write_manifest(man, [("a.png", "x"), ("a.png", "y")])
        with pytest.raises(DataError, match="duplicate"):
            load_manifest(man)


class TestLoadImage:
    def test_pgm_all_255(self, tmp_path):
        path = tmp_path / "white.pgm"
        path.write_bytes(b"P5\n16 16\n255\n" + bytes([255] * 256))
        img = load_image(path)
        assert img.pixels.shape == (16, 16)
        assert np.all(img.pixels == 1.0)

    def test_pgm_midgray(self, tmp_path):
        path = tmp_path / "mid.pgm"
        path.write_bytes(b"P5\n16 16\n255\n" + bytes([128] * 256))
        img = load_image(path)
        assert np.allclose(img.pixels, 128 / 255)

    def test_rgb_luminance(self, tmp_path):
        # luminance of pure red computed from the BT.601 weights directly
        arr = np.zeros((16, 16, 3), dtype=np.uint8)
        arr[..., 0] = 255
        path = tmp_path / "red.png"
        Image.fromarray(arr, mode="RGB").save(path)
        img = load_image(path)
        expected = 1.0 * LUMA[0] + 0.0 * LUMA[1] + 0.0 * LUMA[2]
        assert np.allclose(img.pixels, expected, atol=1e-12)
        assert abs(expected - 0.299) < 1e-12

    def test_unreadable(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"this is not an image")
        with pytest.raises(DataError):
            load_image(path)

    def test_micrograph_bounds_checked(self):
        with pytest.raises(DataError, match="smaller"):
            Micrograph(id="tiny", pixels=np.zeros((4, 4)))
        with pytest.raises(DataError, match="outside"):
            Micrograph(id="hot", pixels=np.full((16, 16), 1.5))
        with pytest.raises(DataError, match="finite"):
            Micrograph(id="nan", pixels=np.full((16, 16), np.nan))


class TestStratifiedFolds:
    def test_600_in_10_folds(self, tmp_path):
        labels = np.repeat([0, 1, 2], 200)
        assignments = stratified_fold_assignments(labels, 10, seed=3)
        for fold in range(10):
            counts = np.bincount(labels[assignments == fold], minlength=3)
            assert counts.tolist() == [20, 20, 20]

    def test_ten_images_one_class(self):
        assignments = stratified_fold_assignments(np.zeros(10, dtype=int), 10, seed=0)
        assert sorted(assignments.tolist()) == list(range(10))

    def test_class_smaller_than_folds(self):
        with pytest.raises(DataError, match="fewer than"):
            stratified_fold_assignments(np.zeros(5, dtype=int), 10, seed=0)

    def test_deterministic(self):
        labels = np.repeat([0, 1], 30)
        a = stratified_fold_assignments(labels, 5, seed=9)
        b = stratified_fold_assignments(labels, 5, seed=9)
        assert np.array_equal(a, b)
        c = stratified_fold_assignments(labels, 5, seed=10)
        assert not np.array_equal(a, c)

    @given(
        counts=st.lists(st.integers(min_value=4, max_value=30), min_size=1, max_size=4),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_folds_partition_everything(self, counts, seed):
        labels = np.concatenate([np.full(c, i) for i, c in enumerate(counts)])
        assignments = stratified_fold_assignments(labels, 4, seed=seed)
        # union of folds covers all images, folds disjoint by construction
        assert assignments.min() >= 0 and assignments.max() < 4
        for cls, c in enumerate(counts):
            per_fold = np.bincount(assignments[labels == cls], minlength=4)
            assert per_fold.max() - per_fold.min() <= 1

    def test_fold_plan_from_manifest(self, tmp_path):
        rows = [(f"img{i}.png", "a" if i < 12 else "b") for i in range(24)]
        man = tmp_path / "m.csv"
        write_manifest(man, rows)
        plan = stratified_folds(load_manifest(man), 4, seed=1)
        all_idx = np.concatenate([plan.test_indices(f) for f in range(4)])
        assert sorted(all_idx.tolist()) == list(range(24))
