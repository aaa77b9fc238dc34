"""Micrograph loading, CSV manifests and stratified cross-validation folds."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError

# ITU-R BT.601 luma weights used for RGB -> grayscale conversion.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

MIN_SIDE = 16


@dataclass
class Micrograph:
    """Single-channel image with intensities in [0, 1] and an optional class label."""

    id: str
    pixels: np.ndarray
    label: int | None = None

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2:
            raise DataError(f"micrograph {self.id!r}: expected 2-D pixels, got shape {self.pixels.shape}")
        m1, m2 = self.pixels.shape
        if m1 < MIN_SIDE or m2 < MIN_SIDE:
            raise DataError(f"micrograph {self.id!r}: {m1}x{m2} is smaller than {MIN_SIDE}x{MIN_SIDE}")
        if not np.all(np.isfinite(self.pixels)):
            raise DataError(f"micrograph {self.id!r}: non-finite intensities")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise DataError(f"micrograph {self.id!r}: intensities outside [0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape  # type: ignore[return-value]


@dataclass
class Manifest:
    """Dataset index: (image path, class name) rows plus the ordered class vocabulary.

    Class indices are the lexicographic ranks of the class names, so the
    label mapping is reproducible from the manifest alone.
    """

    entries: list[tuple[str, str]]
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.class_names:
            self.class_names = sorted({name for _, name in self.entries})
        missing = {name for _, name in self.entries} - set(self.class_names)
        if missing:
            raise DataError(f"manifest entries use unknown class names: {sorted(missing)}")
        paths = [path for path, _ in self.entries]
        if len(set(paths)) != len(paths):
            raise DataError("manifest contains duplicate image paths")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def label_index(self, class_name: str) -> int:
        return self.class_names.index(class_name)

    def labels(self) -> np.ndarray:
        index = {name: i for i, name in enumerate(self.class_names)}
        return np.array([index[name] for _, name in self.entries], dtype=np.int64)

    def paths(self) -> list[str]:
        return [path for path, _ in self.entries]


@dataclass
class FoldPlan:
    """Assignment of every image to one of ``n_folds`` disjoint folds."""

    n_folds: int
    assignments: np.ndarray

    def __post_init__(self) -> None:
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        if self.n_folds < 2:
            raise DataError(f"need at least 2 folds, got {self.n_folds}")
        if self.assignments.min() < 0 or self.assignments.max() >= self.n_folds:
            raise DataError("fold assignment outside [0, n_folds)")

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def load_manifest(path: str | Path) -> Manifest:
    """Read a ``path,label`` CSV manifest.

    Relative image paths are kept as written; resolve them against the
    manifest directory when loading images.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    entries: list[tuple[str, str]] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"empty manifest: {path}")
        if [h.strip() for h in header] != ["path", "label"]:
            raise DataError(f"manifest header must be 'path,label', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2 or not row[0].strip() or not row[1].strip():
                raise DataError(f"malformed manifest row {lineno}: {row!r}")
            entries.append((row[0].strip(), row[1].strip()))
    if not entries:
        raise DataError(f"manifest has no entries: {path}")
    return Manifest(entries=entries)


def _to_unit_floats(image: Image.Image) -> np.ndarray:
    if image.mode in ("L", "P"):
        return np.asarray(image.convert("L"), dtype=np.float64) / 255.0
    if image.mode in ("I", "I;16", "I;16B", "I;16L"):
        return np.asarray(image, dtype=np.float64) / 65535.0
    if image.mode == "F":
        return np.asarray(image, dtype=np.float64)
    rgb = np.asarray(image.convert("RGB"), dtype=np.float64) / 255.0
    r, g, b = LUMA_WEIGHTS
    return rgb[..., 0] * r + rgb[..., 1] * g + rgb[..., 2] * b


def load_image(path: str | Path, image_id: str | None = None, label: int | None = None) -> Micrograph:
    """Load a PNG/PGM file as a grayscale micrograph with intensities in [0, 1]."""
    path = Path(path)
    if image_id is None:
        image_id = path.stem
    try:
        with Image.open(path) as image:
            image.load()
            pixels = _to_unit_floats(image)
    except (FileNotFoundError, UnidentifiedImageError, OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    if pixels.size == 0:
        raise DataError(f"zero-area image: {path}")
    return Micrograph(id=image_id, pixels=pixels, label=label)


def load_micrographs(manifest: Manifest, root: str | Path | None = None) -> list[Micrograph]:
    root = Path(root) if root is not None else None
    labels = manifest.labels()
    out = []
    for (rel, _), label in zip(manifest.entries, labels):
        path = Path(rel)
        if root is not None and not path.is_absolute():
            path = root / path
        out.append(load_image(path, label=int(label)))
    return out


def stratified_fold_assignments(labels: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Per-image fold indices with per-class fold counts differing by at most one."""
    labels = np.asarray(labels, dtype=np.int64)
    if n_folds < 2:
        raise DataError(f"need at least 2 folds, got {n_folds}")
    assignments = np.full(labels.shape[0], -1, dtype=np.int64)
    rng = np.random.default_rng(seed)
    for rank, cls in enumerate(np.unique(labels)):
        members = np.flatnonzero(labels == cls)
        if members.size < n_folds:
            raise DataError(f"class {cls} has {members.size} images, fewer than {n_folds} folds")
        shuffled = rng.permutation(members)
        # rotate the starting fold per class so fold sizes stay even overall
        assignments[shuffled] = (np.arange(shuffled.size) + rank) % n_folds
    return assignments


def stratified_folds(manifest: Manifest, n_folds: int, seed: int) -> FoldPlan:
    return FoldPlan(n_folds=n_folds, assignments=stratified_fold_assignments(manifest.labels(), n_folds, seed))
