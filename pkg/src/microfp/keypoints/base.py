"""Shared keypoint/feature containers and the dense patch-grid extractor."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dataset import Micrograph
from ..errors import DataError

DESCRIPTOR_DIMS = {"sift": 128, "surf": 64}

TWO_PI = 2.0 * math.pi


@dataclass
class Keypoint:
    """Subpixel image location with detection scale and dominant orientation."""

    x: float
    y: float
    scale: float
    orientation: float = 0.0

    def __post_init__(self) -> None:
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise DataError(f"keypoint scale must be positive and finite, got {self.scale}")
        self.orientation = float(self.orientation) % TWO_PI


@dataclass
class FeatureSet:
    """J x d matrix of base-feature row vectors extracted from one image."""

    image_id: str
    features: np.ndarray
    descriptor_kind: str
    note: str = ""

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features)
        if self.features.ndim != 2:
            raise DataError(f"features for {self.image_id!r} must be 2-D, got shape {self.features.shape}")
        expected = DESCRIPTOR_DIMS.get(self.descriptor_kind)
        if expected is not None and self.features.shape[0] > 0 and self.features.shape[1] != expected:
            raise DataError(
                f"{self.descriptor_kind} descriptors must have d={expected}, got {self.features.shape[1]}"
            )
        if self.features.size and not np.all(np.isfinite(self.features)):
            raise DataError(f"features for {self.image_id!r} contain NaN/Inf")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PatchGridSpec:
    """Square patch side and stride for dense grid extraction."""

    patch_side: int
    stride: int

    def __post_init__(self) -> None:
        if self.patch_side < 1:
            raise DataError(f"patch side must be >= 1, got {self.patch_side}")
        if self.stride < 1:
            raise DataError(f"stride must be >= 1, got {self.stride}")


def dense_patches(img: Micrograph, spec: PatchGridSpec) -> FeatureSet:
    """Flatten every grid patch into a raw-intensity descriptor, row-major grid order."""
    m1, m2 = img.shape
    m = spec.patch_side
    if m > min(m1, m2):
        raise DataError(f"patch side {m} exceeds image {m1}x{m2}")
    if spec.stride > m1 or spec.stride > m2:
        raise DataError(f"stride {spec.stride} exceeds image {m1}x{m2}")
    rows = range(0, m1 - m + 1, spec.stride)
    cols = range(0, m2 - m + 1, spec.stride)
    feats = np.empty((len(rows) * len(cols), m * m), dtype=np.float64)
    i = 0
    for r in rows:
        for c in cols:
            feats[i] = img.pixels[r : r + m, c : c + m].ravel()
            i += 1
    return FeatureSet(image_id=img.id, features=feats, descriptor_kind="patch")
