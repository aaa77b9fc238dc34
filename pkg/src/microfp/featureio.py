"""MFP1 binary feature files, population assembly and transpose-PCA reduction.

File layout, little-endian throughout:

    magic "MFP1" (4 bytes)
    kind length (u8) | kind (utf-8)
    rank (u8, 2 or 3)
    shape (u32 per axis)
    payload (f32, row-major)

Rank-2 files hold J x d feature matrices (one file per image, named after the
image id); rank-3 files hold d1 x d2 x d activation tensors from external
exporters. The format is the only contract with such exporters.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .keypoints import FeatureSet
from .pca import fit_pca, transform

MAGIC = b"MFP1"


@dataclass
class FeatureTensor:
    """Rank-3 activation tensor (d1, d2, d) read from an MFP1 file."""

    image_id: str
    values: np.ndarray
    kind: str

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape  # type: ignore[return-value]


@dataclass
class Population:
    """All base features of a dataset stacked into one P x d matrix."""

    features: np.ndarray
    provenance: list[tuple[str, int]]  # (image_id, row index within that image)
    descriptor_kind: str = ""

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise DataError(f"population must be 2-D, got shape {self.features.shape}")
        if len(self.provenance) != self.features.shape[0]:
            raise DataError("provenance length does not match population size")
        if self.features.size and not np.all(np.isfinite(self.features)):
            raise DataError("population contains NaN/Inf")

    def __len__(self) -> int:
        return self.features.shape[0]


def write_array(path: str | Path, values: np.ndarray, kind: str) -> None:
    values = np.asarray(values)
    if values.ndim not in (2, 3):
        raise DataError(f"MFP1 stores rank-2 or rank-3 arrays, got rank {values.ndim}")
    if values.size == 0 or min(values.shape) < 1:
        raise DataError("refusing to write an empty array")
    if not np.all(np.isfinite(values)):
        raise DataError("refusing to write NaN/Inf values")
    kind_bytes = kind.encode("utf-8")
    if not 0 < len(kind_bytes) < 256:
        raise DataError(f"kind tag must be 1..255 utf-8 bytes, got {len(kind_bytes)}")
    header = MAGIC + struct.pack("<B", len(kind_bytes)) + kind_bytes + struct.pack("<B", values.ndim)
    header += struct.pack(f"<{values.ndim}I", *values.shape)
    payload = np.ascontiguousarray(values, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_array(path: str | Path) -> tuple[np.ndarray, str]:
    raw = Path(path).read_bytes()
    if len(raw) < 6 or raw[:4] != MAGIC:
        raise DataError(f"not an MFP1 file: {path}")
    pos = 4
    kind_len = raw[pos]
    pos += 1
    if len(raw) < pos + kind_len + 1:
        raise DataError(f"truncated MFP1 header: {path}")
    kind = raw[pos : pos + kind_len].decode("utf-8")
    pos += kind_len
    rank = raw[pos]
    pos += 1
    if rank not in (2, 3):
        raise DataError(f"unsupported MFP1 rank {rank}: {path}")
    if len(raw) < pos + 4 * rank:
        raise DataError(f"truncated MFP1 shape: {path}")
    shape = struct.unpack(f"<{rank}I", raw[pos : pos + 4 * rank])
    pos += 4 * rank
    if min(shape) < 1:
        raise DataError(f"MFP1 shape entries must be >= 1, got {shape}: {path}")
    expected = int(np.prod(shape)) * 4
    payload = raw[pos:]
    if len(payload) != expected:
        raise DataError(f"MFP1 payload is {len(payload)} bytes, shape {shape} needs {expected}: {path}")
    values = np.frombuffer(payload, dtype="<f4").reshape(shape)
    return values, kind


def write_features(fs: FeatureSet | np.ndarray, path: str | Path, kind: str | None = None) -> None:
    """Write a FeatureSet or a raw rank-2/3 array; raw arrays need an explicit kind."""
    if isinstance(fs, FeatureSet):
        write_array(path, fs.features, kind or fs.descriptor_kind)
        return
    if kind is None:
        raise DataError("raw arrays need an explicit kind tag")
    write_array(path, np.asarray(fs), kind)


def read_features(path: str | Path) -> FeatureSet | FeatureTensor:
    """Read an MFP1 file; the image id is taken from the file name."""
    values, kind = read_array(path)
    image_id = Path(path).stem
    if values.ndim == 2:
        return FeatureSet(image_id=image_id, features=values, descriptor_kind=kind)
    return FeatureTensor(image_id=image_id, values=values, kind=kind)


def build_population(sets: list[FeatureSet]) -> Population:
    """Concatenate feature sets in the given (manifest) order, keeping provenance."""
    if not sets:
        raise DataError("cannot build a population from zero feature sets")
    kinds = {fs.descriptor_kind for fs in sets}
    if len(kinds) > 1:
        raise DataError(f"mixed descriptor kinds in population: {sorted(kinds)}")
    dims = {fs.d for fs in sets if len(fs) > 0}
    if len(dims) > 1:
        raise DataError(f"mixed descriptor dimensions in population: {sorted(dims)}")
    if not dims:
        raise DataError("all feature sets are empty")
    blocks = [fs.features for fs in sets if len(fs) > 0]
    provenance = [(fs.image_id, j) for fs in sets for j in range(len(fs))]
    return Population(
        features=np.vstack(blocks).astype(np.float64),
        provenance=provenance,
        descriptor_kind=kinds.pop(),
    )


def reduce_population(fs: FeatureSet) -> FeatureSet:
    """Shrink a J x d feature set to at most d rows by PCA on the transposed matrix.

    The transposed d x J matrix is column-centred, projected onto its top d
    principal components and transposed back, turning J features into d
    features of length d. Sets with J <= d are returned unchanged; degenerate
    inputs (all rows identical) fall back to the first min(J, d) rows.
    """
    J, d = fs.features.shape
    if J < 1:
        raise DataError(f"cannot reduce an empty feature set: {fs.image_id!r}")
    if J <= d:
        return fs
    feats = fs.features.astype(np.float64)
    if np.allclose(feats, feats[0], rtol=0.0, atol=1e-12):
        return FeatureSet(
            image_id=fs.image_id,
            features=feats[: min(J, d)],
            descriptor_kind=fs.descriptor_kind,
            note="degenerate: returned leading rows",
        )
    model = fit_pca(feats.T, r=d, reduce_rank_deficient=False)
    reduced = transform(model, feats.T).T
    return FeatureSet(
        image_id=fs.image_id,
        features=reduced,
        descriptor_kind=fs.descriptor_kind,
        note="transpose-pca",
    )
