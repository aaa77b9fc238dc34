"""SURF: integral-image determinant-of-Hessian detection and 64-d Haar descriptors.

Box filters approximate the Gaussian second derivatives at a fixed set of
filter sizes; responses are interpolated across position and size. The
descriptor splits an oriented 20s x 20s window into a 4x4 grid of subregions,
each summarised by [dx, |dx|, dy, |dy|] sums of Haar wavelet responses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.ndimage as ndi

from ..dataset import Micrograph
from ..errors import DataError
from .base import TWO_PI, FeatureSet, Keypoint


@dataclass(frozen=True)
class SurfParams:
    filter_sizes: tuple[int, ...] = (9, 15, 21, 27)
    response_threshold: float = 0.0004
    # orientation assignment
    ori_radius: float = 6.0
    ori_sigma: float = 2.0
    ori_window: float = math.pi / 3.0
    # descriptor layout
    window_factor: float = 20.0
    subregions: int = 4
    samples_per_subregion: int = 5
    gauss_sigma_factor: float = 3.3
    use_orientation: bool = True
    max_interp_steps: int = 5

    @property
    def descriptor_length(self) -> int:
        return self.subregions * self.subregions * 4


def integral_image(pixels: np.ndarray) -> np.ndarray:
    """Summed-area table; entry (y, x) is the sum over pixels [0..y, 0..x]."""
    return np.cumsum(np.cumsum(np.asarray(pixels, dtype=np.float64), axis=0), axis=1)


def _padded_integral(pixels: np.ndarray) -> np.ndarray:
    ii = integral_image(pixels)
    padded = np.zeros((ii.shape[0] + 1, ii.shape[1] + 1))
    padded[1:, 1:] = ii
    return padded


def _box(padded: np.ndarray, rows, cols, r0: int, c0: int, r1: int, c1: int):
    """Sum over rows [r+r0, r+r1) and cols [c+c0, c+c1) for every centre (r, c)."""
    return (
        padded[rows + r1, cols + c1]
        - padded[rows + r0, cols + c1]
        - padded[rows + r1, cols + c0]
        + padded[rows + r0, cols + c0]
    )


def _hessian_response(padded: np.ndarray, size: int, shape: tuple[int, int]) -> np.ndarray:
    """Scale-normalised determinant of the box-filter Hessian at one filter size."""
    height, width = shape
    lobe = size // 3
    margin = size // 2 + 1
    response = np.zeros(shape)
    if height <= 2 * margin or width <= 2 * margin:
        return response
    rows = np.arange(margin, height - margin)[:, None]
    cols = np.arange(margin, width - margin)[None, :]
    half = lobe // 2
    wide = 2 * lobe - 1

    dyy = _box(padded, rows, cols, -size // 2, -(wide // 2), size // 2 + 1, wide // 2 + 1) - 3.0 * _box(
        padded, rows, cols, -half, -(wide // 2), half + 1, wide // 2 + 1
    )
    dxx = _box(padded, rows, cols, -(wide // 2), -size // 2, wide // 2 + 1, size // 2 + 1) - 3.0 * _box(
        padded, rows, cols, -(wide // 2), -half, wide // 2 + 1, half + 1
    )
    dxy = (
        _box(padded, rows, cols, -lobe, 1, 0, lobe + 1)
        + _box(padded, rows, cols, 1, -lobe, lobe + 1, 0)
        - _box(padded, rows, cols, -lobe, -lobe, 0, 0)
        - _box(padded, rows, cols, 1, 1, lobe + 1, lobe + 1)
    )
    inv_area = 1.0 / (size * size)
    dxx *= inv_area
    dyy *= inv_area
    dxy *= inv_area
    response[margin : height - margin, margin : width - margin] = dxx * dyy - (0.9 * dxy) ** 2
    return response


def _refine(stack: np.ndarray, layer: int, y: int, x: int, p: SurfParams):
    n_layers, height, width = stack.shape
    d = stack
    grad = 0.5 * np.array(
        [
            d[layer + 1, y, x] - d[layer - 1, y, x],
            d[layer, y + 1, x] - d[layer, y - 1, x],
            d[layer, y, x + 1] - d[layer, y, x - 1],
        ]
    )
    centre2 = 2.0 * d[layer, y, x]
    hll = d[layer + 1, y, x] + d[layer - 1, y, x] - centre2
    hyy = d[layer, y + 1, x] + d[layer, y - 1, x] - centre2
    hxx = d[layer, y, x + 1] + d[layer, y, x - 1] - centre2
    hly = 0.25 * (d[layer + 1, y + 1, x] - d[layer + 1, y - 1, x] - d[layer - 1, y + 1, x] + d[layer - 1, y - 1, x])
    hlx = 0.25 * (d[layer + 1, y, x + 1] - d[layer + 1, y, x - 1] - d[layer - 1, y, x + 1] + d[layer - 1, y, x - 1])
    hyx = 0.25 * (d[layer, y + 1, x + 1] - d[layer, y + 1, x - 1] - d[layer, y - 1, x + 1] + d[layer, y - 1, x - 1])
    hessian = np.array([[hll, hly, hlx], [hly, hyy, hyx], [hlx, hyx, hxx]])
    try:
        offset = -np.linalg.solve(hessian, grad)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.abs(offset) > 0.5):
        return None
    return layer + offset[0], y + offset[1], x + offset[2]


def _haar(padded: np.ndarray, ys: np.ndarray, xs: np.ndarray, half: int, shape: tuple[int, int]):
    """Haar wavelet responses (dx, dy) of side 2*half at integer positions, with a validity mask."""
    height, width = shape
    ok = (ys >= half) & (ys + half <= height) & (xs >= half) & (xs + half <= width)
    ys = np.clip(ys, half, max(height - half, half))
    xs = np.clip(xs, half, max(width - half, half))
    dx = _box(padded, ys, xs, -half, 0, half, half) - _box(padded, ys, xs, -half, -half, half, 0)
    dy = _box(padded, ys, xs, 0, -half, half, half) - _box(padded, ys, xs, -half, -half, 0, half)
    return dx * ok, dy * ok, ok


def _orientation(padded: np.ndarray, shape: tuple[int, int], y: float, x: float, scale: float, p: SurfParams) -> float:
    step = max(int(round(scale)), 1)
    radius = int(round(p.ori_radius * scale))
    offs = np.arange(-radius, radius + 1, step)
    vv, uu = np.meshgrid(offs, offs, indexing="ij")
    inside = vv**2 + uu**2 <= radius**2
    vv, uu = vv[inside], uu[inside]
    ys = np.round(y + vv).astype(np.int64)
    xs = np.round(x + uu).astype(np.int64)
    half = max(int(round(2.0 * scale)), 1)
    dx, dy, ok = _haar(padded, ys, xs, half, shape)
    if not np.any(ok):
        return 0.0
    sigma = p.ori_sigma * scale
    w = np.exp(-(vv**2 + uu**2) / (2.0 * sigma**2))
    wdx = dx * w
    wdy = dy * w
    ang = np.arctan2(wdy, wdx) % TWO_PI
    best_norm = -1.0
    best = 0.0
    for start in np.arange(0.0, TWO_PI, 0.15):
        in_window = ((ang - start) % TWO_PI) < p.ori_window
        sx = wdx[in_window].sum()
        sy = wdy[in_window].sum()
        norm = sx * sx + sy * sy
        if norm > best_norm:
            best_norm = norm
            best = math.atan2(sy, sx) % TWO_PI
    return best


def _descriptor(padded: np.ndarray, shape: tuple[int, int], y: float, x: float, scale: float, theta: float, p: SurfParams):
    n_sub = p.subregions
    n_samp = p.samples_per_subregion
    side = n_sub * n_samp  # 20 sample columns across the window
    coords = (np.arange(side) - side / 2.0 + 0.5) * (p.window_factor / side) * scale
    vgrid, ugrid = np.meshgrid(coords, coords, indexing="ij")
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    sample_x = x + ugrid * cos_t - vgrid * sin_t
    sample_y = y + ugrid * sin_t + vgrid * cos_t
    ys = np.round(sample_y).astype(np.int64)
    xs = np.round(sample_x).astype(np.int64)
    half = max(int(round(scale)), 1)
    dx, dy, ok = _haar(padded, ys.ravel(), xs.ravel(), half, shape)
    if not np.any(ok):
        return None
    dx = dx.reshape(side, side)
    dy = dy.reshape(side, side)
    # rotate responses into the keypoint frame
    rdx = cos_t * dx + sin_t * dy
    rdy = -sin_t * dx + cos_t * dy
    sigma = p.gauss_sigma_factor * scale
    w = np.exp(-(ugrid**2 + vgrid**2) / (2.0 * sigma**2))
    rdx *= w
    rdy *= w
    vec = np.empty(p.descriptor_length)
    i = 0
    for sr in range(n_sub):
        for sc in range(n_sub):
            block_x = rdx[sr * n_samp : (sr + 1) * n_samp, sc * n_samp : (sc + 1) * n_samp]
            block_y = rdy[sr * n_samp : (sr + 1) * n_samp, sc * n_samp : (sc + 1) * n_samp]
            vec[i : i + 4] = (block_x.sum(), np.abs(block_x).sum(), block_y.sum(), np.abs(block_y).sum())
            i += 4
    norm = np.linalg.norm(vec)
    if norm <= 1e-12:
        return None
    return vec / norm


def detect_surf(img: Micrograph, params: SurfParams = SurfParams()) -> tuple[list[Keypoint], FeatureSet]:
    """Detect determinant-of-Hessian keypoints and compute 64-d SURF descriptors."""
    m1, m2 = img.shape
    min_side = 2 * max(params.filter_sizes)
    if min(m1, m2) < min_side:
        raise DataError(f"image {m1}x{m2} smaller than {min_side}x{min_side} needed for SURF filters")

    padded = _padded_integral(img.pixels)
    shape = (m1, m2)
    sizes = params.filter_sizes
    stack = np.stack([_hessian_response(padded, size, shape) for size in sizes])

    maxf = ndi.maximum_filter(stack, size=3, mode="constant", cval=-np.inf)
    is_ext = (stack == maxf) & (stack > params.response_threshold)
    is_ext[0] = False
    is_ext[-1] = False

    size_step = sizes[1] - sizes[0]
    keypoints: list[Keypoint] = []
    descriptors: list[np.ndarray] = []
    for layer, yy, xx in zip(*np.nonzero(is_ext)):
        refined = _refine(stack, int(layer), int(yy), int(xx), params)
        if refined is None:
            continue
        layer_f, y_f, x_f = refined
        size_f = sizes[0] + size_step * layer_f
        scale = 1.2 * size_f / 9.0
        theta = _orientation(padded, shape, y_f, x_f, scale, params) if params.use_orientation else 0.0
        vec = _descriptor(padded, shape, y_f, x_f, scale, theta, params)
        if vec is None:
            continue
        keypoints.append(Keypoint(x=float(x_f), y=float(y_f), scale=float(scale), orientation=float(theta)))
        descriptors.append(vec)

    if descriptors:
        feats = np.vstack(descriptors)
    else:
        feats = np.empty((0, params.descriptor_length), dtype=np.float64)
    return keypoints, FeatureSet(image_id=img.id, features=feats, descriptor_kind="surf")
