"""SIFT: difference-of-Gaussians keypoint detection and 128-d gradient descriptors.

The detector builds a Gaussian scale-space pyramid, locates 3-D extrema of the
DoG stack, refines them with a quadratic fit and rejects low-contrast and
edge-like responses. Each surviving keypoint is assigned one or more dominant
gradient orientations and described by a 4x4 grid of 8-bin orientation
histograms over a scale-adjusted, rotated neighbourhood.
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
class SiftParams:
    n_octaves: int = 4
    scales_per_octave: int = 3
    sigma: float = 1.6
    assumed_blur: float = 0.5
    contrast_threshold: float = 0.04
    edge_ratio: float = 10.0
    border: int = 8
    double_image: bool = True
    # orientation assignment
    orientation_bins: int = 36
    peak_ratio: float = 0.8
    ori_sigma_factor: float = 1.5
    ori_radius_factor: float = 3.0
    # descriptor layout
    descr_width: int = 4
    descr_bins: int = 8
    descr_scale_factor: float = 3.0
    descr_clamp: float = 0.2
    max_interp_steps: int = 5
    use_orientation: bool = True
    use_scale: bool = True

    @property
    def descriptor_length(self) -> int:
        return self.descr_width * self.descr_width * self.descr_bins


def _upscale2(image: np.ndarray) -> np.ndarray:
    return ndi.zoom(image, 2.0, order=1, mode="reflect", grid_mode=True)


def _build_pyramids(pixels: np.ndarray, p: SiftParams):
    image = pixels.astype(np.float64)
    assumed = p.assumed_blur
    if p.double_image:
        image = _upscale2(image)
        assumed *= 2.0
    base_blur = math.sqrt(max(p.sigma**2 - assumed**2, 0.01))
    base = ndi.gaussian_filter(image, base_blur, mode="reflect")

    s = p.scales_per_octave
    k = 2.0 ** (1.0 / s)
    increments = []
    sig_prev = p.sigma
    for i in range(1, s + 3):
        sig_total = p.sigma * k**i
        increments.append(math.sqrt(sig_total**2 - sig_prev**2))
        sig_prev = sig_total

    # stop early once an octave can no longer hold a borderful of pixels
    min_side = 2 * p.border + 2
    gaussians: list[np.ndarray] = []
    dogs: list[np.ndarray] = []
    current = base
    for _ in range(p.n_octaves):
        if min(current.shape) < min_side:
            break
        layers = [current]
        for inc in increments:
            layers.append(ndi.gaussian_filter(layers[-1], inc, mode="reflect"))
        stack = np.stack(layers)
        gaussians.append(stack)
        dogs.append(stack[1:] - stack[:-1])
        current = layers[s][::2, ::2]
    return gaussians, dogs


def _refine_extremum(dog: np.ndarray, layer: int, y: int, x: int, p: SiftParams):
    """Quadratic subpixel fit; returns (layer_f, y_f, x_f, contrast) or None."""
    n_layers, height, width = dog.shape
    for _ in range(p.max_interp_steps):
        d = dog
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
        if np.all(np.abs(offset) < 0.5):
            contrast = d[layer, y, x] + 0.5 * float(grad @ offset)
            if abs(contrast) < p.contrast_threshold / p.scales_per_octave:
                return None
            # edge rejection on the spatial 2x2 Hessian
            trace = hxx + hyy
            det = hxx * hyy - hyx * hyx
            r = p.edge_ratio
            if det <= 0 or trace * trace * r >= (r + 1.0) ** 2 * det:
                return None
            return layer + offset[0], y + offset[1], x + offset[2], contrast
        layer += int(round(offset[0]))
        y += int(round(offset[1]))
        x += int(round(offset[2]))
        if not (1 <= layer <= n_layers - 2 and p.border <= y < height - p.border and p.border <= x < width - p.border):
            return None
    return None


def _find_candidates(dogs: list[np.ndarray], p: SiftParams):
    """3x3x3 extrema of every DoG octave, subpixel-refined. Yields per-octave tuples."""
    prelim = 0.5 * p.contrast_threshold / p.scales_per_octave
    for octave, dog in enumerate(dogs):
        maxf = ndi.maximum_filter(dog, size=3, mode="constant", cval=-np.inf)
        minf = ndi.minimum_filter(dog, size=3, mode="constant", cval=np.inf)
        is_ext = ((dog == maxf) | (dog == minf)) & (np.abs(dog) > prelim)
        is_ext[0] = False
        is_ext[-1] = False
        is_ext[:, : p.border, :] = False
        is_ext[:, -p.border :, :] = False
        is_ext[:, :, : p.border] = False
        is_ext[:, :, -p.border :] = False
        seen: set[tuple[int, int, int]] = set()
        for layer, y, x in zip(*np.nonzero(is_ext)):
            refined = _refine_extremum(dog, int(layer), int(y), int(x), p)
            if refined is None:
                continue
            layer_f, y_f, x_f, _ = refined
            key = (int(round(layer_f * 4)), int(round(y_f * 4)), int(round(x_f * 4)))
            if key in seen:
                continue
            seen.add(key)
            yield octave, layer_f, y_f, x_f


def _gradients_at(image: np.ndarray, ys: np.ndarray, xs: np.ndarray):
    dx = 0.5 * (image[ys, xs + 1] - image[ys, xs - 1])
    dy = 0.5 * (image[ys + 1, xs] - image[ys - 1, xs])
    return dx, dy


def _orientations(image: np.ndarray, y: float, x: float, sigma_oct: float, p: SiftParams) -> list[float]:
    if not p.use_orientation:
        return [0.0]
    height, width = image.shape
    radius = int(round(p.ori_radius_factor * p.ori_sigma_factor * sigma_oct))
    yi, xi = int(round(y)), int(round(x))
    y0, y1 = max(yi - radius, 1), min(yi + radius, height - 2)
    x0, x1 = max(xi - radius, 1), min(xi + radius, width - 2)
    if y0 > y1 or x0 > x1:
        return [0.0]
    yy, xx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    ys, xs = yy.ravel(), xx.ravel()
    dx, dy = _gradients_at(image, ys, xs)
    mag = np.hypot(dx, dy)
    ang = np.arctan2(dy, dx) % TWO_PI
    weight_sigma = p.ori_sigma_factor * sigma_oct
    w = np.exp(-((ys - y) ** 2 + (xs - x) ** 2) / (2.0 * weight_sigma**2))
    nbins = p.orientation_bins
    bins = np.round(ang * (nbins / TWO_PI)).astype(np.int64) % nbins
    hist = np.zeros(nbins)
    np.add.at(hist, bins, mag * w)
    # two passes of a circular 5-tap binomial smoother
    kernel = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    for _ in range(2):
        hist = sum(kernel[j + 2] * np.roll(hist, j) for j in range(-2, 3))
    peak = hist.max()
    if peak <= 0.0:
        return [0.0]
    out = []
    left = np.roll(hist, 1)
    right = np.roll(hist, -1)
    for b in range(nbins):
        if hist[b] > left[b] and hist[b] > right[b] and hist[b] >= p.peak_ratio * peak:
            denom = left[b] - 2.0 * hist[b] + right[b]
            shift = 0.0 if denom == 0 else 0.5 * (left[b] - right[b]) / denom
            out.append(((b + shift) * (TWO_PI / nbins)) % TWO_PI)
    return out or [0.0]


def _descriptor(image: np.ndarray, y: float, x: float, sigma_oct: float, orientation: float, p: SiftParams):
    height, width = image.shape
    n_hist = p.descr_width
    n_bins = p.descr_bins
    hist_width = p.descr_scale_factor * sigma_oct
    radius = int(round(hist_width * math.sqrt(0.5) * (n_hist + 1)))
    yi, xi = int(round(y)), int(round(x))
    y0, y1 = max(yi - radius, 1), min(yi + radius, height - 2)
    x0, x1 = max(xi - radius, 1), min(xi + radius, width - 2)
    if y0 > y1 or x0 > x1:
        return None
    yy, xx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    ys, xs = yy.ravel(), xx.ravel()
    rel_y = ys - y
    rel_x = xs - x
    cos_t = math.cos(orientation)
    sin_t = math.sin(orientation)
    # rotate offsets into the keypoint frame
    rot_x = (rel_x * cos_t + rel_y * sin_t) / hist_width
    rot_y = (-rel_x * sin_t + rel_y * cos_t) / hist_width
    rbin = rot_y + 0.5 * n_hist - 0.5
    cbin = rot_x + 0.5 * n_hist - 0.5
    keep = (rbin > -1.0) & (rbin < n_hist) & (cbin > -1.0) & (cbin < n_hist)
    if not np.any(keep):
        return None
    rbin, cbin = rbin[keep], cbin[keep]
    ys, xs = ys[keep], xs[keep]
    rot_x, rot_y = rot_x[keep], rot_y[keep]
    dx, dy = _gradients_at(image, ys, xs)
    mag = np.hypot(dx, dy)
    ang = (np.arctan2(dy, dx) - orientation) % TWO_PI
    obin = ang * (n_bins / TWO_PI)
    weight = np.exp(-(rot_x**2 + rot_y**2) / (2.0 * (0.5 * n_hist) ** 2)) * mag

    r0 = np.floor(rbin).astype(np.int64)
    c0 = np.floor(cbin).astype(np.int64)
    o0 = np.floor(obin).astype(np.int64)
    dr = rbin - r0
    dc = cbin - c0
    do = obin - o0
    hist = np.zeros((n_hist + 2, n_hist + 2, n_bins))
    for ir, wr in ((0, 1.0 - dr), (1, dr)):
        for ic, wc in ((0, 1.0 - dc), (1, dc)):
            for io, wo in ((0, 1.0 - do), (1, do)):
                np.add.at(
                    hist,
                    (r0 + 1 + ir, c0 + 1 + ic, (o0 + io) % n_bins),
                    weight * wr * wc * wo,
                )
    vec = hist[1:-1, 1:-1, :].ravel()
    norm = np.linalg.norm(vec)
    if norm <= 1e-12:
        return None
    vec = np.minimum(vec / norm, p.descr_clamp)
    norm = np.linalg.norm(vec)
    if norm <= 1e-12:
        return None
    return vec / norm


def detect_sift(img: Micrograph, params: SiftParams = SiftParams()) -> tuple[list[Keypoint], FeatureSet]:
    """Detect DoG keypoints and compute their 128-d descriptors.

    A constant or featureless image yields an empty keypoint list, not an error.
    """
    m1, m2 = img.shape
    footprint = 4 * params.descr_width  # 16x16 base descriptor window
    if min(m1, m2) < 2 * footprint:
        raise DataError(f"image {m1}x{m2} smaller than twice the {footprint}x{footprint} descriptor footprint")

    gaussians, dogs = _build_pyramids(img.pixels, params)
    coord_scale = 0.5 if params.double_image else 1.0
    s = params.scales_per_octave
    k = 2.0 ** (1.0 / s)

    keypoints: list[Keypoint] = []
    descriptors: list[np.ndarray] = []
    for octave, layer_f, y_f, x_f in _find_candidates(dogs, params):
        sigma_oct = params.sigma * k**layer_f if params.use_scale else params.sigma
        layer_idx = min(max(int(round(layer_f)), 0), gaussians[octave].shape[0] - 1)
        gauss = gaussians[octave][layer_idx]
        octave_mult = (2.0**octave) * coord_scale
        for orientation in _orientations(gauss, y_f, x_f, sigma_oct, params):
            vec = _descriptor(gauss, y_f, x_f, sigma_oct, orientation, params)
            if vec is None:
                continue
            keypoints.append(
                Keypoint(
                    x=x_f * octave_mult,
                    y=y_f * octave_mult,
                    scale=sigma_oct * octave_mult,
                    orientation=orientation,
                )
            )
            descriptors.append(vec)

    if descriptors:
        feats = np.vstack(descriptors)
    else:
        feats = np.empty((0, params.descriptor_length), dtype=np.float64)
    return keypoints, FeatureSet(image_id=img.id, features=feats, descriptor_kind="sift")
