"""Procedural two-texture dataset: lamellar stripes versus equiaxed blobs.

The two classes mimic the look of lamellar and equiaxed micrographs closely
enough to exercise the whole pipeline while staying cheap to generate.
Orientation, spacing, blob size, contrast and noise are randomised per image.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
import scipy.ndimage as ndi
from PIL import Image

from .dataset import Manifest

CLASS_NAMES = ("equiaxed", "lamellar")


def _speckle(rng: np.random.Generator, size: int) -> np.ndarray:
    """Fine etching-like texture; keeps keypoint detectors fed on smooth regions."""
    field = ndi.gaussian_filter(rng.standard_normal((size, size)), sigma=1.2)
    field /= max(field.std(), 1e-9)
    return rng.uniform(0.04, 0.07) * field


def lamellar_texture(rng: np.random.Generator, size: int, noise: float, spread: float = 0.0) -> np.ndarray:
    """Striped colonies with per-colony orientation, spacing and phase.

    ``spread`` in [0, 1] widens the per-image parameter ranges, increasing
    within-class variability without changing the class structure.
    """
    n_colonies = int(rng.integers(3, 7))
    seeds = rng.uniform(0.0, size, size=(n_colonies, 2))
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    d2 = (yy[..., None] - seeds[:, 0]) ** 2 + (xx[..., None] - seeds[:, 1]) ** 2
    colony = np.argmin(d2, axis=2)
    # gentle warp so lamellae bend inside each colony
    warp = ndi.gaussian_filter(rng.standard_normal((size, size)), sigma=size / 8.0)
    warp *= 2.0 / max(np.abs(warp).max(), 1e-9)
    amp = rng.uniform(0.35 - 0.2 * spread, 0.35 + 0.05 * spread)
    img = np.empty((size, size))
    for c in range(n_colonies):
        theta = rng.uniform(0.0, math.pi)
        spacing = rng.uniform(6.0 - 2.0 * spread, 12.0 + 4.0 * spread)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        coord = (math.cos(theta) * xx + math.sin(theta) * yy) / spacing
        wave = np.sin(2.0 * math.pi * coord + phase + warp)
        mask = colony == c
        img[mask] = 0.55 + amp * np.tanh(3.0 * wave[mask])
    # sparse dark second-phase particles
    n_particles = int(rng.integers(10, 25))
    py = rng.uniform(4.0, size - 4.0, n_particles)
    px = rng.uniform(4.0, size - 4.0, n_particles)
    radius = rng.uniform(1.5, 3.0, n_particles)
    for cy, cx, r in zip(py, px, radius):
        img -= 0.45 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * r**2))
    img += _speckle(rng, size)
    img += rng.normal(0.0, noise * (1.0 + 2.0 * spread * rng.uniform()), size=img.shape)
    return np.clip(img, 0.0, 1.0)


def equiaxed_texture(rng: np.random.Generator, size: int, noise: float, spread: float = 0.0) -> np.ndarray:
    sigma = rng.uniform(2.5 - 1.0 * spread, 4.5 + 1.5 * spread)
    blobs = ndi.gaussian_filter(rng.standard_normal((size, size)), sigma=sigma)
    lo = rng.uniform(0.3 - 0.1 * spread, 0.3 + 0.1 * spread)
    hi = rng.uniform(0.8 - 0.15 * spread, 0.8)
    grains = np.where(blobs > np.median(blobs), hi, lo)
    img = ndi.gaussian_filter(grains, sigma=1.0)
    img += _speckle(rng, size)
    img += rng.normal(0.0, noise * (1.0 + 2.0 * spread * rng.uniform()), size=img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_dataset(
    out_dir: str | Path,
    n_images: int = 40,
    size: int = 128,
    seed: int = 0,
    noise: float = 0.02,
    spread: float = 0.0,
) -> Path:
    """Write n_images PNGs (half per class) plus manifest.csv; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    half = n_images // 2
    rows: list[tuple[str, str]] = []
    for i in range(n_images):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        if i < half:
            pixels = equiaxed_texture(rng, size, noise, spread)
            class_name = CLASS_NAMES[0]
        else:
            pixels = lamellar_texture(rng, size, noise, spread)
            class_name = CLASS_NAMES[1]
        name = f"{class_name}_{i:04d}.png"
        Image.fromarray((pixels * 255.0).round().astype(np.uint8), mode="L").save(out_dir / name)
        rows.append((name, class_name))
    manifest_path = out_dir / "manifest.csv"
    with manifest_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label"])
        writer.writerows(rows)
    return manifest_path


def load_synth_manifest(manifest_path: str | Path) -> Manifest:
    from .dataset import load_manifest

    return load_manifest(manifest_path)
