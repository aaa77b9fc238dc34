"""Final-convolution-block activations of AlexNet/VGG19 as MFP1 tensors.

Grayscale micrographs are replicated to three channels and normalised with
the ImageNet per-channel statistics before inference; the exporter taps the
output of the network's feature-extraction stack (after its last conv block
and spatial pool, before the classifier), so a 224x224 input yields
7x7x512 for VGG19 and 6x6x256 for AlexNet. Arbitrary input sizes work under
the "full" policy because no fully connected layer is involved.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .mfp1 import write_array

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

CHANNELS = {"alexnet": 256, "vgg19": 512}


class WeightsUnavailableError(RuntimeError):
    """Pretrained weights could not be fetched or loaded."""


@dataclass(frozen=True)
class ExportSpec:
    model: str  # "alexnet" | "vgg19"
    resize_policy: str = "full"  # "full" keeps native size, "resize224" deforms to 224x224
    inputs: tuple = field(default_factory=tuple)  # image paths
    out_dir: str | Path = "."
    weights: str = "pretrained"  # "pretrained" | "random" (seeded init, for offline use)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.model not in CHANNELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.resize_policy not in ("full", "resize224"):
            raise ValueError(f"unknown resize policy {self.resize_policy!r}")
        if self.weights not in ("pretrained", "random"):
            raise ValueError(f"unknown weights mode {self.weights!r}")

    @property
    def kind_tag(self) -> str:
        return f"cnn:{self.model}:{self.resize_policy}:{self.weights}:features"


def load_feature_extractor(spec: ExportSpec) -> torch.nn.Module:
    from torchvision import models

    if spec.weights == "pretrained":
        try:
            if spec.model == "alexnet":
                net = models.alexnet(weights=models.AlexNet_Weights.IMAGENET1K_V1)
            else:
                net = models.vgg19(weights=models.VGG19_Weights.IMAGENET1K_V1)
        except Exception as exc:
            raise WeightsUnavailableError(f"model download failure for {spec.model}: {exc}") from exc
    else:
        torch.manual_seed(spec.seed)
        net = models.alexnet(weights=None) if spec.model == "alexnet" else models.vgg19(weights=None)
    features = net.features.eval()
    for param in features.parameters():
        param.requires_grad_(False)
    return features


def weights_checksum(features: torch.nn.Module) -> str:
    digest = hashlib.sha256()
    for name, tensor in sorted(features.state_dict().items()):
        digest.update(name.encode())
        digest.update(tensor.numpy().tobytes())
    return digest.hexdigest()


def load_grayscale(path: str | Path) -> np.ndarray:
    try:
        with Image.open(path) as image:
            image.load()
            return np.asarray(image.convert("L"), dtype=np.float32) / 255.0
    except Exception as exc:
        raise ValueError(f"cannot read image {path}: {exc}") from exc


def preprocess(pixels: np.ndarray, resize_policy: str) -> torch.Tensor:
    tensor = torch.from_numpy(np.ascontiguousarray(pixels, dtype=np.float32))
    tensor = tensor.unsqueeze(0).unsqueeze(0)  # 1 x 1 x H x W
    if resize_policy == "resize224":
        tensor = torch.nn.functional.interpolate(tensor, size=(224, 224), mode="bilinear", align_corners=False)
    rgb = tensor.repeat(1, 3, 1, 1)
    mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
    return (rgb - mean) / std


def activations(features: torch.nn.Module, batch: torch.Tensor) -> np.ndarray:
    torch.set_num_threads(1)  # keeps repeated runs byte-identical
    with torch.no_grad():
        out = features(batch)
    if out.ndim != 4 or out.shape[0] != 1:
        raise RuntimeError(f"unexpected activation shape {tuple(out.shape)}")
    # C x H x W -> d1 x d2 x d
    return out[0].permute(1, 2, 0).contiguous().numpy().astype(np.float32)


def read_manifest(path: str | Path) -> list[Path]:
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"manifest not found: {path}")
    root = path.parent
    inputs = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["path", "label"]:
            raise ValueError(f"manifest header must be 'path,label': {path}")
        for row in reader:
            if not row or not row[0].strip():
                continue
            rel = Path(row[0].strip())
            inputs.append(rel if rel.is_absolute() else root / rel)
    if not inputs:
        raise ValueError(f"manifest has no entries: {path}")
    return inputs


def export(spec: ExportSpec) -> list[Path]:
    """Write one MFP1 tensor per input image; returns the written paths."""
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    features = load_feature_extractor(spec)
    lock = {
        "model": spec.model,
        "weights": spec.weights,
        "seed": spec.seed if spec.weights == "random" else None,
        "sha256": weights_checksum(features),
    }
    (out_dir / "weights.lock.json").write_text(json.dumps(lock, sort_keys=True, indent=2))

    written = []
    for image_path in spec.inputs:
        image_path = Path(image_path)
        pixels = load_grayscale(image_path)
        tensor = activations(features, preprocess(pixels, spec.resize_policy))
        expected_d = CHANNELS[spec.model]
        if tensor.shape[2] != expected_d:
            raise RuntimeError(f"{spec.model} produced d={tensor.shape[2]}, expected {expected_d}")
        target = out_dir / f"{image_path.stem}.mfp1"
        write_array(target, tensor, spec.kind_tag)
        written.append(target)
    return written
