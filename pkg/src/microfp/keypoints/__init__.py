from .base import DESCRIPTOR_DIMS, FeatureSet, Keypoint, PatchGridSpec, dense_patches
from .sift import SiftParams, detect_sift
from .surf import SurfParams, detect_surf, integral_image

__all__ = [
    "DESCRIPTOR_DIMS",
    "FeatureSet",
    "Keypoint",
    "PatchGridSpec",
    "SiftParams",
    "SurfParams",
    "dense_patches",
    "detect_sift",
    "detect_surf",
    "integral_image",
]
