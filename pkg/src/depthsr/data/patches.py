"""Training patch extraction and rotation augmentation."""

import numpy as np

from ..types import DepthMap, RgbImage, StructureMap, TrainingSample
from .resize import bicubic_downsample
from .structure import compute_structure_gt


def extract_patches(pairs, patch_size, count, scale, seed):
    """Randomly crop `count` HR patches and derive their LR/structure rasters.

    Pairs and positions are drawn uniformly from a generator seeded with
    `seed`, so a fixed seed reproduces the exact same crops on any platform.
    """
    if patch_size % scale:
        raise ValueError(f"patch_size {patch_size} is not divisible by scale {scale}")
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    if count > 0 and not pairs:
        raise ValueError("no pairs to extract patches from")
    for i, (rgb, depth) in enumerate(pairs):
        h, w = depth.shape
        if h < patch_size or w < patch_size:
            raise ValueError(
                f"pair {i} is {h}x{w}, smaller than patch_size {patch_size}"
            )
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    samples = []
    for _ in range(count):
        i = int(rng.integers(len(pairs)))
        rgb, depth = pairs[i]
        h, w = depth.shape
        y = int(rng.integers(h - patch_size + 1))
        x = int(rng.integers(w - patch_size + 1))
        d_hr = DepthMap(
            depth.data[y : y + patch_size, x : x + patch_size].copy(),
            unit_scale=depth.unit_scale,
        )
        rgb_patch = RgbImage(rgb.data[y : y + patch_size, x : x + patch_size].copy())
        samples.append(
            TrainingSample(
                d_lr=bicubic_downsample(d_hr, scale),
                d_hr=d_hr,
                rgb=rgb_patch,
                s_gt=compute_structure_gt(d_hr),
                scale=scale,
            )
        )
    return samples


def augment_rotate180(sample):
    """Rotate every raster in a sample by 180 degrees."""
    rot = lambda a: np.rot90(a, 2).copy()
    return TrainingSample(
        d_lr=DepthMap(rot(sample.d_lr.data), unit_scale=sample.d_lr.unit_scale),
        d_hr=DepthMap(rot(sample.d_hr.data), unit_scale=sample.d_hr.unit_scale),
        rgb=RgbImage(rot(sample.rgb.data)),
        s_gt=StructureMap(rot(sample.s_gt.data)),
        scale=sample.scale,
    )


def augment_with_rotations(samples):
    """Double a sample list by appending the 180-degree rotation of each."""
    return list(samples) + [augment_rotate180(s) for s in samples]
