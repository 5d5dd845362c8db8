"""Procedural RGB-D toy scenes for desk-scale experiments.

Each scene is a sloped background plane with 3-8 axis-aligned rectangles and
circles at distinct near-depth plateaus. The first object is a large blob;
later ones are mostly thin bars and small circles only a few pixels wide, so
their depth structure is badly blurred by x4 downsampling while staying crisp
in the full-resolution color image. RGB is a deterministic colorization of
depth (a smooth 3-channel curve) plus mild per-object texture noise, so most
depth edges have a matching RGB edge. Two deliberate mismatches mimic real
RGB-D structure inconsistency: a fraction of the large objects are
camouflaged (painted with the background's colors, leaving a depth edge with
no RGB edge) and a few texture patches tint RGB over flat depth (an RGB edge
with no depth edge). Camouflage sticks to large objects on purpose: their
coarse shape survives downsampling, so a depth-only model can still recover
them, whereas the thin structure is exactly where color guidance has to be
reliable.
"""

import numpy as np

from ..types import DepthMap, RgbImage

THIN_OBJECT_RATE = 0.85
CAMOUFLAGE_RATE = 0.7
TEXTURE_NOISE_RANGE = (0.004, 0.012)
BACKGROUND_NOISE = 0.008
TINT_BLEND = 0.15


def _palette(d):
    """Map depth values to a smooth, jointly injective RGB curve."""
    r = 0.5 + 0.45 * np.sin(2 * np.pi * (1.3 * d + 0.07))
    g = 0.5 + 0.45 * np.sin(2 * np.pi * (2.1 * d + 0.33))
    b = 0.5 + 0.45 * np.sin(2 * np.pi * (3.2 * d + 0.64))
    return np.stack([r, g, b], axis=-1)


def generate_toy_scene(seed, size):
    """Render one deterministic RGB-D scene of `size` x `size` pixels."""
    if size < 32:
        raise ValueError(f"scene size must be at least 32, got {size}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))

    n_obj = int(rng.integers(3, 9))
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1.0)
    base = rng.uniform(0.6, 0.8)
    gx, gy = rng.uniform(-0.25, 0.25, size=2)
    depth = base + gx * (xx - 0.5) + gy * (yy - 0.5)
    background = depth.copy()

    levels = rng.permutation(np.linspace(0.05, 0.5, 8))[:n_obj]
    masks = []
    thin_flags = []
    for k in range(n_obj):
        kind = rng.integers(2)
        is_thin = k >= 1 and rng.random() < THIN_OBJECT_RATE
        cy, cx = rng.uniform(0.15, 0.85, size=2)
        y0, x0 = int(cy * size), int(cx * size)
        if kind == 0:
            if is_thin:
                half_len = max(4, int(rng.uniform(0.14, 0.32) * size))
                half_w = int(rng.integers(1, 3))  # bars 3-5 px across
                if rng.integers(2):
                    hh, ww = half_w, half_len
                else:
                    hh, ww = half_len, half_w
            else:
                hh = max(2, int(rng.uniform(0.08, 0.18) * size / 2))
                ww = max(2, int(rng.uniform(0.08, 0.18) * size / 2))
            mask = np.zeros((size, size), dtype=bool)
            mask[max(0, y0 - hh) : y0 + hh + 1, max(0, x0 - ww) : x0 + ww + 1] = True
        else:
            if is_thin:
                r = rng.uniform(2.5, 4.2)
            else:
                r = max(2.0, rng.uniform(0.08, 0.18) * size / 2)
            mask = (yy * (size - 1) - y0) ** 2 + (xx * (size - 1) - x0) ** 2 <= r * r
        depth[mask] = levels[k]
        masks.append(mask)
        thin_flags.append(is_thin)

    depth = np.clip(depth, 0.0, 1.0)

    # colorize: camouflaged large objects copy the background's colors instead;
    # only the shallower plateaus are eligible, so the hidden depth steps stay
    # moderate rather than spanning the whole range
    color_source = depth.copy()
    camo_draws = rng.random(n_obj)
    for k, mask in enumerate(masks):
        if not thin_flags[k] and levels[k] >= 0.3 and camo_draws[k] < CAMOUFLAGE_RATE:
            still_owned = mask.copy()
            for later in masks[k + 1 :]:
                still_owned &= ~later
            color_source[still_owned] = background[still_owned]
    rgb = _palette(np.clip(color_source, 0.0, 1.0))

    rgb += rng.normal(0.0, BACKGROUND_NOISE, size=rgb.shape)
    for mask in masks:
        sigma = rng.uniform(*TEXTURE_NOISE_RANGE)
        rgb[mask] += rng.normal(0.0, sigma, size=(int(mask.sum()), 3))

    # RGB-only texture patches: color edges with no depth counterpart
    for _ in range(int(rng.integers(1, 4))):
        py, px = (rng.uniform(0.1, 0.9, size=2) * size).astype(int)
        ph = max(2, int(rng.uniform(0.05, 0.15) * size))
        pw = max(2, int(rng.uniform(0.05, 0.15) * size))
        tint = rng.uniform(0.0, 1.0, size=3)
        rgb[py : py + ph, px : px + pw] = (1.0 - TINT_BLEND) * rgb[
            py : py + ph, px : px + pw
        ] + TINT_BLEND * tint

    return RgbImage(np.clip(rgb, 0.0, 1.0)), DepthMap(depth, unit_scale=1.0)


def make_toy_dataset(seed, count, size):
    """Generate `count` scenes with seeds derived deterministically from `seed`."""
    return [generate_toy_scene(seed * 100003 + i, size) for i in range(count)]
