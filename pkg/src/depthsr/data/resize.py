"""Bicubic resampling matching the MATLAB imresize conventions.

Benchmark protocols degrade depth maps with MATLAB's imresize, whose behavior
differs from most library bicubics in two ways that matter numerically: the
kernel is stretched by the scale factor when shrinking (antialias prefilter),
and out-of-range taps use whole-sample symmetric padding. Both are implemented
here so degradation is reproducible without MATLAB.
"""

import numpy as np

from ..types import SUPPORTED_SCALES, DepthMap


def _cubic(x):
    # Keys kernel with a = -0.5
    ax = np.abs(x)
    ax2 = ax * ax
    ax3 = ax2 * ax
    near = (1.5 * ax3 - 2.5 * ax2 + 1.0) * (ax <= 1.0)
    far = (-0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0) * ((ax > 1.0) & (ax < 2.0))
    return near + far


def _contributions(in_len, out_len):
    """Weight/index matrices mapping in_len source samples to out_len outputs."""
    scale = out_len / in_len
    kernel_width = 4.0 if scale >= 1.0 else 4.0 / scale
    x = np.arange(1, out_len + 1, dtype=np.float64)
    u = x / scale + 0.5 * (1.0 - 1.0 / scale)
    left = np.floor(u - kernel_width / 2.0).astype(np.int64)
    taps = int(np.ceil(kernel_width)) + 2
    idx = left[:, None] + np.arange(taps)
    dist = u[:, None] - idx
    if scale < 1.0:
        weights = scale * _cubic(scale * dist)
    else:
        weights = _cubic(dist)
    weights /= weights.sum(axis=1, keepdims=True)
    # whole-sample symmetric reflection of out-of-range indices
    mirrored = np.concatenate([np.arange(in_len), np.arange(in_len - 1, -1, -1)])
    idx = mirrored[np.mod(idx - 1, 2 * in_len)]
    return weights, idx


def _resize_axis(arr, out_len, axis):
    arr = np.moveaxis(arr, axis, 0)
    weights, idx = _contributions(arr.shape[0], out_len)
    out = np.einsum("ot,ot...->o...", weights, arr[idx])
    return np.moveaxis(out, 0, axis)


def resize_bicubic(arr, out_h, out_w):
    """Resize a 2-D (or H x W x C) float array to (out_h, out_w)."""
    arr = np.asarray(arr, dtype=np.float64)
    out = _resize_axis(arr, out_h, axis=0)
    out = _resize_axis(out, out_w, axis=1)
    return out


def _check_scale(scale):
    if scale not in SUPPORTED_SCALES:
        raise ValueError(f"unsupported scale {scale}; supported: {SUPPORTED_SCALES}")


def bicubic_downsample(depth, scale):
    """Downsample a depth raster by an integer factor with antialiasing.

    Accepts a DepthMap or a bare 2-D array and returns the same kind; DepthMap
    outputs are clipped to [0, 1] since the kernel overshoots at step edges.
    """
    _check_scale(scale)
    arr = depth.data if isinstance(depth, DepthMap) else np.asarray(depth, dtype=np.float64)
    h, w = arr.shape
    if h % scale or w % scale:
        raise ValueError(f"dimensions ({h}, {w}) are not divisible by scale {scale}")
    out = resize_bicubic(arr, h // scale, w // scale)
    if isinstance(depth, DepthMap):
        return DepthMap(np.clip(out, 0.0, 1.0), unit_scale=depth.unit_scale)
    return out


def bicubic_upsample(depth, scale):
    """Upsample a depth raster by an integer factor (no antialiasing)."""
    _check_scale(scale)
    arr = depth.data if isinstance(depth, DepthMap) else np.asarray(depth, dtype=np.float64)
    h, w = arr.shape
    out = resize_bicubic(arr, h * scale, w * scale)
    if isinstance(depth, DepthMap):
        return DepthMap(np.clip(out, 0.0, 1.0), unit_scale=depth.unit_scale)
    return out
