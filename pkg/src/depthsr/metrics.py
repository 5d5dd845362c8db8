"""Evaluation metrics in de-normalized (native) depth units."""

import numpy as np

from .types import DepthMap


def _as_array(x):
    if isinstance(x, DepthMap):
        return x.data
    return np.asarray(x, dtype=np.float64)


def _check(pred, gt):
    p, g = _as_array(pred), _as_array(gt)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    return p, g


def mad_metric(pred, gt, unit_scale=1.0):
    """Mean absolute difference after restoring native units."""
    p, g = _check(pred, gt)
    return float(np.mean(np.abs(p * unit_scale - g * unit_scale)))


def rmse_metric(pred, gt, unit_scale=1.0):
    """Root mean square error after restoring native units."""
    p, g = _check(pred, gt)
    diff = p * unit_scale - g * unit_scale
    return float(np.sqrt(np.mean(diff * diff)))
