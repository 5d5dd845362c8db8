"""Cross-task distillation: role selection and the two transfer losses.

Each training epoch the network with the lower mean recovery error teaches
the other. Knowledge moves through two channels: aligned per-stage depth
outputs (output space) and row-stochastic pairwise feature similarities
(affinity space). Both losses are imposed on the student only; the caller
runs the teacher without gradients.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .types import DepthMap

DSR = "dsr"
DE = "de"


@dataclass
class RoleAssignment:
    teacher: str
    student: str
    e_dsr: float
    e_de: float


def _as_array(x):
    if isinstance(x, DepthMap):
        return x.data
    if isinstance(x, torch.Tensor):
        return x.detach().cpu().numpy()
    return np.asarray(x)


def mean_abs_error(pred, gt):
    """Mean absolute pixel error between two equally-shaped rasters."""
    p, g = _as_array(pred), _as_array(gt)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    return float(np.abs(p - g).mean())


def select_roles(e_dsr, e_de):
    """Pick teacher/student from the previous epoch's recovery errors.

    The super-resolution branch teaches whenever its error is lower or equal;
    ties keep the primary task in the teacher seat.
    """
    if not (math.isfinite(e_dsr) and math.isfinite(e_de)):
        raise ValueError(
            f"recovery errors must be finite, got e_dsr={e_dsr}, e_de={e_de} (diverged training?)"
        )
    if e_dsr <= e_de:
        return RoleAssignment(teacher=DSR, student=DE, e_dsr=float(e_dsr), e_de=float(e_de))
    return RoleAssignment(teacher=DE, student=DSR, e_dsr=float(e_dsr), e_de=float(e_de))


def _pooled_rows(feature, pool_size):
    x = feature if feature.dim() == 4 else feature.unsqueeze(0)
    b, c, h, w = x.shape
    p = min(int(pool_size), h, w)
    if (h, w) != (p, p):
        x = F.adaptive_avg_pool2d(x, p)
    return x.reshape(b, c, p * p).transpose(1, 2)  # (b, wh, c)


def affinity_logits(feature, pool_size=32):
    """Pairwise inner products R(F) R(F)^T of the pooled feature rows."""
    r = _pooled_rows(feature, pool_size)
    logits = r @ r.transpose(1, 2)
    return logits if feature.dim() == 4 else logits.squeeze(0)


def affinity(feature, pool_size=32):
    """Row-stochastic spatial similarity matrix of a feature raster.

    The feature is average-pooled to pool_size^2 positions first; a full-size
    matrix at training resolutions would be quadratically large.
    """
    logits = affinity_logits(feature, pool_size)
    return torch.softmax(logits, dim=-1)


def output_space_loss(sr_outputs, de_outputs):
    """Mean absolute disagreement between the two stacks of stage outputs."""
    if len(sr_outputs) != len(de_outputs):
        raise ValueError(f"length mismatch: {len(sr_outputs)} vs {len(de_outputs)}")
    terms = []
    for i, (a, b) in enumerate(zip(sr_outputs, de_outputs)):
        if a.shape != b.shape:
            raise ValueError(f"stage {i} shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
        terms.append((a - b).abs().mean())
    return torch.stack(terms).mean()


def affinity_space_loss(sr_features, de_features, pool_size=32):
    """Mean absolute disagreement between per-stage affinity matrices."""
    if len(sr_features) != len(de_features):
        raise ValueError(f"length mismatch: {len(sr_features)} vs {len(de_features)}")
    terms = []
    for i, (a, b) in enumerate(zip(sr_features, de_features)):
        if a.shape != b.shape:
            raise ValueError(f"stage {i} shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
        terms.append((affinity(a, pool_size) - affinity(b, pool_size)).abs().mean())
    return torch.stack(terms).mean()


def distill_loss(l_o, l_a, gamma=0.5):
    """Combine output-space and affinity-space terms."""
    return l_o + gamma * l_a
