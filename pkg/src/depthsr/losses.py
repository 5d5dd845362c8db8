"""Task losses for the two networks and the student's combined objective."""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .types import DepthMap


@dataclass
class LossWeights:
    """Trade-off weights: gamma scales affinity transfer inside the distillation
    term, lam balances SSIM vs L1 in the depth-estimation loss, rho1/rho2 weight
    the structure and distillation terms in the total."""

    gamma: float = 0.5
    lam: float = 0.2
    rho1: float = 0.1
    rho2: float = 0.1

    def __post_init__(self):
        problems = []
        for name in ("gamma", "lam", "rho1", "rho2"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                problems.append(f"{name} must be finite and >= 0, got {v}")
        if not 0.0 <= self.lam <= 1.0:
            problems.append(f"lam must lie in [0, 1], got {self.lam}")
        if problems:
            raise ValueError("; ".join(problems))


def _as_batched(x):
    if isinstance(x, DepthMap):
        x = torch.from_numpy(x.data)
    elif not isinstance(x, torch.Tensor):
        x = torch.as_tensor(np.asarray(x))
    if x.dim() == 2:
        return x.unsqueeze(0).unsqueeze(0)
    if x.dim() == 3:
        return x.unsqueeze(1)
    return x


def dsr_loss(d_sr, d_hr):
    """Pixel-wise L1 reconstruction loss."""
    a, b = _as_batched(d_sr), _as_batched(d_hr)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    return (a - b).abs().mean()


def gaussian_window(win_size, sigma, dtype=torch.float64):
    half = (win_size - 1) // 2
    x = torch.arange(-half, half + 1, dtype=dtype)
    g = torch.exp(-(x * x) / (2.0 * sigma * sigma))
    g = g / g.sum()
    return g[:, None] * g[None, :]


def ssim(a, b, win_size=11, sigma=1.5, k1=0.01, k2=0.03, data_range=1.0):
    """Mean local structural similarity over the valid (fully-windowed) region.

    Gaussian-weighted means/covariances, matching the standard reference
    formulation on normalized depth (data_range 1).
    """
    x, y = _as_batched(a), _as_batched(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")
    h, w = x.shape[-2:]
    if h < win_size or w < win_size:
        raise ValueError(f"image {h}x{w} is smaller than the {win_size}x{win_size} window")
    window = gaussian_window(win_size, sigma, dtype=x.dtype).reshape(1, 1, win_size, win_size)
    ux = F.conv2d(x, window)
    uy = F.conv2d(y, window)
    vx = F.conv2d(x * x, window) - ux * ux
    vy = F.conv2d(y * y, window) - uy * uy
    vxy = F.conv2d(x * y, window) - ux * uy
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    s = ((2.0 * ux * uy + c1) * (2.0 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    return s.mean()


def de_loss(d_de, d_hr, lam=0.2, win_size=11, sigma=1.5):
    """Depth-estimation loss: lam-weighted SSIM term plus (1 - lam) L1."""
    structural = (1.0 - ssim(d_de, d_hr, win_size=win_size, sigma=sigma)) / 2.0
    return lam * structural + (1.0 - lam) * dsr_loss(d_de, d_hr)


def total_student_loss(task_loss, l_struc, l_distill, w):
    """Student objective: task loss plus weighted structure/distillation terms."""
    return task_loss + w.rho1 * l_struc + w.rho2 * l_distill
