"""Uncertainty-weighted fusion of the two task branches for structure prediction.

Each branch's final features are re-weighted by (1 + U), where U activates
that branch's own signed recovery error through a learnable 1x1 convolution
and a sigmoid. Pixels a branch currently gets wrong therefore contribute more
to the fused features the structure predictor sees.
"""

import torch
import torch.nn as nn


class UncertaintyConv(nn.Module):
    """Per-branch 1x1 convolution on the signed residual.

    Starts at weight 1, bias 0 so the initial gate is sigmoid(residual), a
    mild near-uniform attention around 0.5.
    """

    def __init__(self):
        super().__init__()
        self.conv = nn.Conv2d(1, 1, 1)
        with torch.no_grad():
            self.conv.weight.fill_(1.0)
            self.conv.bias.zero_()

    def forward(self, residual):
        return self.conv(residual)


def uncertainty_map(pred, gt, conv):
    """Sigmoid-activated 1x1 convolution of the signed residual (pred - gt).

    Training-only: the residual needs ground truth, so inference code must
    never reach this path.
    """
    if gt is None:
        raise ValueError("uncertainty_map requires ground truth; it has no inference mode")
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    return torch.sigmoid(conv(pred - gt))


def attention_fuse(f_sr, f_de, u_sr, u_de):
    """Concatenate the re-weighted branches, super-resolution branch first."""
    if f_sr.shape[-2:] != f_de.shape[-2:] or f_sr.shape[-2:] != u_sr.shape[-2:] \
            or u_sr.shape[-2:] != u_de.shape[-2:]:
        raise ValueError(
            "spatial mismatch between fusion inputs: "
            f"{tuple(f_sr.shape)}, {tuple(f_de.shape)}, {tuple(u_sr.shape)}, {tuple(u_de.shape)}"
        )
    return torch.cat([f_sr * (1.0 + u_sr), f_de * (1.0 + u_de)], dim=-3)


def structure_loss(s_pred, s_gt):
    """Mean absolute difference between predicted and target structure maps."""
    if s_pred.shape != s_gt.shape:
        raise ValueError(f"shape mismatch: {tuple(s_pred.shape)} vs {tuple(s_gt.shape)}")
    return (s_pred - s_gt).abs().mean()
