"""Depth super-resolution backbone: stacked back-projection stages."""

import torch.nn as nn

from ..types import SUPPORTED_SCALES
from .blocks import (
    DownProjection,
    FeatureStack,
    SideOutputHead,
    UpProjection,
    reconstruction_block,
    shallow_block,
)


class DSRNet(nn.Module):
    """Maps an LR depth map to HR, exposing each stage's HR features.

    The shallow block lifts the LR map to C channels; each of the N stages
    projects to HR (features F^n kept for distillation) and, except for the
    last, back down to LR for the next stage. Reconstruction reads only F^N.
    """

    def __init__(self, scale, stages=5, channels=32):
        super().__init__()
        if scale not in SUPPORTED_SCALES:
            raise ValueError(f"unsupported scale {scale}; supported: {SUPPORTED_SCALES}")
        self.scale = scale
        self.stages = stages
        self.channels = channels
        self.shallow = shallow_block(1, channels)
        self.up_blocks = nn.ModuleList(UpProjection(channels, scale) for _ in range(stages))
        self.down_blocks = nn.ModuleList(
            DownProjection(channels, scale) for _ in range(stages - 1)
        )
        self.heads = nn.ModuleList(SideOutputHead(channels) for _ in range(stages))
        self.reconstruct = reconstruction_block(channels)

    def forward(self, x, side_outputs=True):
        if x.dim() != 4 or x.shape[1] != 1:
            raise ValueError(f"expected (B, 1, h, w) LR depth, got {tuple(x.shape)}")
        feat = self.shallow(x)
        features = []
        for n in range(self.stages):
            hr = self.up_blocks[n](feat)
            features.append(hr)
            if n < self.stages - 1:
                feat = self.down_blocks[n](hr)
        final = self.reconstruct(features[-1])
        sides = [head(f) for head, f in zip(self.heads, features)] if side_outputs else []
        return FeatureStack(features, sides, final)
