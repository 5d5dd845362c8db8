"""Depth-estimation backbone: residual stages over RGB at full resolution."""

import torch.nn as nn

from .blocks import FeatureStack, ResidualUnit, SideOutputHead, reconstruction_block, shallow_block


class DENet(nn.Module):
    """Predicts HR depth from the registered RGB image (training-time only).

    Mirrors the super-resolution backbone's stage layout so the two feature
    stacks align stage-for-stage, but works at HR throughout with stacks of
    pre-activation residual units instead of projection blocks.
    """

    def __init__(self, stages=5, channels=32, units_per_stage=4):
        super().__init__()
        self.stages = stages
        self.channels = channels
        self.units_per_stage = units_per_stage
        self.shallow = shallow_block(3, channels)
        self.blocks = nn.ModuleList(
            nn.Sequential(*(ResidualUnit(channels) for _ in range(units_per_stage)))
            for _ in range(stages)
        )
        self.heads = nn.ModuleList(SideOutputHead(channels) for _ in range(stages))
        self.reconstruct = reconstruction_block(channels)

    def forward(self, x, side_outputs=True):
        if x.dim() != 4 or x.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W) RGB input, got {tuple(x.shape)}")
        feat = self.shallow(x)
        features = []
        for block in self.blocks:
            feat = block(feat)
            features.append(feat)
        final = self.reconstruct(features[-1])
        sides = [head(f) for head, f in zip(self.heads, features)] if side_outputs else []
        return FeatureStack(features, sides, final)
