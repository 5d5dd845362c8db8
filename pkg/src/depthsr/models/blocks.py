"""Shared building blocks for the three networks."""

import hashlib
import math
from dataclasses import dataclass, field

import torch
import torch.nn as nn

# deconv/conv geometry per up-scaling factor: kernel, stride, padding
PROJECTION_GEOMETRY = {2: (6, 2, 2), 4: (8, 4, 2), 8: (12, 8, 2)}


@dataclass
class FeatureStack:
    """Per-stage HR features, their side-output depth maps, and the final map."""

    features: list
    side_outputs: list
    final_output: torch.Tensor

    def validate(self, stages):
        if len(self.features) != stages or len(self.side_outputs) != stages:
            raise ValueError(
                f"expected {stages} features and side outputs, got "
                f"{len(self.features)}/{len(self.side_outputs)}"
            )
        hw = self.final_output.shape[-2:]
        for t in list(self.features) + list(self.side_outputs):
            if t.shape[-2:] != hw:
                raise ValueError(f"stage raster {tuple(t.shape)} does not match HR size {tuple(hw)}")
        return self


def derive_seed(seed, name):
    """Stable per-network seed so one network's init is independent of the others."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFFFFFFFFFFFFFF


def init_params(module, seed):
    """Fan-in-scaled normal init for conv weights, zero biases, seeded locally.

    Side-output heads keep their canonical channel-mean start; everything else
    draws from a generator seeded for this network alone.
    """
    gen = torch.Generator().manual_seed(seed)
    in_heads = set()
    for m in module.modules():
        if isinstance(m, SideOutputHead):
            in_heads.update(id(c) for c in m.modules())
    for m in module.modules():
        if id(m) in in_heads:
            continue
        if isinstance(m, nn.Conv2d):
            fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
        elif isinstance(m, nn.ConvTranspose2d):
            # each output position receives k*k/s*s taps per input channel
            fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
            fan_in /= m.stride[0] * m.stride[1]
        else:
            continue
        std = math.sqrt(2.0 / fan_in)
        with torch.no_grad():
            m.weight.normal_(0.0, std, generator=gen)
            if m.bias is not None:
                m.bias.zero_()
    return module


def _expand(channels, scale):
    """LR -> HR via strided deconvolution(s); x16 cascades two x4 units."""
    if scale == 16:
        k, s, p = PROJECTION_GEOMETRY[4]
        return nn.Sequential(
            nn.ConvTranspose2d(channels, channels, k, s, p), nn.ReLU(inplace=True),
            nn.ConvTranspose2d(channels, channels, k, s, p), nn.ReLU(inplace=True),
        )
    k, s, p = PROJECTION_GEOMETRY[scale]
    return nn.Sequential(nn.ConvTranspose2d(channels, channels, k, s, p), nn.ReLU(inplace=True))


def _reduce(channels, scale):
    """HR -> LR via strided convolution(s), mirroring _expand."""
    if scale == 16:
        k, s, p = PROJECTION_GEOMETRY[4]
        return nn.Sequential(
            nn.Conv2d(channels, channels, k, s, p), nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, k, s, p), nn.ReLU(inplace=True),
        )
    k, s, p = PROJECTION_GEOMETRY[scale]
    return nn.Sequential(nn.Conv2d(channels, channels, k, s, p), nn.ReLU(inplace=True))


class UpProjection(nn.Module):
    """Back-projection upsampling unit.

    Projects LR features up, re-projects down, and corrects the upsampled
    estimate with the re-projection residual.
    """

    def __init__(self, channels, scale):
        super().__init__()
        self.up1 = _expand(channels, scale)
        self.down = _reduce(channels, scale)
        self.up2 = _expand(channels, scale)

    def forward(self, x):
        h0 = self.up1(x)
        l0 = self.down(h0)
        h1 = self.up2(l0 - x)
        return h0 + h1


class DownProjection(nn.Module):
    """Back-projection downsampling unit (mirror of UpProjection)."""

    def __init__(self, channels, scale):
        super().__init__()
        self.down1 = _reduce(channels, scale)
        self.up = _expand(channels, scale)
        self.down2 = _reduce(channels, scale)

    def forward(self, x):
        l0 = self.down1(x)
        h0 = self.up(l0)
        l1 = self.down2(h0 - x)
        return l0 + l1


class ResidualUnit(nn.Module):
    """Pre-activation residual unit with two 3x3 convolutions."""

    def __init__(self, channels):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        h = self.conv1(torch.relu(x))
        h = self.conv2(torch.relu(h))
        return x + h


class SideOutputHead(nn.Module):
    """Two-convolution head projecting a C-channel feature to one depth channel.

    Starts as an exact channel-mean readout (the ReLU pair below passes both
    signs through), so freshly initialized side outputs summarize the feature
    structure instead of being an arbitrary random projection; the head stays
    fully trainable from there.
    """

    def __init__(self, channels):
        super().__init__()
        mid = max(2, 2 * (channels // 4))
        self.conv1 = nn.Conv2d(channels, mid, 3, padding=1)
        self.conv2 = nn.Conv2d(mid, 1, 1)
        self.reset_canonical()

    def reset_canonical(self):
        with torch.no_grad():
            half = self.conv1.out_channels // 2
            c = self.conv1.in_channels
            self.conv1.weight.zero_()
            self.conv1.weight[:half, :, 1, 1] = 1.0 / c
            self.conv1.weight[half:, :, 1, 1] = -1.0 / c
            self.conv1.bias.zero_()
            self.conv2.weight.zero_()
            self.conv2.weight[0, :half] = 1.0 / half
            self.conv2.weight[0, half:] = -1.0 / half
            self.conv2.bias.zero_()

    def forward(self, x):
        return self.conv2(torch.relu(self.conv1(x)))


def shallow_block(in_channels, channels):
    """Three-convolution feature extractor used by both backbone networks."""
    return nn.Sequential(
        nn.Conv2d(in_channels, channels, 3, padding=1), nn.ReLU(inplace=True),
        nn.Conv2d(channels, channels, 3, padding=1), nn.ReLU(inplace=True),
        nn.Conv2d(channels, channels, 1), nn.ReLU(inplace=True),
    )


def reconstruction_block(channels):
    return nn.Sequential(
        nn.Conv2d(channels, channels, 3, padding=1), nn.ReLU(inplace=True),
        nn.Conv2d(channels, 1, 3, padding=1),
    )
