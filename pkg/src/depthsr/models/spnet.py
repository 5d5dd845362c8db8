"""Structure prediction head over the fused two-branch features."""

import torch.nn as nn


class SPNet(nn.Module):
    """Predicts the high-frequency structure map from fused features.

    Exactly six convolutions: five Conv+ReLU layers followed by a last Conv.
    """

    def __init__(self, in_channels, width=None):
        super().__init__()
        self.in_channels = in_channels
        width = width or max(1, in_channels // 2)
        self.width = width
        layers = [nn.Conv2d(in_channels, width, 3, padding=1), nn.ReLU(inplace=True)]
        for _ in range(4):
            layers += [nn.Conv2d(width, width, 3, padding=1), nn.ReLU(inplace=True)]
        layers.append(nn.Conv2d(width, 1, 3, padding=1))
        self.body = nn.Sequential(*layers)

    def forward(self, x):
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise ValueError(
                f"expected (B, {self.in_channels}, H, W) fused features, got {tuple(x.shape)}"
            )
        return self.body(x)
