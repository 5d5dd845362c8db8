"""Depth map super-resolution with training-time RGB structure guidance.

The package trains two networks jointly: a depth super-resolution network that
maps a low-resolution depth map to high resolution, and a depth estimation
network that predicts the same high-resolution depth from the registered RGB
image. During training they exchange knowledge through output/affinity
distillation and a shared structure-prediction head; at test time only the
super-resolution network is kept, so inference needs no RGB input.
"""

__version__ = "0.1.0"

from .inference import infer, load_sr_network
from .types import DepthMap, RgbImage, StructureMap, TrainingSample

__all__ = [
    "DepthMap",
    "RgbImage",
    "StructureMap",
    "TrainingSample",
    "__version__",
    "infer",
    "load_sr_network",
]
