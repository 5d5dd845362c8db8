from .blocks import FeatureStack, SideOutputHead, derive_seed, init_params
from .denet import DENet
from .dsrnet import DSRNet
from .spnet import SPNet

__all__ = [
    "DENet",
    "DSRNet",
    "FeatureStack",
    "SPNet",
    "SideOutputHead",
    "derive_seed",
    "init_params",
]
