"""Core raster types shared by the data pipeline, trainer and evaluator."""

from dataclasses import dataclass, field

import numpy as np

SUPPORTED_SCALES = (2, 4, 8, 16)


def _check_raster(data, ndim, name):
    if not isinstance(data, np.ndarray):
        raise TypeError(f"{name} expects an ndarray, got {type(data).__name__}")
    if data.ndim != ndim:
        raise ValueError(f"{name} expects a {ndim}-D array, got shape {data.shape}")
    if not np.issubdtype(data.dtype, np.floating):
        raise ValueError(f"{name} expects float data, got dtype {data.dtype}")
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{name} contains non-finite values")


@dataclass
class DepthMap:
    """A 2-D depth raster normalized to [0, 1].

    unit_scale is the multiplier that restores physical units (e.g. 255 for
    8-bit benchmark conventions, or the max depth in meters); metrics apply it
    on request so training can stay in normalized space.
    """

    data: np.ndarray
    unit_scale: float = 1.0

    def __post_init__(self):
        _check_raster(self.data, 2, "DepthMap")
        lo, hi = float(self.data.min()), float(self.data.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"DepthMap values must lie in [0, 1], got [{lo}, {hi}]")
        if not (np.isfinite(self.unit_scale) and self.unit_scale > 0):
            raise ValueError(f"unit_scale must be a positive finite float, got {self.unit_scale}")

    @property
    def shape(self):
        return self.data.shape


@dataclass
class RgbImage:
    """An H x W x 3 color raster in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        _check_raster(self.data, 3, "RgbImage")
        if self.data.shape[2] != 3:
            raise ValueError(f"RgbImage expects 3 channels, got shape {self.data.shape}")
        lo, hi = float(self.data.min()), float(self.data.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"RgbImage values must lie in [0, 1], got [{lo}, {hi}]")

    @property
    def shape(self):
        return self.data.shape


@dataclass
class StructureMap:
    """A signed 2-D high-frequency response raster."""

    data: np.ndarray

    def __post_init__(self):
        _check_raster(self.data, 2, "StructureMap")

    @property
    def shape(self):
        return self.data.shape


@dataclass
class TrainingSample:
    """One training example: LR depth, HR depth, registered RGB, structure target.

    The HR rasters all share one spatial size which must be exactly `scale`
    times the LR depth size in both dimensions.
    """

    d_lr: DepthMap
    d_hr: DepthMap
    rgb: RgbImage
    s_gt: StructureMap
    scale: int = field(default=4)

    def __post_init__(self):
        if self.scale not in SUPPORTED_SCALES:
            raise ValueError(f"unsupported scale {self.scale}; supported: {SUPPORTED_SCALES}")
        lh, lw = self.d_lr.shape
        hh, hw = self.d_hr.shape
        if (hh, hw) != (lh * self.scale, lw * self.scale):
            raise ValueError(
                f"d_hr shape {(hh, hw)} is not d_lr shape {(lh, lw)} times scale {self.scale}"
            )
        if self.rgb.shape[:2] != (hh, hw):
            raise ValueError(f"rgb shape {self.rgb.shape[:2]} does not match d_hr shape {(hh, hw)}")
        if self.s_gt.shape != (hh, hw):
            raise ValueError(f"s_gt shape {self.s_gt.shape} does not match d_hr shape {(hh, hw)}")
