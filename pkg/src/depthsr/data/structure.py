"""Structure targets: high-frequency response of a depth map.

The supervision target for structure prediction is the response of the depth
map to a fixed 3x3 Laplacian; no learned or hand-tuned edge detector is
involved, so the target is fully reproducible.
"""

import numpy as np
from scipy import ndimage

from ..types import DepthMap, StructureMap

STRUCTURE_KERNEL = np.array(
    [[0.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 0.0]], dtype=np.float64
)


def compute_structure_gt(depth):
    """Convolve a depth raster with the fixed Laplacian, replicating borders.

    Accepts a DepthMap or a bare 2-D array; returns a StructureMap for the
    former and a bare array for the latter.
    """
    arr = depth.data if isinstance(depth, DepthMap) else np.asarray(depth, dtype=np.float64)
    out = ndimage.convolve(arr, STRUCTURE_KERNEL, mode="nearest")
    if isinstance(depth, DepthMap):
        return StructureMap(out)
    return out
