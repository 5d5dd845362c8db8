"""Test-time super-resolution: the SR network alone, depth in, depth out.

Deployment needs nothing the guidance machinery produced — a checkpoint's
estimation network, structure predictor, and uncertainty gates can all be
stripped and inference still yields byte-identical results.
"""

import numpy as np
import torch

from .models import DSRNet
from .train.checkpoint import CheckpointError, _load_module, read_payload
from .types import DepthMap


def build_sr_network(payload):
    """Instantiate and load only the SR network from a checkpoint payload."""
    config = payload["config"]
    net = DSRNet(config["scale"], config["stage_count"], config["channels"])
    saved = payload["models"].get("dsrnet")
    if saved is None:
        raise CheckpointError("checkpoint carries no SR network parameters")
    _load_module(net, saved, "dsrnet")
    net.to(memory_format=torch.channels_last)
    net.eval()
    return net


def load_sr_network(path):
    return build_sr_network(read_payload(path))


def infer(d_lr, network, expected_scale=None):
    """Super-resolve one LR depth map. Uses the LR depth and nothing else."""
    if expected_scale is not None and network.scale != expected_scale:
        raise ValueError(
            f"network upsamples x{network.scale} but x{expected_scale} was requested"
        )
    if isinstance(d_lr, DepthMap):
        unit_scale = d_lr.unit_scale
        raw = d_lr.data
    else:
        unit_scale = 1.0
        raw = np.asarray(d_lr, dtype=np.float64)
        if raw.ndim != 2:
            raise ValueError(f"expected a 2-D depth map, got shape {raw.shape}")
    x = torch.from_numpy(raw.astype(np.float32))[None, None].contiguous(
        memory_format=torch.channels_last
    )
    with torch.no_grad():
        out = network(x, side_outputs=False).final_output
    hr = np.clip(out[0, 0].numpy().astype(np.float64), 0.0, 1.0)
    return DepthMap(hr, unit_scale=unit_scale)
