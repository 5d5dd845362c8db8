"""Serialized training-sample shards.

A shard set is a directory of structured-dtype .npy files plus a
manifest.json. Each shard row holds the four rasters of one sample in
float32; the manifest records scale, unit_scale, provenance metadata and a
sha256 per shard so a rerun with the same seed can be verified byte-for-byte
(plain .npy files carry no timestamps, unlike zip-based containers).
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from .. import __version__
from ..types import DepthMap, RgbImage, StructureMap, TrainingSample

MANIFEST_NAME = "manifest.json"
FORMAT_TAG = "depthsr-shards-v1"


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_shards(samples, out_dir, shard_size=128, provenance=None):
    """Write samples to `out_dir` as shard files plus a checksum manifest."""
    samples = list(samples)
    if not samples:
        raise ValueError("refusing to write an empty shard set")
    scale = samples[0].scale
    lh, lw = samples[0].d_lr.shape
    hh, hw = samples[0].d_hr.shape
    unit_scale = samples[0].d_hr.unit_scale
    for i, s in enumerate(samples):
        if s.scale != scale or s.d_hr.shape != (hh, hw):
            raise ValueError(f"sample {i} disagrees with shard geometry ({hh}x{hw}, x{scale})")
    dtype = np.dtype(
        [
            ("d_lr", np.float32, (lh, lw)),
            ("d_hr", np.float32, (hh, hw)),
            ("rgb", np.float32, (hh, hw, 3)),
            ("s_gt", np.float32, (hh, hw)),
        ]
    )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for shard_idx, start in enumerate(range(0, len(samples), shard_size)):
        chunk = samples[start : start + shard_size]
        block = np.zeros(len(chunk), dtype=dtype)
        for row, s in zip(block, chunk):
            row["d_lr"] = s.d_lr.data
            row["d_hr"] = s.d_hr.data
            row["rgb"] = s.rgb.data
            row["s_gt"] = s.s_gt.data
        name = f"shard_{shard_idx:04d}.npy"
        np.save(out_dir / name, block)
        entries.append({"file": name, "samples": len(chunk), "sha256": _sha256(out_dir / name)})
    manifest = {
        "format": FORMAT_TAG,
        "code_version": __version__,
        "count": len(samples),
        "scale": scale,
        "hr_size": [hh, hw],
        "unit_scale": unit_scale,
        "provenance": provenance or {},
        "shards": entries,
    }
    with open(out_dir / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_shards(in_dir, verify=True):
    """Load a shard set back into TrainingSamples, checking manifest checksums."""
    in_dir = Path(in_dir)
    manifest_path = in_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise ValueError(f"no {MANIFEST_NAME} in {in_dir}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != FORMAT_TAG:
        raise ValueError(f"{manifest_path}: unknown shard format {manifest.get('format')!r}")
    scale = int(manifest["scale"])
    unit_scale = float(manifest["unit_scale"])
    samples = []
    for entry in manifest["shards"]:
        shard_path = in_dir / entry["file"]
        if verify and _sha256(shard_path) != entry["sha256"]:
            raise ValueError(f"checksum mismatch for {entry['file']}: shard set is corrupt")
        block = np.load(shard_path)
        for row in block:
            samples.append(
                TrainingSample(
                    d_lr=DepthMap(row["d_lr"].astype(np.float64), unit_scale=unit_scale),
                    d_hr=DepthMap(row["d_hr"].astype(np.float64), unit_scale=unit_scale),
                    rgb=RgbImage(row["rgb"].astype(np.float64)),
                    s_gt=StructureMap(row["s_gt"].astype(np.float64)),
                    scale=scale,
                )
            )
    if len(samples) != manifest["count"]:
        raise ValueError(
            f"{in_dir}: manifest promises {manifest['count']} samples, found {len(samples)}"
        )
    return samples, manifest
