"""Reading and writing RGB-D pairs.

Directory convention: `<stem>_color.png` (8-bit RGB) paired with
`<stem>_depth.png` (16-bit grayscale) or `<stem>_depth.pfm` (float32).
Zero depth marks an invalid pixel and is filled from the nearest valid one;
depth is normalized to [0, 1] by the maximum over the whole directory, with
that maximum kept as `unit_scale` so metrics can restore source units.
"""

import os
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from ..types import DepthMap, RgbImage

DEPTH_SUFFIX = {"png16": "_depth.png", "pfm": "_depth.pfm"}


def read_pfm(path):
    """Read a grayscale PFM file into a float32 array (top-down row order)."""
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header != b"Pf":
            raise ValueError(f"{path}: not a grayscale PFM file (header {header!r})")
        dims = fh.readline().split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(width * height * 4), dtype=dtype)
    if data.size != width * height:
        raise ValueError(f"{path}: truncated PFM payload")
    # PFM stores rows bottom-up
    return data.reshape(height, width)[::-1].astype(np.float32)


def write_pfm(path, values):
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise ValueError(f"PFM writer expects a 2-D array, got shape {values.shape}")
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{values.shape[1]} {values.shape[0]}\n".encode())
        fh.write(b"-1.0\n")
        fh.write(values[::-1].astype("<f4").tobytes())


def write_depth_png16(path, values):
    arr = np.asarray(values)
    if arr.dtype != np.uint16:
        arr = np.clip(np.rint(arr), 0, 65535).astype(np.uint16)
    Image.fromarray(arr).save(path)


def write_depth_pfm(path, values):
    write_pfm(path, values)


def write_rgb_png(path, values):
    arr = np.asarray(values)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def _read_raw_depth(path, fmt):
    if fmt == "pfm":
        return read_pfm(path).astype(np.float64)
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected single-channel depth, got shape {arr.shape}")
    return arr.astype(np.float64)


def _read_rgb(path):
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"))
    return arr.astype(np.float64) / 255.0


def fill_invalid(raw):
    """Replace zero-valued pixels with their nearest valid neighbor's value."""
    invalid = raw <= 0
    if not invalid.any():
        return raw
    if invalid.all():
        raise ValueError("depth map has no valid pixels")
    idx = ndimage.distance_transform_edt(invalid, return_distances=False, return_indices=True)
    return raw[tuple(idx)]


def scan_rgbd_dir(path, format):
    """Return sorted (stem, color_path, depth_path) triples, checking pairing."""
    if format not in DEPTH_SUFFIX:
        raise ValueError(f"unknown depth format {format!r}; expected png16 or pfm")
    path = Path(path)
    depth_suffix = DEPTH_SUFFIX[format]
    stems = {}
    for name in sorted(os.listdir(path)):
        if name.endswith("_color.png"):
            stems.setdefault(name[: -len("_color.png")], {})["color"] = path / name
        elif name.endswith(depth_suffix):
            stems.setdefault(name[: -len(depth_suffix)], {})["depth"] = path / name
    triples = []
    for stem in sorted(stems):
        entry = stems[stem]
        if "depth" not in entry:
            raise ValueError(f"missing depth file for {stem}: expected {stem}{depth_suffix}")
        if "color" not in entry:
            raise ValueError(f"missing color file for {stem}: expected {stem}_color.png")
        triples.append((stem, entry["color"], entry["depth"]))
    return triples


def load_rgbd_pairs(path, format):
    """Load all RGB-D pairs in a directory as (RgbImage, DepthMap) tuples."""
    triples = scan_rgbd_dir(path, format)
    if not triples:
        return []
    rgbs, raws = [], []
    for stem, color_path, depth_path in triples:
        try:
            rgb = _read_rgb(color_path)
        except Exception as exc:
            raise IOError(f"failed to read {color_path}: {exc}") from exc
        try:
            raw = _read_raw_depth(depth_path, format)
        except ValueError:
            raise
        except Exception as exc:
            raise IOError(f"failed to read {depth_path}: {exc}") from exc
        if rgb.shape[:2] != raw.shape:
            raise ValueError(
                f"{stem}: color {rgb.shape[:2]} and depth {raw.shape} dimensions differ"
            )
        try:
            raw = fill_invalid(raw)
        except ValueError as exc:
            raise ValueError(f"{stem}: {exc}") from exc
        rgbs.append(rgb)
        raws.append(raw)
    dataset_max = max(float(r.max()) for r in raws)
    if dataset_max <= 0:
        raise ValueError("no positive depth values in dataset")
    return [
        (RgbImage(rgb), DepthMap(raw / dataset_max, unit_scale=dataset_max))
        for rgb, raw in zip(rgbs, raws)
    ]
