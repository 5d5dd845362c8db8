"""Command-line entry point: prepare, make-toy, train, eval, infer.

Every run drops a `run_manifest.json` next to its outputs recording the
config hash, seed, and code version, so any artifact can be traced back to
the exact invocation that produced it. Exit codes: 0 success, 1 validation
problem, 2 runtime abort (divergence or unexpected failure).
"""

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data.io import (
    load_rgbd_pairs,
    read_pfm,
    scan_rgbd_dir,
    write_depth_png16,
    write_pfm,
    write_rgb_png,
)
from .data.patches import augment_with_rotations, extract_patches
from .data.shards import read_shards, write_shards
from .data.toy import make_toy_dataset
from .evaluate import evaluate_scenes, format_report, write_report
from .inference import build_sr_network, infer
from .train import (
    TrainConfig,
    TrainingDiverged,
    config_hash,
    init_state,
    load_checkpoint,
    load_config,
    read_payload,
    run_step1,
    run_step2,
    save_checkpoint,
)
from .types import SUPPORTED_SCALES

ABLATIONS = ("no-distill", "no-affinity", "no-structure")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting the process."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _args_hash(mapping):
    blob = ";".join(f"{k}={mapping[k]!r}" for k in sorted(mapping))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _write_run_manifest(directory, command, cfg_hash, seed):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config_hash": cfg_hash,
        "seed": seed,
        "code_version": __version__,
    }
    with open(directory / "run_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_prepare(args):
    if args.scale not in SUPPORTED_SCALES:
        raise UsageError(
            f"unsupported scale {args.scale} (supported: {', '.join(map(str, SUPPORTED_SCALES))})"
        )
    pairs = load_rgbd_pairs(args.input, args.format)
    if not pairs:
        raise UsageError(f"no RGB-D pairs found in {args.input}")
    samples = extract_patches(pairs, args.patch_size, args.count, args.scale, args.seed)
    if args.augment:
        samples = augment_with_rotations(samples)
    write_shards(
        samples,
        args.output,
        provenance={
            "source": str(args.input),
            "patch_size": args.patch_size,
            "seed": args.seed,
            "augmented": bool(args.augment),
        },
    )
    _write_run_manifest(args.output, "prepare", _args_hash(vars(args)), args.seed)
    print(f"pairs: {len(pairs)}")
    print(f"patches: {len(samples)}")
    return 0


def cmd_make_toy(args):
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for i, (rgb, depth) in enumerate(make_toy_dataset(args.seed, args.count, args.size)):
        stem = out / f"toy_{i:03d}"
        write_rgb_png(f"{stem}_color.png", rgb.data)
        if args.format == "png16":
            write_depth_png16(f"{stem}_depth.png", depth.data * 65535.0)
        else:
            write_pfm(f"{stem}_depth.pfm", depth.data)
    _write_run_manifest(args.output, "make-toy", _args_hash(vars(args)), args.seed)
    print(f"scenes: {args.count}")
    return 0


def _apply_ablations(config, tags):
    weights = config.weights
    for tag in tags or ():
        if tag == "no-distill":
            weights = dataclasses.replace(weights, rho2=0.0)
            config = dataclasses.replace(
                config, use_output_distill=False, use_affinity_distill=False
            )
        elif tag == "no-affinity":
            config = dataclasses.replace(config, use_affinity_distill=False)
        elif tag == "no-structure":
            weights = dataclasses.replace(weights, rho1=0.0)
            config = dataclasses.replace(config, use_structure=False)
        else:
            raise UsageError(f"unknown ablation {tag!r} (choose from {', '.join(ABLATIONS)})")
    return dataclasses.replace(config, weights=weights)


def cmd_train(args):
    overrides = [kv.split("=", 1) for kv in args.set or ()]
    if any(len(kv) != 2 for kv in overrides):
        raise UsageError("--set expects key=value")
    if args.resume:
        if overrides and not args.config:
            raise UsageError(
                "--set has no effect on a resumed run; the checkpoint carries its config"
            )
        state = load_checkpoint(args.resume)
        config = state.config
        if args.config:
            declared = load_config(args.config, overrides)
            if config_hash(declared) != config_hash(config):
                raise UsageError(
                    "config file does not match the checkpoint being resumed "
                    f"({config_hash(declared)} vs {config_hash(config)})"
                )
    else:
        if not args.config:
            raise UsageError("--config is required unless resuming")
        config = load_config(args.config, overrides)
        state = None
    config = _apply_ablations(config, args.ablate)
    if state is not None:
        state.config = config

    samples, manifest = read_shards(args.data)
    if manifest["scale"] != config.scale:
        raise UsageError(
            f"shards were prepared at x{manifest['scale']} but the config trains x{config.scale}"
        )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_run_manifest(out, "train", config_hash(config), config.seed)

    if state is None:
        state = init_state(config)
    start_epoch = state.epoch
    if state.epoch < config.step1_epochs:
        state = run_step1(config, samples, state)
        _print_new_epochs(state, start_epoch)
        start_epoch = state.epoch
    state = run_step2(state, config, samples)
    _print_new_epochs(state, start_epoch)

    ckpt = out / "final.ckpt"
    save_checkpoint(state, ckpt)
    with open(out / "train_log.json", "w") as fh:
        json.dump(state.log, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"checkpoint: {ckpt}")
    return 0


def _print_new_epochs(state, start_epoch):
    for record in state.log:
        if record["epoch"] <= start_epoch:
            continue
        losses = " ".join(f"{k}={v:.5f}" for k, v in sorted(record["losses"].items()))
        teacher = f" teacher={record['teacher']}" if record.get("teacher") else ""
        print(f"epoch {record['epoch']:>4} lr={record['lr']:.2e} {losses}{teacher}")


def cmd_eval(args):
    payload = read_payload(args.checkpoint)
    network = build_sr_network(payload)
    if args.scale is not None and args.scale != network.scale:
        raise UsageError(
            f"checkpoint upsamples x{network.scale} but --scale {args.scale} was requested"
        )
    pairs = load_rgbd_pairs(args.data, args.format)
    if not pairs:
        raise UsageError(f"no RGB-D pairs found in {args.data}")
    names = [stem for stem, _, _ in scan_rgbd_dir(args.data, args.format)]
    scenes = [(name, depth) for name, (_, depth) in zip(names, pairs)]
    report = evaluate_scenes(
        scenes, network.scale, lambda d_lr: infer(d_lr, network), unit_scale=args.unit_scale
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, out / "report.json", out / "report.txt")
    cfg = TrainConfig(**payload["config"])
    _write_run_manifest(out, "eval", config_hash(cfg), cfg.seed)
    print(format_report(report), end="")
    return 0


def _read_depth_file(path):
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        arr = read_pfm(path).astype(np.float64)
    elif path.suffix.lower() == ".png":
        from PIL import Image

        arr = np.asarray(Image.open(path), dtype=np.float64)
        if arr.ndim != 2:
            raise UsageError(f"{path} is not a single-channel depth image")
        arr = arr / 65535.0
    else:
        raise UsageError(f"unsupported depth format {path.suffix!r} (use .png or .pfm)")
    if not np.all(np.isfinite(arr)):
        raise UsageError(f"{path} contains non-finite depth values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise UsageError(f"{path} holds values outside [0, 1]; normalize depth first")
    return arr


def cmd_infer(args):
    network = build_sr_network(read_payload(args.checkpoint))
    d_lr = _read_depth_file(args.input)
    t0 = time.perf_counter()
    hr = infer(d_lr, network)
    elapsed = time.perf_counter() - t0
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix.lower() == ".pfm":
        write_pfm(out, hr.data)
    elif out.suffix.lower() == ".png":
        write_depth_png16(out, hr.data * 65535.0)
    else:
        raise UsageError(f"unsupported output format {out.suffix!r} (use .png or .pfm)")
    payload = read_payload(args.checkpoint)
    cfg = TrainConfig(**payload["config"])
    _write_run_manifest(out.parent, "infer", config_hash(cfg), cfg.seed)
    print(f"wrote {out} ({hr.data.shape[1]}x{hr.data.shape[0]})")
    print(f"inference time: {elapsed:.3f} s")
    return 0


def build_parser():
    parser = _Parser(prog="depthsr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="cut RGB-D pairs into training shards")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("--patch-size", dest="patch_size", type=int, default=64)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("png16", "pfm"), default="png16")
    p.add_argument("--augment", action="store_true", help="add 180-degree rotated copies")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("make-toy", help="generate procedural RGB-D scenes")
    p.add_argument("--output", required=True)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("png16", "pfm"), default="png16")
    p.set_defaults(func=cmd_make_toy)

    p = sub.add_parser("train", help="run the two-step training loop")
    p.add_argument("--config")
    p.add_argument("--data", required=True, help="shard directory from `prepare`")
    p.add_argument("--out", required=True)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--ablate", action="append", choices=ABLATIONS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on full scenes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--scale", type=int)
    p.add_argument("--unit-scale", dest="unit_scale", type=float)
    p.add_argument("--format", choices=("png16", "pfm"), default="png16")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="super-resolve one LR depth map (no RGB)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="LR depth file (.png or .pfm)")
    p.add_argument("--output", required=True, help="HR depth file (.png or .pfm)")
    p.set_defaults(func=cmd_infer)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except TrainingDiverged as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2


if __name__ == "__main__":
    sys.exit(main())
