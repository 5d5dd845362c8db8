"""Directional ablation on procedural scenes: how much does each piece buy?

All variants of one seed share the same step-1 pre-training (the SR stream is
independent of everything a variant later toggles), then branch:

  baseline         task-loss-only continuation, no guidance at all
  output           + output-space distillation
  output_affinity  + affinity-space distillation
  full             + structure supervision through uncertainty-weighted fusion

Scores are mean test MAD (normalized units) over held-out scenes, reduced to
a per-variant median across seeds.
"""

import copy
import statistics
from dataclasses import replace

from ..data.patches import extract_patches
from ..data.resize import bicubic_downsample
from ..data.toy import make_toy_dataset
from ..evaluate import crop_for_scale
from ..inference import infer
from ..metrics import mad_metric
from .config import TrainConfig
from .loop import (
    FrozenTeacherCache,
    _Stacked,
    parameter_checksum,
    run_plain_dsr,
    run_step1,
    run_step2,
)

VARIANTS = ("baseline", "output", "output_affinity", "full")


def variant_config(config, variant):
    """Step-2 settings for one ablation rung."""
    no_struct = replace(config.weights, rho1=0.0)
    if variant == "output":
        return replace(
            config, use_affinity_distill=False, use_structure=False, weights=no_struct
        )
    if variant == "output_affinity":
        return replace(config, use_structure=False, weights=no_struct)
    if variant == "full":
        return config
    raise ValueError(f"unknown variant {variant!r}")


def test_mad(state, eval_scenes, scale):
    """Mean MAD of the SR network over held-out scenes, normalized units."""
    scores = []
    for depth in eval_scenes:
        gt = crop_for_scale(depth, scale)
        pred = infer(bicubic_downsample(gt, scale), state.dsrnet)
        scores.append(mad_metric(pred, gt, 1.0))
    return float(statistics.mean(scores))


def toy_training_setup(
    seed,
    n_patches=500,
    patch_size=64,
    n_train_scenes=10,
    n_eval_scenes=6,
    scene_size=128,
    config=None,
):
    """Deterministic data + config for one toy training seed."""
    scenes = make_toy_dataset(seed, n_train_scenes + n_eval_scenes, scene_size)
    train_pairs = scenes[:n_train_scenes]
    eval_scenes = [depth for _, depth in scenes[n_train_scenes:]]
    if config is None:
        config = TrainConfig.toy(seed=seed)
    samples = extract_patches(train_pairs, patch_size, n_patches, config.scale, seed)
    return config, samples, eval_scenes


def run_seed(seed, variants=VARIANTS, **kwargs):
    """Train every variant for one seed from a shared step-1 prefix."""
    config, samples, eval_scenes = toy_training_setup(seed, **kwargs)
    stacked = _Stacked.wrap(samples, config.scale)

    shared = run_step1(config, stacked)
    result = {"seed": seed, "mad": {}, "role_history": {}, "checksums": {}}
    cache = FrozenTeacherCache()  # variants share the step-1 teacher endpoint
    for variant in variants:
        state = copy.deepcopy(shared)
        if variant == "baseline":
            state = run_plain_dsr(state, config, samples, config.max_epochs)
        else:
            state = run_step2(
                state, variant_config(config, variant), samples, teacher_cache=cache
            )
        result["mad"][variant] = test_mad(state, eval_scenes, config.scale)
        result["role_history"][variant] = list(state.role_history)
        checks = {"dsrnet": parameter_checksum(state.dsrnet), "denet": parameter_checksum(state.denet)}
        if state.spnet is not None:
            checks["spnet"] = parameter_checksum(state.spnet)
            checks["u_sr"] = parameter_checksum(state.u_sr)
            checks["u_de"] = parameter_checksum(state.u_de)
        result["checksums"][variant] = checks
    return result


def run_toy_ablation(seeds, **kwargs):
    """Run every seed and reduce to per-variant medians."""
    variants = kwargs.get("variants", VARIANTS)
    per_seed = [run_seed(seed, **kwargs) for seed in seeds]
    median = {
        variant: float(statistics.median(r["mad"][variant] for r in per_seed))
        for variant in variants
    }
    return {"per_seed": per_seed, "median": median}
