"""Depth-only inference and the evaluation report."""

import numpy as np
import pytest
import torch

from depthsr.data.toy import generate_toy_scene
from depthsr.evaluate import crop_for_scale, evaluate_scenes, format_report
from depthsr.inference import infer, load_sr_network
from depthsr.train import TrainConfig, init_state, save_checkpoint
from depthsr.types import DepthMap


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    config = TrainConfig(
        scale=4, stage_count=2, channels=8, de_units_per_stage=1,
        step1_epochs=1, max_epochs=2, seed=7,
    )
    path = tmp_path_factory.mktemp("ckpt") / "net.ckpt"
    save_checkpoint(init_state(config), path)
    return path


def test_infer_shape_units_and_range(checkpoint):
    net = load_sr_network(checkpoint)
    d_lr = DepthMap(np.random.default_rng(0).uniform(0.2, 0.8, (16, 16)), unit_scale=512.0)
    out = infer(d_lr, net)
    assert isinstance(out, DepthMap)
    assert out.data.shape == (64, 64)
    assert out.unit_scale == 512.0
    assert float(out.data.min()) >= 0.0 and float(out.data.max()) <= 1.0


def test_infer_is_deterministic(checkpoint):
    net = load_sr_network(checkpoint)
    d_lr = np.random.default_rng(1).uniform(0.0, 1.0, (12, 20))
    a = infer(d_lr, net)
    b = infer(d_lr, net)
    assert np.array_equal(a.data, b.data)


def test_infer_scale_expectation(checkpoint):
    net = load_sr_network(checkpoint)
    with pytest.raises(ValueError, match="x4"):
        infer(np.full((8, 8), 0.5), net, expected_scale=8)


def test_inference_ignores_guidance_parameters(checkpoint, tmp_path):
    """Stripping every non-SR network from the checkpoint leaves output bytes
    unchanged — test-time operation uses LR depth and SR weights only."""
    net = load_sr_network(checkpoint)
    d_lr = np.random.default_rng(2).uniform(0.0, 1.0, (16, 16))
    full = infer(d_lr, net)

    payload = torch.load(checkpoint, weights_only=True)
    for key in ("denet", "spnet", "u_sr", "u_de"):
        payload["models"][key] = None
    for key in ("de", "sp", "unc"):
        payload["optim"][key] = None
    stripped_path = tmp_path / "stripped.ckpt"
    torch.save(payload, stripped_path)

    stripped = infer(d_lr, load_sr_network(stripped_path))
    assert full.data.tobytes() == stripped.data.tobytes()


def test_crop_for_scale():
    d = DepthMap(np.random.default_rng(3).uniform(0, 1, (10, 13)), unit_scale=2.0)
    c = crop_for_scale(d, 4)
    assert c.data.shape == (8, 12)
    assert np.array_equal(c.data, d.data[:8, :12])
    assert c.unit_scale == 2.0
    exact = DepthMap(np.zeros((8, 8)))
    assert crop_for_scale(exact, 4) is exact
    with pytest.raises(ValueError, match="smaller"):
        crop_for_scale(DepthMap(np.zeros((3, 40))), 4)


def test_identity_model_scores_zero_and_baseline_does_not():
    _, depth = generate_toy_scene(seed=9, size=64)
    scenes = [("scene", depth)]
    crops = iter([crop_for_scale(depth, 4)])
    report = evaluate_scenes(scenes, 4, lambda d_lr: next(crops))
    row = report["rows"][0]
    assert row["mad"] == 0.0 and row["rmse"] == 0.0
    assert row["bicubic_mad"] > 0.0 and row["bicubic_rmse"] > 0.0
    assert report["mean"]["mad"] == 0.0


def test_report_mean_row_and_layout():
    rng = np.random.default_rng(4)
    scenes = [(f"s{i}", DepthMap(rng.uniform(0, 1, (16, 16)))) for i in range(3)]
    noisy = lambda d_lr: DepthMap(
        np.clip(bicubic_ref_up(d_lr.data) + 0.01, 0, 1), unit_scale=d_lr.unit_scale
    )
    report = evaluate_scenes(scenes, 2, noisy)
    assert [r["scene"] for r in report["rows"]] == ["s0", "s1", "s2"]
    for key in ("mad", "rmse", "bicubic_mad", "bicubic_rmse"):
        assert report["mean"][key] == pytest.approx(
            np.mean([r[key] for r in report["rows"]])
        )
    text = format_report(report)
    lines = text.strip().splitlines()
    assert lines[0].startswith("x2")
    assert [l.split()[0] for l in lines[2:]] == ["s0", "s1", "s2", "mean", "bicubic"]


def bicubic_ref_up(arr):
    from depthsr.data.resize import bicubic_upsample

    return bicubic_upsample(arr, 2)


def test_native_unit_override():
    rng = np.random.default_rng(5)
    scenes = [("a", DepthMap(rng.uniform(0, 1, (12, 12)), unit_scale=1.0))]
    biased = lambda d_lr: DepthMap(
        np.clip(bicubic_ref_up(d_lr.data), 0, 1), unit_scale=d_lr.unit_scale
    )
    plain = evaluate_scenes(scenes, 2, biased)
    scaled = evaluate_scenes(scenes, 2, biased, unit_scale=1000.0)
    assert scaled["rows"][0]["mad"] == pytest.approx(plain["rows"][0]["mad"] * 1000.0)


def test_empty_scene_list_rejected():
    with pytest.raises(ValueError, match="no scenes"):
        evaluate_scenes([], 4, lambda d: d)
