"""Training-loop contracts: role exchange, frozen teachers, resumability."""

import copy
import dataclasses
import math

import numpy as np
import pytest
import torch

from depthsr.data.patches import extract_patches
from depthsr.data.toy import make_toy_dataset
from depthsr.train import (
    CheckpointError,
    TrainConfig,
    TrainingDiverged,
    init_state,
    load_checkpoint,
    parameter_checksum,
    run_plain_dsr,
    run_step1,
    run_step2,
    save_checkpoint,
)
from depthsr.train.loop import epoch_batches


def tiny_config(**kwargs):
    base = dict(
        scale=4,
        stage_count=2,
        channels=8,
        de_units_per_stage=1,
        spnet_width=4,
        batch_size=6,
        step1_epochs=2,
        max_epochs=4,
        affinity_pool=4,
        seed=11,
    )
    base.update(kwargs)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def samples():
    pairs = make_toy_dataset(seed=5, count=2, size=48)
    return extract_patches(pairs, patch_size=16, count=12, scale=4, seed=3)


def checksums(state):
    out = {
        "dsr": parameter_checksum(state.dsrnet),
        "de": parameter_checksum(state.denet),
    }
    if state.spnet is not None:
        out["sp"] = parameter_checksum(state.spnet)
        out["u_sr"] = parameter_checksum(state.u_sr)
        out["u_de"] = parameter_checksum(state.u_de)
    return out


def test_step1_updates_both_networks_and_scores_them(samples):
    config = tiny_config()
    state = init_state(config)
    before = checksums(state)
    assert state.spnet is None

    state = run_step1(config, samples, state)
    after = checksums(state)
    assert after["dsr"] != before["dsr"]
    assert after["de"] != before["de"]
    assert state.spnet is None
    assert state.epoch == config.step1_epochs
    assert len(state.log) == config.step1_epochs
    assert state.e_dsr is not None and state.e_dsr > 0
    assert state.e_de is not None and state.e_de > 0
    # scores only accumulate on the closing epoch
    assert state.log[0]["e_dsr"] is None
    assert state.log[-1]["e_dsr"] == state.e_dsr


def test_step1_dsr_stream_is_independent_of_the_other_network(samples):
    a = run_step1(tiny_config(), samples)
    b = run_step1(tiny_config(de_units_per_stage=2), samples)
    assert parameter_checksum(a.dsrnet) == parameter_checksum(b.dsrnet)
    assert parameter_checksum(a.denet) != parameter_checksum(b.denet)


def test_step2_freezes_teacher_and_trains_student(samples):
    config = tiny_config()
    state = run_step1(config, samples)

    frozen = copy.deepcopy(state)
    frozen.e_dsr, frozen.e_de = 0.1, 0.2  # lower error -> teacher
    from depthsr.train.loop import _ensure_step2_modules

    _ensure_step2_modules(frozen, config)
    before = checksums(frozen)
    one_epoch = dataclasses.replace(config, max_epochs=config.step1_epochs + 1)
    frozen = run_step2(frozen, one_epoch, samples)
    after = checksums(frozen)

    assert frozen.role_history == [
        {"epoch": config.step1_epochs + 1, "e_dsr": 0.1, "e_de": 0.2, "teacher": "dsr"}
    ]
    assert after["dsr"] == before["dsr"]  # teacher untouched all epoch
    assert after["de"] != before["de"]
    assert after["sp"] != before["sp"]
    assert after["u_sr"] != before["u_sr"]
    assert after["u_de"] != before["u_de"]
    # fresh scores replace the ones that drove the decision
    assert frozen.e_dsr != 0.1 and frozen.e_de != 0.2
    assert frozen.log[-1]["student"] == "de"


def test_step2_tie_makes_sr_network_the_teacher(samples):
    config = tiny_config()
    state = run_step1(config, samples)
    state.e_dsr = state.e_de = 0.15
    state = run_step2(state, dataclasses.replace(config, max_epochs=3), samples)
    assert state.role_history[0]["teacher"] == "dsr"


def test_step2_roles_can_flip_between_epochs(samples):
    config = tiny_config()
    state = run_step1(config, samples)
    sp_hashes = []
    for epoch, student in [(3, "dsr"), (4, "de")]:
        state = run_step2(
            state, dataclasses.replace(config, max_epochs=epoch), samples, force_student=student
        )
        sp_hashes.append(parameter_checksum(state.spnet))
    # structure predictor and gates move every epoch no matter who is student
    assert len(set(sp_hashes)) == 2
    assert [r["teacher"] for r in state.role_history] == ["de", "dsr"]


def test_step2_requires_completed_step1(samples):
    config = tiny_config()
    state = init_state(config)
    with pytest.raises(ValueError, match="step 1"):
        run_step2(state, config, samples)


def test_zero_weighted_guidance_matches_plain_training(samples):
    """With both auxiliary weights at zero and the SR network pinned as student,
    step-2 updates must reproduce plain task-loss training."""
    config = tiny_config(weights={"rho1": 0.0, "rho2": 0.0})
    state = run_step1(config, samples)
    twin = copy.deepcopy(state)

    state = run_step2(state, config, samples, force_student="dsr")
    twin = run_plain_dsr(twin, config, samples, until_epoch=config.max_epochs)

    step2_losses = [r["losses"]["task"] for r in state.log if r["step"] == 2]
    plain_losses = [r["losses"]["l_dsr"] for r in twin.log if r["step"] == "plain"]
    assert len(step2_losses) == len(plain_losses) == 2
    np.testing.assert_allclose(step2_losses, plain_losses, atol=1e-6)
    for (na, pa), (nb, pb) in zip(
        sorted(state.dsrnet.named_parameters()), sorted(twin.dsrnet.named_parameters())
    ):
        assert na == nb
        assert (pa - pb).abs().max().item() <= 1e-6


def test_full_run_is_deterministic(samples):
    def full_run():
        config = tiny_config()
        state = run_step1(config, samples)
        return run_step2(state, config, samples)

    a, b = full_run(), full_run()
    assert checksums(a) == checksums(b)
    assert a.role_history == b.role_history
    assert [r["losses"] for r in a.log] == [r["losses"] for r in b.log]


def test_logged_scores_match_offline_recomputation(samples):
    # one batch per epoch, so the logged running means equal a single forward
    # pass with the parameters the epoch started from
    config = tiny_config(batch_size=32, max_epochs=3)
    state = run_step1(config, samples)
    snapshot = copy.deepcopy(state)

    state = run_step2(state, config, samples)
    logged = state.log[-1]

    from depthsr.train.loop import _Stacked

    tensors = _Stacked(samples, config.scale)
    idx = epoch_batches(len(tensors), config.batch_size, config.seed, 3)
    assert len(idx) == 1
    d_lr, d_hr, rgb, _ = tensors.batch(idx[0])
    with torch.no_grad():
        e_dsr = float((snapshot.dsrnet(d_lr).final_output - d_hr).abs().mean())
        e_de = float((snapshot.denet(rgb).final_output - d_hr).abs().mean())
    assert math.isclose(logged["e_dsr"], e_dsr, rel_tol=1e-6)
    assert math.isclose(logged["e_de"], e_de, rel_tol=1e-6)


def test_divergence_aborts_with_location(samples):
    config = tiny_config()
    state = init_state(config)
    with torch.no_grad():
        next(state.dsrnet.parameters()).fill_(float("nan"))
    with pytest.raises(TrainingDiverged) as err:
        run_step1(config, samples, state)
    assert err.value.epoch == 1
    assert err.value.batch == 0
    assert not math.isfinite(err.value.components["l_dsr"])


def test_role_decisions_use_previous_epoch_errors(samples):
    config = tiny_config(step1_epochs=2, max_epochs=4)
    state = run_step1(config, samples)
    e_dsr_1, e_de_1 = state.e_dsr, state.e_de

    state = run_step2(state, config, samples)
    history = state.role_history
    step2_logs = [r for r in state.log if r["step"] == 2]
    assert len(history) == len(step2_logs) == 2

    # first decision reads the step-1 final-epoch accumulators, the next one
    # reads the errors accumulated while the previous epoch trained
    assert history[0]["e_dsr"] == e_dsr_1 and history[0]["e_de"] == e_de_1
    assert history[1]["e_dsr"] == step2_logs[0]["e_dsr"]
    assert history[1]["e_de"] == step2_logs[0]["e_de"]
    for rec in history:
        expected = "dsr" if rec["e_dsr"] <= rec["e_de"] else "de"
        assert rec["teacher"] == expected


def test_step1_errors_accumulate_during_final_epoch(samples):
    # one batch per epoch: the running means over the final epoch equal a
    # single forward pass with the parameters that epoch started from
    config = tiny_config(batch_size=32, step1_epochs=1, max_epochs=9)
    state = run_step1(config, samples)
    snapshot = copy.deepcopy(state)
    state = run_step1(dataclasses.replace(config, step1_epochs=2), samples, state)

    from depthsr.train.loop import _Stacked

    tensors = _Stacked(samples, config.scale)
    idx = epoch_batches(len(tensors), config.batch_size, config.seed, 2)
    assert len(idx) == 1
    d_lr, d_hr, rgb, _ = tensors.batch(idx[0])
    with torch.no_grad():
        e_dsr = float((snapshot.dsrnet(d_lr).final_output - d_hr).abs().mean())
        e_de = float((snapshot.denet(rgb).final_output - d_hr).abs().mean())
    assert math.isclose(state.e_dsr, e_dsr, rel_tol=1e-6)
    assert math.isclose(state.e_de, e_de, rel_tol=1e-6)


def test_batch_order_depends_on_seed_and_epoch():
    a = [t.numpy() for t in epoch_batches(20, 8, seed=1, epoch=1)]
    b = [t.numpy() for t in epoch_batches(20, 8, seed=1, epoch=1)]
    c = [t.numpy() for t in epoch_batches(20, 8, seed=1, epoch=2)]
    d = [t.numpy() for t in epoch_batches(20, 8, seed=2, epoch=1)]
    assert [x.tolist() for x in a] == [x.tolist() for x in b]
    assert [x.tolist() for x in a] != [x.tolist() for x in c]
    assert [x.tolist() for x in a] != [x.tolist() for x in d]
    assert sorted(np.concatenate(a).tolist()) == list(range(20))
    assert [len(x) for x in a] == [8, 8, 4]


def test_checkpoint_round_trip_and_exact_resume(samples, tmp_path):
    config = tiny_config(max_epochs=4)
    state = run_step1(config, samples)
    state = run_step2(state, dataclasses.replace(config, max_epochs=3), samples)
    path = tmp_path / "mid.ckpt"
    save_checkpoint(state, path)

    loaded = load_checkpoint(path)
    assert checksums(loaded) == checksums(state)
    assert loaded.epoch == state.epoch
    assert loaded.e_dsr == state.e_dsr and loaded.e_de == state.e_de
    assert loaded.role_history == state.role_history
    assert loaded.log == state.log
    for name in ("opt_dsr", "opt_de", "opt_sp", "opt_unc"):
        a = getattr(state, name).state_dict()
        b = getattr(loaded, name).state_dict()
        assert a["state"].keys() == b["state"].keys()
        for key, st in a["state"].items():
            assert st["step"] == b["state"][key]["step"]
            assert torch.equal(st["m"], b["state"][key]["m"])
            assert torch.equal(st["v"], b["state"][key]["v"])

    finished = run_step2(state, config, samples)
    resumed = run_step2(loaded, config, samples)
    assert checksums(finished) == checksums(resumed)
    assert finished.role_history == resumed.role_history


def test_checkpoint_rejects_corruption(samples, tmp_path):
    garbage = tmp_path / "bad.ckpt"
    garbage.write_bytes(b"not a checkpoint at all")
    with pytest.raises(CheckpointError, match="corrupted|format"):
        load_checkpoint(garbage)

    config = tiny_config()
    state = run_step1(config, samples)
    path = tmp_path / "good.ckpt"
    save_checkpoint(state, path)
    blob = path.read_bytes()
    truncated = tmp_path / "cut.ckpt"
    truncated.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(CheckpointError):
        load_checkpoint(truncated)


def test_checkpoint_reports_architecture_mismatch(samples, tmp_path):
    config = tiny_config()
    state = run_step1(config, samples)
    path = tmp_path / "a.ckpt"
    save_checkpoint(state, path)

    payload = torch.load(path, weights_only=True)
    payload["config"]["stage_count"] = 1
    payload["header"]["stage_count"] = 1
    hacked = tmp_path / "b.ckpt"
    torch.save(payload, hacked)
    with pytest.raises(CheckpointError) as err:
        load_checkpoint(hacked)
    assert "dsrnet.up_blocks.1" in str(err.value)


def test_checkpoint_write_is_atomic(samples, tmp_path):
    config = tiny_config(step1_epochs=1, max_epochs=2)
    state = run_step1(config, samples)
    path = tmp_path / "ck" / "run.ckpt"
    save_checkpoint(state, path)
    first = path.read_bytes()
    save_checkpoint(state, path)  # overwrite in place
    assert path.read_bytes() == first
    leftovers = [p for p in path.parent.iterdir() if p.suffix == ".tmp"]
    assert leftovers == []
