"""Architecture contracts: shapes, stage counts, determinism, init behavior."""

import numpy as np
import pytest
import torch
import torch.nn as nn

from depthsr.models import DENet, DSRNet, FeatureStack, SPNet, SideOutputHead, derive_seed, init_params


def test_dsrnet_shapes_across_scales():
    for scale, lr in [(2, 16), (4, 8), (8, 4), (16, 2)]:
        net = init_params(DSRNet(scale, stages=2, channels=8), derive_seed(0, f"dsr{scale}"))
        out = net(torch.randn(2, 1, lr, lr))
        hr = lr * scale
        assert out.final_output.shape == (2, 1, hr, hr)
        assert len(out.features) == 2 and len(out.side_outputs) == 2
        for f in out.features:
            assert f.shape == (2, 8, hr, hr)
        for s in out.side_outputs:
            assert s.shape == (2, 1, hr, hr)
        out.validate(2)


def test_dsrnet_unsupported_scale():
    with pytest.raises(ValueError, match="[Uu]nsupported scale"):
        DSRNet(3)


def test_dsrnet_rejects_multichannel_input():
    net = DSRNet(4, stages=1, channels=4)
    with pytest.raises(ValueError, match="B, 1"):
        net(torch.randn(1, 3, 8, 8))


def test_zero_final_layer_gives_bias_map():
    net = init_params(DSRNet(4, stages=2, channels=8), derive_seed(1, "dsr"))
    with torch.no_grad():
        net.reconstruct[-1].weight.zero_()
        net.reconstruct[-1].bias.fill_(0.3)
    out = net(torch.rand(1, 1, 8, 8))
    assert torch.allclose(out.final_output, torch.full_like(out.final_output, 0.3))


def test_forward_deterministic():
    net = init_params(DSRNet(4, stages=2, channels=8), derive_seed(2, "dsr"))
    x = torch.rand(1, 1, 8, 8)
    a = net(x)
    b = net(x)
    assert torch.equal(a.final_output, b.final_output)
    for fa, fb in zip(a.features, b.features):
        assert torch.equal(fa, fb)


def test_init_seeding():
    net_a = init_params(DSRNet(4, stages=1, channels=4), derive_seed(7, "dsr"))
    net_b = init_params(DSRNet(4, stages=1, channels=4), derive_seed(7, "dsr"))
    net_c = init_params(DSRNet(4, stages=1, channels=4), derive_seed(8, "dsr"))
    for (na, pa), (_, pb), (_, pc) in zip(
        net_a.named_parameters(), net_b.named_parameters(), net_c.named_parameters()
    ):
        assert torch.equal(pa, pb), na
    assert any(
        not torch.equal(pa, pc)
        for (_, pa), (_, pc) in zip(net_a.named_parameters(), net_c.named_parameters())
    )
    for name, p in net_a.named_parameters():
        if name.endswith("bias"):
            assert torch.equal(p, torch.zeros_like(p))
        assert torch.isfinite(p).all()


def test_denet_shapes_and_channel_check():
    net = init_params(DENet(stages=3, channels=8, units_per_stage=2), derive_seed(0, "de"))
    out = net(torch.rand(2, 3, 16, 16))
    assert out.final_output.shape == (2, 1, 16, 16)
    assert len(out.features) == 3
    assert all(f.shape == (2, 8, 16, 16) for f in out.features)
    out.validate(3)
    with pytest.raises(ValueError, match="B, 3"):
        net(torch.rand(1, 1, 16, 16))


def test_denet_zero_rgb_zero_output_layer():
    net = init_params(DENet(stages=2, channels=8, units_per_stage=2), derive_seed(1, "de"))
    with torch.no_grad():
        net.reconstruct[-1].weight.zero_()
        net.reconstruct[-1].bias.zero_()
    out = net(torch.zeros(1, 3, 16, 16))
    assert torch.equal(out.final_output, torch.zeros_like(out.final_output))


def test_paired_networks_share_hr_geometry():
    dsr = init_params(DSRNet(4, stages=2, channels=8), derive_seed(3, "dsr"))
    de = init_params(DENet(stages=2, channels=8, units_per_stage=2), derive_seed(3, "de"))
    sr = dsr(torch.rand(1, 1, 8, 8))
    dd = de(torch.rand(1, 3, 32, 32))
    for a, b in zip(sr.features, dd.features):
        assert a.shape == b.shape
    for a, b in zip(sr.side_outputs, dd.side_outputs):
        assert a.shape == b.shape
    assert sr.final_output.shape == dd.final_output.shape


def test_spnet_layer_inventory_and_shapes():
    net = init_params(SPNet(16), derive_seed(0, "sp"))
    convs = [m for m in net.modules() if isinstance(m, nn.Conv2d)]
    assert len(convs) == 6
    relus = [m for m in net.modules() if isinstance(m, nn.ReLU)]
    assert len(relus) == 5
    out = net(torch.rand(2, 16, 12, 12))
    assert out.shape == (2, 1, 12, 12)
    with pytest.raises(ValueError, match="16"):
        net(torch.rand(1, 8, 12, 12))


def test_spnet_zero_input_zero_bias_gives_zero():
    net = init_params(SPNet(8), derive_seed(1, "sp"))
    out = net(torch.zeros(1, 8, 10, 10))
    assert torch.equal(out, torch.zeros_like(out))


def test_side_head_shape_and_zero_behavior():
    head = init_params(SideOutputHead(32), derive_seed(0, "head"))
    out = head(torch.rand(1, 32, 8, 8))
    assert out.shape == (1, 1, 8, 8)
    zero_head = SideOutputHead(32)
    with torch.no_grad():
        for p in zero_head.parameters():
            p.zero_()
    assert torch.equal(zero_head(torch.zeros(1, 32, 8, 8)), torch.zeros(1, 1, 8, 8))


def test_side_head_uses_every_input_channel():
    # finite-difference probe: bumping any one channel changes the output
    head = init_params(SideOutputHead(8), derive_seed(4, "head")).double()
    x = torch.rand(1, 8, 6, 6, dtype=torch.float64)
    base = head(x)
    for c in range(8):
        bumped = x.clone()
        bumped[:, c] += 0.05
        delta = (head(bumped) - base).abs().max().item()
        assert delta > 1e-8, f"channel {c} has no influence"


def test_feature_stack_validation_catches_mismatch():
    t = torch.zeros(1, 1, 8, 8)
    stack = FeatureStack([torch.zeros(1, 4, 8, 8)], [t], t)
    with pytest.raises(ValueError, match="expected 2"):
        stack.validate(2)
    bad = FeatureStack([torch.zeros(1, 4, 4, 4)], [t], t)
    with pytest.raises(ValueError, match="HR size"):
        bad.validate(1)
