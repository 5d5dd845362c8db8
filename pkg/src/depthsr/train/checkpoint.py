"""Checkpoint save/load with atomic writes and strict validation.

A checkpoint holds everything needed to resume bit-exactly: the config, every
network's parameters, every optimizer's moment estimates and step counts, the
epoch counter, the recovery-error accumulators, the role history, and the
training log. Files are written to a temp path and renamed, so a crash never
leaves a half-written checkpoint behind.
"""

import os
import tempfile
from dataclasses import asdict

import torch

from ..fusion import UncertaintyConv
from ..models import DENet, DSRNet, SPNet
from .config import TrainConfig
from .loop import TrainState, _adam_for, _to_channels_last
from .optim import Adam

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _module_state(module):
    if module is None:
        return None
    return {k: v.detach().clone().contiguous() for k, v in module.state_dict().items()}


def save_checkpoint(state, path):
    config = state.config
    payload = {
        "format_version": FORMAT_VERSION,
        "header": {
            "scale": config.scale,
            "stage_count": config.stage_count,
            "channels": config.channels,
            "de_units_per_stage": config.de_units_per_stage,
            "spnet_width": config.spnet_width,
            "epoch": state.epoch,
            "role_history": [dict(r) for r in state.role_history],
        },
        "config": asdict(config),
        "models": {
            "dsrnet": _module_state(state.dsrnet),
            "denet": _module_state(state.denet),
            "spnet": _module_state(state.spnet),
            "u_sr": _module_state(state.u_sr),
            "u_de": _module_state(state.u_de),
        },
        "optim": {
            "dsr": state.opt_dsr.state_dict(),
            "de": state.opt_de.state_dict(),
            "sp": state.opt_sp.state_dict() if state.opt_sp is not None else None,
            "unc": state.opt_unc.state_dict() if state.opt_unc is not None else None,
        },
        "errors": {"e_dsr": state.e_dsr, "e_de": state.e_de},
        "log": list(state.log),
    }
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".ckpt.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            torch.save(payload, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_payload(path):
    """Load and structurally validate a checkpoint file."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: corrupted or not a checkpoint ({exc})")
    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has unsupported format "
            f"{payload.get('format_version') if isinstance(payload, dict) else type(payload).__name__}"
        )
    for key in ("header", "config", "models", "optim", "errors", "log"):
        if key not in payload:
            raise CheckpointError(f"checkpoint {path} is missing section {key!r}")
    return payload


def _load_module(module, saved, name):
    """Copy a saved state dict into a module, reporting every shape mismatch."""
    current = module.state_dict()
    problems = []
    for key, tensor in current.items():
        if key not in saved:
            problems.append(f"{name}.{key}: missing from checkpoint")
        elif tuple(saved[key].shape) != tuple(tensor.shape):
            problems.append(
                f"{name}.{key}: checkpoint {tuple(saved[key].shape)} vs model {tuple(tensor.shape)}"
            )
    for key in saved:
        if key not in current:
            problems.append(f"{name}.{key}: unexpected tensor in checkpoint")
    if problems:
        raise CheckpointError(
            "checkpoint does not match model architecture:\n  " + "\n  ".join(problems)
        )
    module.load_state_dict(saved)
    return module


def load_checkpoint(path):
    """Rebuild a TrainState exactly as saved."""
    payload = read_payload(path)
    try:
        config = TrainConfig(**payload["config"])
    except Exception as exc:
        raise CheckpointError(f"checkpoint {path} carries an invalid config: {exc}")

    dsrnet = _load_module(
        DSRNet(config.scale, config.stage_count, config.channels),
        payload["models"]["dsrnet"],
        "dsrnet",
    )
    denet = _load_module(
        DENet(config.stage_count, config.channels, config.de_units_per_stage),
        payload["models"]["denet"],
        "denet",
    )
    _to_channels_last(dsrnet)
    _to_channels_last(denet)
    state = TrainState(
        config=config,
        dsrnet=dsrnet,
        denet=denet,
        opt_dsr=_adam_for(config, dsrnet, "dsrnet"),
        opt_de=_adam_for(config, denet, "denet"),
    )
    state.opt_dsr.load_state_dict(payload["optim"]["dsr"])
    state.opt_de.load_state_dict(payload["optim"]["de"])

    if payload["models"]["spnet"] is not None:
        width = config.spnet_width if config.spnet_width else None
        state.spnet = _to_channels_last(
            _load_module(SPNet(2 * config.channels, width), payload["models"]["spnet"], "spnet")
        )
        state.u_sr = _load_module(UncertaintyConv(), payload["models"]["u_sr"], "u_sr")
        state.u_de = _load_module(UncertaintyConv(), payload["models"]["u_de"], "u_de")
        state.opt_sp = _adam_for(config, state.spnet, "spnet")
        state.opt_sp.load_state_dict(payload["optim"]["sp"])
        state.opt_unc = Adam(
            {
                **dict(state.u_sr.named_parameters(prefix="u_sr")),
                **dict(state.u_de.named_parameters(prefix="u_de")),
            },
            beta1=config.beta1,
            beta2=config.beta2,
            eps=config.epsilon,
        )
        state.opt_unc.load_state_dict(payload["optim"]["unc"])

    state.epoch = int(payload["header"]["epoch"])
    state.e_dsr = payload["errors"]["e_dsr"]
    state.e_de = payload["errors"]["e_de"]
    state.role_history = [dict(r) for r in payload["header"]["role_history"]]
    state.log = list(payload["log"])
    return state
