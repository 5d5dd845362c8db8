from .checkpoint import CheckpointError, load_checkpoint, read_payload, save_checkpoint
from .config import ConfigError, TrainConfig, config_hash, load_config, write_config
from .loop import (
    TrainingDiverged,
    TrainState,
    init_state,
    parameter_checksum,
    run_plain_dsr,
    run_step1,
    run_step2,
)
from .optim import Adam, adam_update, lr_at_epoch

__all__ = [
    "Adam",
    "CheckpointError",
    "ConfigError",
    "TrainConfig",
    "TrainState",
    "TrainingDiverged",
    "adam_update",
    "config_hash",
    "init_state",
    "load_checkpoint",
    "load_config",
    "lr_at_epoch",
    "parameter_checksum",
    "read_payload",
    "run_plain_dsr",
    "run_step1",
    "run_step2",
    "save_checkpoint",
    "write_config",
]
