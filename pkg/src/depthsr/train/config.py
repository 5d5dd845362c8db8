"""Training configuration: defaults, INI round trip, all-at-once validation."""

import configparser
import hashlib
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..losses import LossWeights
from ..types import SUPPORTED_SCALES


class ConfigError(ValueError):
    """Carries every validation problem found, not just the first."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


_INT_KEYS = {
    "scale", "stage_count", "channels", "de_units_per_stage", "spnet_width",
    "batch_size", "step1_epochs", "max_epochs", "lr_decay_period", "seed",
    "affinity_pool",
}
_FLOAT_KEYS = {
    "initial_lr", "lr_decay_factor", "beta1", "beta2", "epsilon", "momentum",
    "gamma", "lam", "rho1", "rho2",
}
_BOOL_KEYS = {"use_output_distill", "use_affinity_distill", "use_structure"}
_WEIGHT_KEYS = {"gamma", "lam", "rho1", "rho2"}

_SECTION_OF = {
    "scale": "model", "stage_count": "model", "channels": "model",
    "de_units_per_stage": "model", "spnet_width": "model",
    "batch_size": "train", "step1_epochs": "train", "max_epochs": "train",
    "seed": "train",
    "initial_lr": "optim", "lr_decay_factor": "optim", "lr_decay_period": "optim",
    "beta1": "optim", "beta2": "optim", "epsilon": "optim",
    "gamma": "loss", "lam": "loss", "rho1": "loss", "rho2": "loss",
    "affinity_pool": "loss",
    "use_output_distill": "ablation", "use_affinity_distill": "ablation",
    "use_structure": "ablation",
}


@dataclass
class TrainConfig:
    scale: int = 4
    stage_count: int = 5
    channels: int = 32
    de_units_per_stage: int = 4
    spnet_width: int = 0  # 0 = derive from channel width
    batch_size: int = 8
    step1_epochs: int = 100
    max_epochs: int = 200
    initial_lr: float = 1e-3
    lr_decay_factor: float = 0.1
    lr_decay_period: int = 50
    beta1: float = 0.9
    beta2: float = 0.99
    epsilon: float = 1e-8
    seed: int = 0
    affinity_pool: int = 32
    weights: LossWeights = field(default_factory=LossWeights)
    use_output_distill: bool = True
    use_affinity_distill: bool = True
    use_structure: bool = True

    def __post_init__(self):
        problems = []
        if self.scale not in SUPPORTED_SCALES:
            problems.append(f"unsupported scale {self.scale}; supported: {SUPPORTED_SCALES}")
        for name, minimum in [
            ("stage_count", 1), ("channels", 1), ("de_units_per_stage", 1),
            ("batch_size", 1), ("lr_decay_period", 1), ("affinity_pool", 1),
        ]:
            if getattr(self, name) < minimum:
                problems.append(f"{name} must be >= {minimum}, got {getattr(self, name)}")
        if self.spnet_width < 0:
            problems.append(f"spnet_width must be >= 0 (0 = auto), got {self.spnet_width}")
        if self.step1_epochs < 0:
            problems.append(f"step1_epochs must be >= 0, got {self.step1_epochs}")
        if not self.step1_epochs < self.max_epochs:
            problems.append(
                f"step1_epochs ({self.step1_epochs}) must be < max_epochs ({self.max_epochs})"
            )
        if not self.initial_lr > 0:
            problems.append(f"initial_lr must be > 0, got {self.initial_lr}")
        if not 0 < self.lr_decay_factor <= 1:
            problems.append(f"lr_decay_factor must be in (0, 1], got {self.lr_decay_factor}")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                problems.append(f"{name} must be in [0, 1), got {v}")
        if not self.epsilon > 0:
            problems.append(f"epsilon must be > 0, got {self.epsilon}")
        try:
            if isinstance(self.weights, dict):
                self.weights = LossWeights(**self.weights)
            else:
                LossWeights(**asdict(self.weights))
        except ValueError as exc:
            problems.append(str(exc))
        if problems:
            raise ConfigError(problems)

    @classmethod
    def toy(cls, seed=0, **kwargs):
        """Desk-scale settings: small networks, 30 + 30 epochs, x4."""
        base = dict(
            scale=4, stage_count=2, channels=16, de_units_per_stage=1,
            spnet_width=8, batch_size=16, step1_epochs=30, max_epochs=60,
            affinity_pool=16, lr_decay_period=45, seed=seed,
        )
        base.update(kwargs)
        return cls(**base)


def _coerce(key, raw, problems):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
    except ValueError as exc:
        problems.append(f"{key}: {exc}")
        return None
    problems.append(f"unknown configuration key {key!r}")
    return None


def config_from_items(items):
    """Build a TrainConfig from (key, value-string) pairs, reporting all errors."""
    problems = []
    values = {}
    momentum = None
    for key, raw in items:
        key = key.strip().lower()
        if key == "momentum":
            momentum = _coerce(key, raw, problems)
            continue
        v = _coerce(key, raw, problems)
        if v is not None:
            values[key] = v
    if momentum is not None:
        beta1 = values.get("beta1")
        if beta1 is not None and abs(beta1 - momentum) > 1e-12:
            problems.append(f"momentum ({momentum}) contradicts beta1 ({beta1}); they are aliases")
        else:
            values.setdefault("beta1", momentum)
    weight_kwargs = {k: values.pop(k) for k in list(values) if k in _WEIGHT_KEYS}
    if problems:
        raise ConfigError(problems)
    try:
        return TrainConfig(weights=LossWeights(**weight_kwargs), **values)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError([str(exc)])


def _resolved_key(key):
    key = key.strip().lower()
    return "beta1" if key == "momentum" else key


def load_config(path, overrides=()):
    """Parse a sectioned key=value file; `overrides` are (key, value) pairs that win.

    An override shadows the file's entry for the same knob (momentum and beta1
    count as one knob), so only contradictions within a single source error.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError([f"cannot read config file {path}"])
    overrides = list(overrides)
    shadowed = {_resolved_key(k) for k, _ in overrides}
    items = []
    for section in parser.sections():
        for key, raw in parser.items(section):
            if _resolved_key(key) not in shadowed:
                items.append((key, raw))
    items.extend(overrides)
    return config_from_items(items)


def write_config(config, path):
    parser = configparser.ConfigParser()
    flat = asdict(config)
    weights = flat.pop("weights")
    flat.update(weights)
    for key, value in flat.items():
        section = _SECTION_OF[key]
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, repr(value) if isinstance(value, float) else str(value))
    with open(path, "w") as fh:
        parser.write(fh)


def config_hash(config):
    """Stable digest of every field, for run manifests."""
    flat = asdict(config)
    weights = flat.pop("weights")
    flat.update(weights)
    blob = ";".join(f"{k}={flat[k]!r}" for k in sorted(flat))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
