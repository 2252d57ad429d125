"""Engine configuration: defaults plus optional YAML overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import ValidationError

PREICTAL_DEFINITIONS_MIN = (60, 45, 30, 15)


@dataclass(frozen=True)
class FilterConfig:
    low_hz: float = 0.5
    high_hz: float = 45.0
    order: int = 1690


@dataclass(frozen=True)
class CioprConfig:
    min_continuous_h: float = 2.5
    max_continuous_h: float = 10.0
    smooth_block_min: float = 8.0
    spc_run_blocks: int = 3
    spc_threshold: float = 0.99


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 20


@dataclass(frozen=True)
class EngineConfig:
    channels: tuple[str, ...] = ("C01", "C02")
    sample_rate_hz: float = 256.0
    epoch_s: float = 5.0
    filter: FilterConfig = field(default_factory=FilterConfig)
    preictal_definitions_min: tuple[int, ...] = PREICTAL_DEFINITIONS_MIN
    preictal_max_min: float = 60.0
    interictal_gap_pre_h: float = 4.0
    interictal_gap_post_h: float = 1.0
    min_preictal_min: float = 1.0
    oversample_overlap: float = 0.66
    continuity_tolerance_s: float = 1.0
    ciopr: CioprConfig = field(default_factory=CioprConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    loocv_runs: int = 4
    val_fraction: float = 0.1
    seed: int = 7


def _build(cls, data: dict):
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if dataclasses.is_dataclass(f.type) or f.name in ("filter", "ciopr", "train"):
            sub = {"filter": FilterConfig, "ciopr": CioprConfig, "train": TrainConfig}[f.name]
            value = _build(sub, value)
        elif f.name in ("channels", "preictal_definitions_min"):
            value = tuple(value)
        kwargs[f.name] = value
    unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return cls(**kwargs)


def load_config(path: str | Path | None) -> EngineConfig:
    """Load a YAML config file, falling back to defaults when path is None.

    A path that does not exist raises FileNotFoundError so the CLI can map
    it to an I/O failure rather than a validation failure.
    """
    if path is None:
        return EngineConfig()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValidationError(f"config root must be a mapping: {path}")
    return _build(EngineConfig, data)
