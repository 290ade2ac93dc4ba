"""Run configuration: YAML file -> validated dataclasses -> YAML round trip.

Section names mirror the modules (world, gains, training, harness, dexterity,
paths). Every field has a default; unknown keys are rejected; range errors
name the offending key. Flags override file values, which override defaults.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields

import yaml

from .control import Gains
from .dexterity import CornerGeometry
from .errors import ConfigError
from .harness import HarnessConfig
from .learning import TrainConfig
from .world import WorldConfig


@dataclass
class Paths:
    out_dir: str = "out"

    @property
    def data_dir(self) -> str:
        return os.path.join(self.out_dir, "data")

    @property
    def model_dir(self) -> str:
        return os.path.join(self.out_dir, "models")

    @property
    def report_dir(self) -> str:
        return os.path.join(self.out_dir, "reports")


@dataclass
class RunConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    gains: Gains = field(default_factory=Gains)
    training: TrainConfig = field(default_factory=TrainConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    dexterity: CornerGeometry = field(default_factory=CornerGeometry)
    paths: Paths = field(default_factory=Paths)

    def validate(self) -> "RunConfig":
        try:
            self.world.validate()
            self.gains.validate()
            self.training.validate()
            self.harness.validate()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return self


_SECTIONS = {
    "world": WorldConfig,
    "gains": Gains,
    "training": TrainConfig,
    "harness": HarnessConfig,
    "dexterity": CornerGeometry,
    "paths": Paths,
}

_TUPLE_FIELDS = {("harness", "speeds")}


def _coerce(section: str, name: str, value, target_type):
    if (section, name) in _TUPLE_FIELDS:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{section}.{name}: expected a list")
        return tuple(float(v) for v in value)
    if target_type is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{name}: expected an integer")
        return value
    if target_type is str and isinstance(value, str):
        return value
    if isinstance(value, target_type) and not isinstance(value, bool):
        return value
    raise ConfigError(f"{section}.{name}: expected {target_type.__name__}")


def parse_config(path: str | None) -> RunConfig:
    """Load and validate; empty or missing-section files fall back to defaults."""
    raw = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            try:
                raw = yaml.safe_load(fh) or {}
            except yaml.YAMLError as e:
                raise ConfigError(f"config parse error in {path}: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"config root must be a mapping in {path}")
    cfg = RunConfig()
    for section, content in raw.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown key: {section}")
        if content is None:
            continue
        if not isinstance(content, dict):
            raise ConfigError(f"{section}: expected a mapping")
        target = getattr(cfg, section)
        ftypes = {f.name: type(getattr(target, f.name)) for f in fields(target)}
        updates = {}
        for name, value in content.items():
            if name not in ftypes:
                raise ConfigError(f"unknown key: {section}.{name}")
            updates[name] = _coerce(section, name, value, ftypes[name])
        try:
            setattr(cfg, section, dataclasses.replace(target, **updates))
        except ValueError as e:
            raise ConfigError(f"{section}: {e}") from e
    return cfg.validate()


def serialize_config(cfg: RunConfig) -> str:
    """Canonical YAML (sorted keys within sections); parses back to an equal config."""
    doc = {}
    for section, cls in _SECTIONS.items():
        target = getattr(cfg, section)
        sec = {}
        for f in fields(target):
            v = getattr(target, f.name)
            if isinstance(v, tuple):
                v = list(v)
            sec[f.name] = v
        doc[section] = sec
    return yaml.safe_dump(doc, sort_keys=True, default_flow_style=False)
