"""Run configuration: flat ``section.key = value`` files.

Blank lines and ``#`` comments are ignored. Unknown keys and bad values are
rejected with the offending line number. Every key has a default, so an
empty file is a valid configuration.

    model.hidden = 64
    fpa.positions = f2            # or "f2:3d,input:2d"
    train.lr = 0.0001
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ArgumentError, ConfigError
from .fpa import FpaConfig
from .model.lipnet import POSITIONS, LipNetConfig
from .model.train import TrainConfig


@dataclass
class ModelSection:
    t: int = 24
    h: int = 32
    w: int = 32
    channels: tuple = (8, 16, 24)
    hidden: int = 64
    dropout: float = 0.3


@dataclass
class FpaSection:
    positions: str = ""
    variant: str = "3d"  # used for positions given without ":2d"/":3d"
    levels: int = 3
    mask_activation: str = "sigmoid"
    batchnorm: bool = True
    dropout: float = 0.3


@dataclass
class TrainSection:
    epochs: int = 30
    batch_size: int = 4
    seed: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    threads: int = 1


@dataclass
class SynthSection:
    n: int = 500
    slots: int = 6
    noise: float = 0.02


@dataclass
class PathsSection:
    data: str = "data"
    out: str = "run"
    ckpt: str = ""


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    fpa: FpaSection = field(default_factory=FpaSection)
    train: TrainSection = field(default_factory=TrainSection)
    synth: SynthSection = field(default_factory=SynthSection)
    paths: PathsSection = field(default_factory=PathsSection)

    def fpa_configs(self, positions: str | None = None) -> dict:
        """Position -> FpaConfig for ``positions`` (default: ``fpa.positions``)."""
        base = FpaConfig(self.fpa.variant, self.fpa.levels, 3, self.fpa.mask_activation,
                         self.fpa.batchnorm, self.fpa.dropout)
        text = self.fpa.positions if positions is None else positions
        return {pos: dataclasses.replace(base, variant=v) for pos, v in parse_positions(text, base.variant).items()}

    def lipnet_config(self, num_classes: int = 28) -> LipNetConfig:
        m = self.model
        return LipNetConfig(t=m.t, h=m.h, w=m.w, channels=m.channels, hidden=m.hidden,
                            num_classes=num_classes, dropout=m.dropout, fpa=self.fpa_configs())

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(t.epochs, t.batch_size, t.lr, t.beta1, t.beta2, t.eps, t.seed)


def parse_positions(text: str, default_variant: str = "3d") -> dict:
    """``"f2"`` -> {"f2": "3d"}; ``"f2:3d,input:2d"`` -> both. Empty or "none" means no FPA."""
    out = {}
    if text.strip().lower() == "none":
        return out
    for item in (s.strip() for s in text.split(",")):
        if not item:
            continue
        pos, _, variant = item.partition(":")
        pos = pos.strip()
        if pos not in POSITIONS:
            raise ArgumentError(f"unknown FPA position {pos!r}; choose from {', '.join(POSITIONS)}")
        if pos in out:
            raise ArgumentError(f"FPA position {pos!r} given twice")
        out[pos] = FpaConfig(variant.strip() or default_variant).variant
    return out


def _coerce(text: str, default):
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(int(v) for v in text.split(","))
    return text


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        section_name, _, name = key.partition(".")
        section = getattr(cfg, section_name, None) if section_name in RunConfig.__dataclass_fields__ else None
        if section is None or name not in type(section).__dataclass_fields__:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            setattr(section, name, _coerce(value, getattr(section, name)))
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {e}") from None
    try:
        cfg.fpa_configs()
    except ArgumentError as e:
        raise ConfigError(f"{source}: {e}") from None
    return cfg


def parse_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return parse_config_text(text, str(path))
