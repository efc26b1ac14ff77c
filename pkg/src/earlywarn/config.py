"""Pipeline configuration: one dataclass per section, strict key checking."""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    path: str | None = None
    cadence_s: float = 120.0
    restart_exclusion_s: float = 1800.0
    window_minutes: float = 60.0     # pre-breakdown window
    interpolate: bool = True
    split: tuple = (0.6, 0.2, 0.2)

    @property
    def window_samples(self) -> int:
        return int(round(self.window_minutes * 60.0 / self.cadence_s))


@dataclass
class FeaturesConfig:
    threshold: float = 0.45
    max_points: int = 240            # subsample for the classifier
    restarts: int = 0


@dataclass
class GDCPDConfig:
    k: int = 1
    window: int = 3
    restarts: int = 1
    n_candidates: int | None = None
    max_lengthscale: float | None = None   # seconds
    min_lengthscale: float | None = None   # seconds


@dataclass
class MonitorSection:
    window: int = 3
    ridge: float = 1e-3


@dataclass
class RULSection:
    hidden: int = 100
    layers: int = 3
    dropout: float = 0.2
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 1
    clip_norm: float = 5.0
    calib_epochs: int = 5
    calib_lr_scale: float = 0.1
    horizon_minutes: float = 120.0   # RUL normalization scale
    stop_minutes: float = 10.0


@dataclass
class SeedsConfig:
    root: int = 0


@dataclass
class PipelineConfig:
    data: DataConfig = field(default_factory=DataConfig)
    features: FeaturesConfig = field(default_factory=FeaturesConfig)
    gdcpd: GDCPDConfig = field(default_factory=GDCPDConfig)
    monitor: MonitorSection = field(default_factory=MonitorSection)
    rul: RULSection = field(default_factory=RULSection)
    seeds: SeedsConfig = field(default_factory=SeedsConfig)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["data"]["split"] = list(d["data"]["split"])
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> "PipelineConfig":
        d = d or {}
        sections = {f.name: f for f in fields(cls)}
        unknown = set(d) - set(sections)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        kwargs = {}
        for name, f in sections.items():
            sub = d.get(name) or {}
            if not isinstance(sub, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            section_cls = f.default_factory
            allowed = {g.name for g in fields(section_cls)}
            bad = set(sub) - allowed
            if bad:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
            if "split" in sub:
                sub = dict(sub, split=tuple(sub["split"]))
            kwargs[name] = section_cls(**sub)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def validate(self):
        if abs(sum(self.data.split) - 1.0) > 1e-9 or len(self.data.split) != 3:
            raise ConfigError("data.split must be three fractions summing to 1")
        if self.gdcpd.k < 1 or self.gdcpd.window < 1 or self.monitor.window < 1:
            raise ConfigError("k and windows must be >= 1")
        if not 0 <= self.rul.dropout < 1:
            raise ConfigError("rul.dropout must be in [0, 1)")
        if self.features.threshold <= 0:
            raise ConfigError("features.threshold must be positive")

    def with_overrides(self, seed=None, window=None, k=None, threshold=None) -> "PipelineConfig":
        d = self.to_dict()
        if seed is not None:
            d["seeds"]["root"] = int(seed)
        if window is not None:
            d["gdcpd"]["window"] = d["monitor"]["window"] = int(window)
        if k is not None:
            d["gdcpd"]["k"] = int(k)
        if threshold is not None:
            d["features"]["threshold"] = float(threshold)
        return PipelineConfig.from_dict(d)


def load_config(path=None) -> PipelineConfig:
    """Read a YAML (or JSON) config; missing file path gives the defaults."""
    if path is None:
        return PipelineConfig()
    text = Path(path).read_text()
    d = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    return PipelineConfig.from_dict(d)


def stage_rng(root: int, label: str) -> np.random.Generator:
    """Independent generator for a named pipeline stage."""
    return np.random.default_rng(np.random.SeedSequence([int(root), zlib.crc32(label.encode())]))


def stage_seed(root: int, label: str) -> int:
    return int(stage_rng(root, label).integers(2**31 - 1))
