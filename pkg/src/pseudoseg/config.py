"""Run configuration: one declarative JSON file, overridable by CLI flags.

Defaults encode the reference pipeline constants (672 input, k in [3, 5],
2 labels per image, 225 episode views), so an empty config file is a valid,
faithful run.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .crf import CrfParams
from .episodes import TransformConfig
from .pseudolabel import PgmConfig
from .spectral import SpectralConfig


@dataclass(frozen=True)
class RunConfig:
    image_dir: str = ""
    feature_dir: str = ""
    output_dir: str = ""
    k_shot: int = 1
    episodes_per_label: int = 1
    global_seed: int = 0
    workers: int = 1
    pgm: PgmConfig = field(default_factory=PgmConfig)
    transforms: TransformConfig = field(default_factory=TransformConfig)

    def __post_init__(self):
        if self.k_shot < 1:
            raise ValueError("k_shot must be >= 1")
        if self.episodes_per_label < 1:
            raise ValueError("episodes_per_label must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


_NESTED = {
    "pgm": PgmConfig,
    "transforms": TransformConfig,
    "spectral": SpectralConfig,
    "crf": CrfParams,
}


def _build(cls, data: dict):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        if name in _NESTED and isinstance(value, dict):
            kwargs[name] = _build(_NESTED[name], value)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data)


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(serialize_config(cfg), encoding="utf-8")


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"
