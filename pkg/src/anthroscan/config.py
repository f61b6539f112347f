"""Runtime configuration shared by the CLI and the HTTP service."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError

DEFAULT_PROVIDERS = {
    "detector": "mask-geometry",
    "reconstructor": "synthetic-ellipsoid",
    "face": "synthetic-image-stats",
    "body": "synthetic-image-stats",
    "cloud": "synthetic-image-stats",
}


@dataclass
class PipelineConfig:
    providers: dict = field(default_factory=lambda: dict(DEFAULT_PROVIDERS))
    params_path: str = ""
    calibration_path: str = ""
    store_dir: str = "store"
    default_device: str = "default"
    align_size: int = 160
    body_margin: int = 4
    cloud_points: int = 2048
    cloud_seed: int = 7
    mask_threshold: int = 8
    provider_seed: int = 0
    base_dir: Path = field(default_factory=Path)

    def resolve(self, path_str: str) -> Path:
        p = Path(path_str)
        return p if p.is_absolute() else self.base_dir / p

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigurationError("config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        providers = {**DEFAULT_PROVIDERS, **raw.pop("providers", {})}
        return cls(providers=providers, base_dir=path.parent.resolve(), **raw)

    def apply_overrides(self, overrides) -> None:
        """key=value pairs from the command line; values parsed as JSON when possible."""
        for item in overrides or []:
            if "=" not in item:
                raise ConfigurationError(f"override must look like key=value, got {item!r}")
            key, value = item.split("=", 1)
            if key == "providers" or key not in self.__dataclass_fields__:
                raise ConfigurationError(f"unknown config key {key!r}")
            try:
                parsed = json.loads(value)
            except json.JSONDecodeError:
                parsed = value
            setattr(self, key, parsed)
