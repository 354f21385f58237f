"""Strict JSON run configuration mirroring the dataclasses in :mod:`pyamulet.models`."""
from __future__ import annotations

import json
import os
import types
from dataclasses import dataclass, field, fields, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Union, get_args, get_origin, get_type_hints

from .errors import ConfigError
from .models import AugmentSpec, DataConfig, LossConfig, NetworkConfig, OptimConfig

SEED_ENV = "AAMULET_SEED"


def _coerce(hint: Any, value: Any, key: str) -> Any:
    origin = get_origin(hint)
    if origin in (Union, types.UnionType):
        options = get_args(hint)
        if value is None and type(None) in options:
            return None
        inner = [opt for opt in options if opt is not type(None)]
        return _coerce(inner[0], value, key)
    if isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint(value)
        except ValueError as exc:
            allowed = ", ".join(m.value for m in hint)
            raise ConfigError(f"config: {key} must be one of {allowed}, got {value!r}", key) from exc
    if is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(f"config: {key} must be an object", key)
        return section_from_dict(hint, value, key)
    if origin in (list, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"config: {key} must be a list", key)
        args = get_args(hint)
        if origin is tuple and args and args[-1] is not Ellipsis:
            if len(value) != len(args):
                raise ConfigError(f"config: {key} must have {len(args)} entries", key)
            return tuple(_coerce(a, v, f"{key}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
        item = args[0] if args else Any
        items = [_coerce(item, v, f"{key}[{i}]") for i, v in enumerate(value)]
        return tuple(items) if origin is tuple else items
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"config: {key} must be a boolean", key)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config: {key} must be an integer", key)
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config: {key} must be a number", key)
        return float(value)
    return value


def section_from_dict(cls, payload: Dict[str, Any], prefix: str):
    """Build dataclass ``cls`` from ``payload``; unknown keys are rejected."""

    known = {f.name for f in fields(cls)}
    for key in payload:
        if key not in known:
            raise ConfigError(f"config: unknown key {prefix}.{key}", f"{prefix}.{key}")
    hints = get_type_hints(cls)
    kwargs = {name: _coerce(hints[name], value, f"{prefix}.{name}") for name, value in payload.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: invalid {prefix} section: {exc}", prefix) from exc


def section_to_dict(obj) -> Dict[str, Any]:
    def plain(value: Any) -> Any:
        if isinstance(value, Enum):
            return value.value
        if is_dataclass(value):
            return {f.name: plain(getattr(value, f.name)) for f in fields(value)}
        if isinstance(value, (list, tuple)):
            return [plain(v) for v in value]
        return value

    return plain(obj)


@dataclass
class RunConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    augment: AugmentSpec = field(default_factory=AugmentSpec)
    data: DataConfig = field(default_factory=DataConfig)

    def __post_init__(self) -> None:
        self.loss.weights(self.network.levels)
        self.network.check_batch(self.optim.batch_size, "network.input_hw")

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "RunConfig":
        if not isinstance(payload, dict):
            raise ConfigError("config: top level must be an object")
        sections = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in payload.items():
            if key not in sections:
                raise ConfigError(f"config: unknown key {key}", key)
            if not isinstance(value, dict):
                raise ConfigError(f"config: section {key} must be an object", key)
            kwargs[key] = section_from_dict(get_type_hints(cls)[key], value, key)
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path, *, environ: Dict[str, str] | None = None) -> "RunConfig":
        path = Path(path)
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {path} is not valid JSON: {exc}") from exc
        config = cls.from_dict(payload)
        config.apply_environment(os.environ if environ is None else environ)
        return config

    def apply_environment(self, environ) -> None:
        raw = environ.get(SEED_ENV)
        if raw is None or raw == "":
            return
        try:
            seed = int(raw)
        except ValueError as exc:
            raise ConfigError(f"config: {SEED_ENV}={raw!r} is not an integer", SEED_ENV) from exc
        self.data.seed = seed
        self.data.synth.seed = seed

    def to_dict(self) -> Dict[str, Any]:
        return section_to_dict(self)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


__all__ = ["SEED_ENV", "RunConfig", "section_from_dict", "section_to_dict"]
