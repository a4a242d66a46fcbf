"""Training configuration as a key-value text file.

One ``key = value`` pair per line; blank lines and lines starting with '#'
are ignored.  Loss weights appear as ``lambda_ssim``, ``lambda_vol`` and
``lambda_semantic``.  Floats use 17 significant digits (exact round trip),
booleans are ``true``/``false``.
"""

from __future__ import annotations

import dataclasses

from ..losses import LossWeights
from ..train import TrainConfig
from . import FormatError, atomic_write

_WEIGHT_KEYS = {
    "lambda_ssim": "ssim",
    "lambda_vol": "vol",
    "lambda_semantic": "semantic",
}

_SKIP_FIELDS = {"weights"}


def _plain_fields(config: TrainConfig) -> dict:
    return {
        f.name: getattr(config, f.name)
        for f in dataclasses.fields(config)
        if f.name not in _SKIP_FIELDS
    }


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def config_to_text(config: TrainConfig) -> str:
    lines = []
    for key, attr in _WEIGHT_KEYS.items():
        lines.append(f"{key} = {_format_value(getattr(config.weights, attr))}")
    for key, value in _plain_fields(config).items():
        lines.append(f"{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


def _parse_value(key: str, text: str, target_type):
    if target_type is bool:
        if text in ("true", "false"):
            return text == "true"
        raise FormatError(f"config key {key!r}: expected true/false, got {text!r}")
    try:
        return target_type(text)
    except ValueError as e:
        raise FormatError(
            f"config key {key!r}: cannot parse {text!r} as {target_type.__name__}"
        ) from e


def config_from_text(text: str) -> TrainConfig:
    config = TrainConfig()
    field_types = {
        f.name: f.type for f in dataclasses.fields(TrainConfig)
        if f.name not in _SKIP_FIELDS
    }
    defaults = TrainConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"config line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _WEIGHT_KEYS:
            setattr(config.weights, _WEIGHT_KEYS[key], _parse_value(key, value, float))
        elif key in field_types:
            current = getattr(defaults, key)
            setattr(config, key, _parse_value(key, value, type(current)))
        else:
            raise FormatError(f"config line {lineno}: unknown key {key!r}")
    config.validate()
    return config


def write_config(path, config: TrainConfig) -> None:
    with atomic_write(path, "w") as f:
        f.write(config_to_text(config))


def read_config(path) -> TrainConfig:
    with open(path, "r") as f:
        return config_from_text(f.read())


def weights_default() -> LossWeights:
    return LossWeights()
