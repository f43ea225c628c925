import logging
import os
import typing
from dataclasses import asdict, fields
from typing import Dict, Iterable, Optional, Tuple

from src.models.config import ModelConfig, TrainConfig, config_keys
from src.models.errors import ConfigError, InputError

logger = logging.getLogger(__name__)

TRUE_VALUES = ("1", "true", "yes", "on")
FALSE_VALUES = ("0", "false", "no", "off")


def _field_types() -> Dict[str, object]:
    hints = dict(typing.get_type_hints(ModelConfig))
    hints.update(typing.get_type_hints(TrainConfig))
    return hints


def _coerce_scalar(key: str, text: str, kind):
    if kind is bool:
        lowered = text.lower()
        if lowered in TRUE_VALUES:
            return True
        if lowered in FALSE_VALUES:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    try:
        return kind(text)
    except ValueError as e:
        raise ConfigError(f"{key}: cannot read {text!r} as {kind.__name__}") from e


def coerce_value(key: str, text: str):
    """Convert a raw string to the type of the config field `key`."""
    types = _field_types()
    if key not in types:
        raise ConfigError(f"unknown config key {key!r}")
    kind = types[key]
    text = text.strip()
    origin = typing.get_origin(kind)
    if origin is tuple:
        item = typing.get_args(kind)[0]
        return tuple(_coerce_scalar(key, part.strip(), item) for part in text.split(",") if part.strip())
    if origin is typing.Union:
        if text.lower() in ("none", ""):
            return None
        kind = next(arg for arg in typing.get_args(kind) if arg is not type(None))
    return _coerce_scalar(key, text, kind)


def parse_assignments(lines: Iterable[str], source: str = "<flags>") -> Dict[str, object]:
    """Parse key=value lines; blank lines and # comments are ignored."""
    values = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected key=value, got {raw.strip()!r}")
        key, text = (part.strip() for part in line.split("=", 1))
        values[key] = coerce_value(key, text)
    return values


def read_config_file(path: str) -> Dict[str, object]:
    if not os.path.isfile(path):
        raise InputError(f"config file not found: {path}")
    with open(path) as f:
        return parse_assignments(f, source=path)


def resolve_configs(
    config_path: Optional[str] = None,
    overrides: Iterable[str] = (),
    flags: Optional[Dict[str, object]] = None,
    base: Optional[ModelConfig] = None,
) -> Tuple[ModelConfig, TrainConfig]:
    """Merge defaults < config file < --set overrides < dedicated flags, then validate.

    Args:
        config_path: Optional key=value file.
        overrides: key=value strings from the command line.
        flags: Values of dedicated flags; None entries are ignored.
        base: Model defaults to start from instead of ModelConfig().
    """
    values = asdict(base) if base is not None else {}
    if config_path:
        values.update(read_config_file(config_path))
    values.update(parse_assignments(overrides))
    values.update({k: v for k, v in (flags or {}).items() if v is not None})

    owners = config_keys()
    model_values = {k: v for k, v in values.items() if owners[k] is ModelConfig}
    train_values = {k: v for k, v in values.items() if owners[k] is TrainConfig}
    model_config = ModelConfig(**model_values).validate()
    train_config = TrainConfig(**train_values).validate()
    log_resolved(model_config, train_config)
    return model_config, train_config


def format_config(model_config: ModelConfig, train_config: TrainConfig) -> str:
    lines = []
    for config in (model_config, train_config):
        for f in fields(config):
            value = getattr(config, f.name)
            text = ",".join(str(v) for v in value) if isinstance(value, tuple) else str(value)
            lines.append(f"{f.name}={text}")
    return "\n".join(lines)


def log_resolved(model_config: ModelConfig, train_config: TrainConfig):
    logger.info(f"Resolved config (hash {model_config.config_hash():08x}):")
    for line in format_config(model_config, train_config).splitlines():
        logger.info(f"  {line}")
