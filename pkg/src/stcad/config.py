"""Flat ``key = value`` run configuration shared by the CLI and artifacts.

Keys are the field names of :class:`ModelConfig` and :class:`TrainConfig`.
Config files allow blank lines and ``#`` comments; unknown keys are errors.
The same lines are echoed into checkpoints, so a checkpoint alone is enough
to rebuild the model and the data pipeline that produced it.
"""

from dataclasses import fields
from pathlib import Path

from .model import ModelConfig
from .training import TrainConfig

MODEL_KEYS = {f.name: f.type for f in fields(ModelConfig)}
TRAIN_KEYS = {f.name: f.type for f in fields(TrainConfig)}
ALL_KEYS = {**MODEL_KEYS, **TRAIN_KEYS}

ABLATIONS = {
    "no-independent-features": {"use_level1": False},
    "no-coupling-features": {"use_level2": False},
    "no-pe": {"use_pe_tmp": False, "use_pe_rel": False},
    "no-tpe": {"use_pe_tmp": False},
    "no-spe": {"use_pe_rel": False},
    "no-ssl": {"use_contextual_loss": False},
}


class ConfigError(ValueError):
    pass


def _kind(name):
    typ = ALL_KEYS[name]
    return typ if isinstance(typ, str) else typ.__name__


def coerce(name, value):
    """Convert a config value (string or native) to the field's type."""
    if name not in ALL_KEYS:
        raise ConfigError(f"unknown config key {name!r}")
    if not isinstance(value, str):
        return value
    text = value.strip()
    kind = _kind(name)
    try:
        if kind == "bool":
            low = text.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "int":
            if name == "d_ff" and text.lower() == "none":
                return None
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r} as {kind}") from None
    return text


def parse_lines(lines, source="config"):
    """``key = value`` lines -> dict of typed values."""
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source} line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in ALL_KEYS:
            raise ConfigError(f"{source} line {lineno}: unknown config key {key!r}")
        out[key] = coerce(key, value)
    return out


def read_config_file(path):
    return parse_lines(Path(path).read_text().splitlines(), source=str(path))


def build_configs(values=None):
    """Split a flat dict into ``(ModelConfig, TrainConfig)``."""
    values = {k: coerce(k, v) for k, v in (values or {}).items()}
    model = ModelConfig(**{k: v for k, v in values.items() if k in MODEL_KEYS})
    train = TrainConfig(**{k: v for k, v in values.items() if k in TRAIN_KEYS})
    return model, train


def apply_ablations(values, names):
    values = dict(values)
    for name in names:
        if name not in ABLATIONS:
            raise ConfigError(f"unknown ablation {name!r}; choose from {', '.join(ABLATIONS)}")
        values.update(ABLATIONS[name])
    return values


def config_lines(model_config, train_config):
    """Flat echo of both configs, model keys first, in field order."""
    both = {**model_config.to_dict(), **train_config.to_dict()}
    return [f"{k} = {v}" for k, v in both.items()]
