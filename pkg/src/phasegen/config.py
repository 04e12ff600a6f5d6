"""Flat ``key = value`` run configuration with a fixed schema.

Values come from an optional config file and are then overridden by
command-line ``--key value`` flags. Keys outside the schema are rejected.
``None`` for a training key means "use the preset's value".
"""

from dataclasses import dataclass
from pathlib import Path

U64_MAX = 2 ** 64 - 1


class ConfigError(ValueError):
    """Invalid configuration file or flag."""


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_u64(text):
    value = int(text)
    if not 0 <= value <= U64_MAX:
        raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {value}")
    return value


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"{text!r} is not one of {', '.join(options)}")
        return text
    return parse


@dataclass(frozen=True)
class Key:
    parse: object
    default: object = None
    help: str = ""


SCHEMA = {
    # shared
    "seed": Key(_parse_u64, 0, "base seed for every random stream"),
    "preset": Key(_choice("toy", "paper-full"), "toy", "training preset"),
    "out": Key(str, "runs", "output directory"),
    # inputs
    "data": Key(str, None, "dataset directory (manifest.tsv + CXT1 records)"),
    "test": Key(str, None, "held-out dataset directory"),
    "checkpoint": Key(str, None, "run directory of a trained model"),
    "input": Key(str, None, "input CXT1 tensor"),
    "ref": Key(str, None, "reference CXT1 tensor"),
    "pred": Key(str, None, "prediction CXT1 tensor"),
    "mask": Key(str, None, "reference binary mask CXT1 tensor"),
    "pred_mask": Key(str, None, "predicted binary mask CXT1 tensor"),
    "kind": Key(_choice("magnitude", "phase"), None, "export-png rendering"),
    # data generation
    "n": Key(int, 10, "number of phantoms"),
    "size": Key(int, 32, "phantom side length in pixels"),
    "sigma": Key(float, 0.05, "naive-phase noise standard deviation"),
    # masks / reconstruction
    "width": Key(int, None, "mask width (defaults to size)"),
    "acceleration": Key(float, 4.0, "undersampling factor"),
    "center_fraction": Key(float, 0.08, "fully sampled centre fraction"),
    "sampling_mask": Key(str, None, "saved sampling mask (from the mask command) for recon"),
    "baseline": Key(_choice("zerofill", "dc"), "dc", "reconstruction method"),
    "redraw_masks": Key(_parse_bool, False, "draw new training masks each epoch"),
    # training overrides
    "epochs": Key(int, None),
    "n_steps": Key(int, None),
    "batch_size": Key(int, None),
    "learning_rate": Key(float, None),
    "gamma": Key(float, None),
    "dropout": Key(float, None),
    "depth": Key(int, None),
    "base_channels": Key(int, None),
    "T": Key(int, None),
    "schedule": Key(_choice("cosine", "linear"), None),
    "cosine_offset": Key(float, None),
    "sigma_rule": Key(_choice("fixed-beta", "zero"), None),
    "noise_law": Key(_choice("uniform", "gaussian-wrapped"), None),
    "closed_form": Key(_choice("polar", "additive"), None),
    "magnitude_projection": Key(_parse_bool, None),
}

TRAIN_KEYS = ("epochs", "n_steps", "batch_size", "learning_rate", "gamma", "dropout", "depth",
              "base_channels", "T", "schedule", "cosine_offset", "sigma_rule", "noise_law",
              "closed_form", "magnitude_projection")


def normalize_key(key):
    return key.strip().replace("-", "_")


def parse_value(key, text):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    if text.strip() in ("None", ""):
        return None
    try:
        return SCHEMA[key].parse(text.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


def parse_config_text(text, source="<config>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = normalize_key(key)
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = parse_value(key, value)
    return values


def load_config_file(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path))


def resolve(file_values=None, overrides=None):
    """Defaults, then file values, then overrides."""
    values = {key: spec.default for key, spec in SCHEMA.items()}
    for layer in (file_values or {}, overrides or {}):
        for key, value in layer.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = value
    return values


def format_config(values):
    return "".join(f"{k} = {v}\n" for k, v in values.items())
