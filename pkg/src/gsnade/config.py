"""Flat ``key = value`` experiment configs with ``#`` comments.

Unknown keys are rejected so typos fail fast; every run echoes its resolved
config (defaults filled in) for provenance, and that echo parses back to the
identical configuration.
"""

from dataclasses import dataclass

from .corruption import DYNAMIC


class ConfigError(ValueError):
    """Bad experiment config (maps to CLI exit code 1)."""


def _parse_bool(raw, key):
    low = raw.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _parse_level(raw, key):
    if raw == DYNAMIC:
        return DYNAMIC
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number or 'dynamic', got {raw!r}") from None


def _parse_choice(*choices):
    def parse(raw, key):
        if raw not in choices:
            raise ConfigError(f"{key}: expected one of {choices}, got {raw!r}")
        return raw
    return parse


def _parse_int(raw, key):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _parse_float(raw, key):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _parse_str(raw, key):
    return raw


# key -> (parser, default); None default means "not set"
_SCHEMA = {
    "data.format": (_parse_choice("csv", "idx"), None),
    "data.path": (_parse_str, None),
    "data.binarize": (_parse_float, None),
    "data.max_examples": (_parse_int, None),
    "model.recon": (_parse_choice("factorial_bernoulli", "factorial_gaussian",
                                  "nade", "rnade"), "nade"),
    "model.nade_hidden": (_parse_int, 200),
    "model.encoder_hidden": (_parse_int, 200),
    "model.k": (_parse_int, 5),
    "model.activation": (_parse_choice("tanh", "sigmoid"), "tanh"),
    "model.condition_output_biases": (_parse_bool, True),
    "nade.extra_hidden": (_parse_int, 0),
    "corruption.kind": (_parse_choice("gaussian", "salt_pepper"), "salt_pepper"),
    "corruption.sigma": (_parse_float, 0.3),
    "corruption.level": (_parse_level, 0.25),
    "train.epochs": (_parse_int, 10),
    "train.lr": (_parse_float, 0.05),
    "train.momentum": (_parse_float, 0.0),
    "train.weight_decay": (_parse_float, 0.0),
    "train.mode": (_parse_choice("plain", "walkback"), "plain"),
    "train.batch_size": (_parse_int, 100),
    "walkback.k": (_parse_int, 5),
    "seed": (_parse_int, 0),
}


@dataclass
class ExperimentConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)


def parse_config_text(text, source="<config>") -> ExperimentConfig:
    values = {key: default for key, (_, default) in _SCHEMA.items()}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        parser, _ = _SCHEMA[key]
        values[key] = parser(raw, key)
    return ExperimentConfig(values)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def render_config(cfg: ExperimentConfig) -> str:
    """Resolved config as flat key = value text (round-trips via parse)."""
    lines = []
    for key in sorted(cfg.values):
        value = cfg.values[key]
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
