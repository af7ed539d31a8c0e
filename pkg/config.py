"""Configuration management for QBERT runs."""

import logging
import math
import os
import typing
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union

from dotenv import load_dotenv

from constants import (
    FINETUNE_BATCH_SIZE,
    FINETUNE_LR,
    LOG_LEVEL_ENV,
    MASK_PROB,
    PRETRAIN_BATCH_SIZE,
    PRETRAIN_LR,
    WARMUP_FRACTION,
    Architecture,
    OptimizerKind,
    RunMode,
    ScheduleKind,
)
from exceptions import ConfigurationError
from models import ModelConfig
from optim import AdamWConfig

logger = logging.getLogger(__name__)
# Load .env file at module level
load_dotenv()

_TRUE = ("true", "1", "yes", "on")
_FALSE = ("false", "0", "no", "off")


def str_to_bool(value: Union[str, bool, int]) -> bool:
    """Convert string/int/bool to boolean.

    Args:
        value: Value to convert to boolean. Can be:
            - string: 'true', '1', 'yes', 'on' (case insensitive) -> True
            - int: 1 -> True, 0 -> False
            - bool: returns as is

    Returns:
        bool: The converted boolean value
    """
    if isinstance(value, bool):
        return value
    if isinstance(value, int):
        return bool(value)
    if isinstance(value, str):
        return value.strip().lower() in _TRUE
    return bool(value)


@dataclass
class TrainingConfig:
    """Loop, data and bookkeeping settings of a run."""
    architecture: Architecture = Architecture.QBERT
    optimizer: OptimizerKind = OptimizerKind.CADAMW
    batch_size: int = PRETRAIN_BATCH_SIZE
    steps: int = 500
    epochs: int = 50
    mask_prob: float = MASK_PROB
    log_every: int = 50
    checkpoint_every: int = 0
    max_lines: int = 0
    warmup_fraction: float = WARMUP_FRACTION

    def __post_init__(self):
        """Validate configuration after initialization."""
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.steps < 1 or self.epochs < 1:
            raise ConfigurationError(f"steps and epochs must be >= 1, got {self.steps}/{self.epochs}")
        if not 0.0 < self.mask_prob < 1.0:
            raise ConfigurationError(f"mask_prob must be in (0, 1), got {self.mask_prob}")
        if self.log_every < 1 or self.checkpoint_every < 0 or self.max_lines < 0:
            raise ConfigurationError("log_every must be >= 1; checkpoint_every and max_lines must be >= 0")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigurationError(f"warmup_fraction must be in [0, 1), got {self.warmup_fraction}")


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    optim: AdamWConfig = field(default_factory=AdamWConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    source: Optional[str] = None


# config-file key -> (section, dataclass field)
_OPTIM_ALIASES = {"lr": "alpha"}
_SECTIONS = (("model", ModelConfig), ("optim", AdamWConfig), ("training", TrainingConfig))


def _key_table() -> Dict[str, Tuple[str, str]]:
    table: Dict[str, Tuple[str, str]] = {}
    reverse_alias = {v: k for k, v in _OPTIM_ALIASES.items()}
    for section, cls in _SECTIONS:
        for f in fields(cls):
            key = reverse_alias.get(f.name, f.name) if section == "optim" else f.name
            table[key] = (section, f.name)
    return table


CONFIG_KEYS = _key_table()


def _field_type(cls, name: str):
    return typing.get_type_hints(cls)[name]


def coerce_value(raw: str, target) -> Any:
    """Parse ``raw`` into ``target`` (int, float, bool, complex, an Enum or Optional of these)."""
    raw = raw.strip()
    args = typing.get_args(target)
    if typing.get_origin(target) is Union and type(None) in args:
        if raw.lower() in ("none", ""):
            return None
        target = next(a for a in args if a is not type(None))
    if isinstance(target, type) and issubclass(target, Enum):
        try:
            return target(raw)
        except ValueError:
            choices = ", ".join(m.value for m in target)
            raise ValueError(f"'{raw}' is not one of: {choices}")
    if target is bool:
        if raw.lower() not in _TRUE + _FALSE:
            raise ValueError(f"'{raw}' is not a boolean")
        return str_to_bool(raw)
    if target is int:
        return int(raw)
    if target is float:
        value = float(raw)
        if not math.isfinite(value):
            raise ValueError(f"'{raw}' is not finite")
        return value
    if target is complex:
        return complex(raw.replace(" ", ""))
    return raw


def format_value(value: Any) -> str:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_lines(lines: Iterable[str], source: str = "<config>") -> Dict[str, Tuple[int, str]]:
    """Flat ``key = value`` lines -> {key: (line number, raw value)}."""
    entries: Dict[str, Tuple[int, str]] = {}
    for number, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigurationError(f"{source}:{number}: expected 'key = value', got '{text}'")
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"{source}:{number}: unknown key '{key}'")
        if key in entries:
            raise ConfigurationError(f"{source}:{number}: duplicate key '{key}' (first set on line {entries[key][0]})")
        entries[key] = (number, raw)
    return entries


def mode_defaults(mode: Optional[RunMode]) -> Dict[str, str]:
    """Learning rate and batch size defaults for a run mode."""
    if mode is RunMode.FINETUNE:
        return {"lr": repr(FINETUNE_LR), "batch_size": str(FINETUNE_BATCH_SIZE)}
    if mode is RunMode.PRETRAIN:
        return {"lr": repr(PRETRAIN_LR), "batch_size": str(PRETRAIN_BATCH_SIZE)}
    return {}


def build_config(entries: Dict[str, Tuple[int, str]], source: str = "<config>",
                 mode: Optional[RunMode] = None) -> RunConfig:
    """Typed RunConfig from parsed entries; unspecified keys keep their defaults."""
    merged = {key: (0, raw) for key, raw in mode_defaults(mode).items()}
    merged.update(entries)
    values: Dict[str, Dict[str, Any]] = {section: {} for section, _ in _SECTIONS}
    classes = dict(_SECTIONS)
    for key, (number, raw) in merged.items():
        section, name = CONFIG_KEYS[key]
        try:
            values[section][name] = coerce_value(raw, _field_type(classes[section], name))
        except ValueError as e:
            where = f"{source}:{number}" if number else source
            raise ConfigurationError(f"{where}: bad value for '{key}': {e}")
    try:
        model = ModelConfig(**values["model"])
        training = TrainingConfig(**values["training"])
        optim_values = values["optim"]
        schedule = optim_values.get("schedule", ScheduleKind.CONSTANT)
        if schedule is ScheduleKind.LINEAR_WARMUP_DECAY and "total_steps" not in optim_values:
            optim_values["total_steps"] = training.steps
            optim_values.setdefault("warmup_steps", int(math.ceil(training.warmup_fraction * training.steps)))
        optim = AdamWConfig(**optim_values)
    except ConfigurationError as e:
        raise ConfigurationError(f"{source}: {e}")
    return RunConfig(model, optim, training, source)


def load_config(path: Optional[Union[str, Path]] = None, mode: Optional[RunMode] = None,
                overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    """Load a run configuration from a flat key = value file.

    Command-line ``overrides`` win over file values; mode defaults (learning
    rate and batch size) apply to keys neither sets.
    """
    entries: Dict[str, Tuple[int, str]] = {}
    source = "<defaults>"
    if path is not None:
        config_file = Path(path)
        source = str(config_file)
        if not config_file.exists():
            raise ConfigurationError(f"config file not found: {config_file}")
        with open(config_file, "r", encoding="utf-8") as f:
            entries = parse_config_lines(f, source)
    for key, raw in (overrides or {}).items():
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"unknown override key '{key}'")
        entries[key] = (0, raw)
    config = build_config(entries, source, mode)
    logger.info(f"Loaded configuration from {source}: arch={config.training.architecture.value}, "
                f"optimizer={config.training.optimizer.value}, lr={config.optim.alpha}, seed={config.model.seed}")
    return config


def model_config_to_strings(config: ModelConfig) -> Dict[str, str]:
    return {f.name: format_value(getattr(config, f.name)) for f in fields(ModelConfig)}


def model_config_from_strings(values: Dict[str, str], source: str = "<header>") -> ModelConfig:
    """Inverse of :func:`model_config_to_strings`; unknown keys raise ConfigurationError."""
    known = {f.name for f in fields(ModelConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigurationError(f"{source}: unknown model keys {unknown}")
    parsed = {}
    for name, raw in values.items():
        try:
            parsed[name] = coerce_value(raw, _field_type(ModelConfig, name))
        except ValueError as e:
            raise ConfigurationError(f"{source}: bad value for '{name}': {e}")
    return ModelConfig(**parsed)


def setup_logging(level: Optional[str] = None) -> logging.Logger:
    """Set up structured logging; ``QBERT_LOG_LEVEL`` applies when ``level`` is None."""
    level = level or os.getenv(LOG_LEVEL_ENV, "INFO")
    log_format = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=log_format)
    return logging.getLogger(__name__)
