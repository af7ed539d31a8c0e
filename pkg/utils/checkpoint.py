"""Binary checkpoints of named complex parameters with a ModelConfig header.

Layout::

    QBERTCKPT\\n
    key=value lines (format_version, step, architecture, mode, entries,
                     config.<ModelConfig field>) terminated by "end_header"
    per entry: "<name> <ndim> <extent>..." line, then the values as
               interleaved little-endian float64 re/im pairs (row-major)
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np

from autodiff import Parameter
from config import model_config_from_strings, model_config_to_strings
from constants import CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC, Architecture, RunMode
from exceptions import CheckpointError, ConfigurationError
from models import ModelConfig

logger = logging.getLogger(__name__)

_DTYPE = np.dtype("<c16")
_END = "end_header"


@dataclass
class Checkpoint:
    config: ModelConfig
    step: int
    architecture: Architecture
    mode: RunMode
    entries: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    format_version: int = CHECKPOINT_FORMAT_VERSION


def save_checkpoint(path: Union[str, Path], parameters: Dict[str, Parameter], config: ModelConfig,
                    step: int, architecture: Architecture, mode: RunMode) -> Path:
    path = Path(path)
    header = [
        f"format_version={CHECKPOINT_FORMAT_VERSION}",
        f"step={step}",
        f"architecture={architecture.value}",
        f"mode={mode.value}",
        f"entries={len(parameters)}",
    ]
    header += [f"config.{k}={v}" for k, v in model_config_to_strings(config).items()]
    header.append(_END)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(("\n".join(header) + "\n").encode("utf-8"))
        for name, param in parameters.items():
            value = np.ascontiguousarray(param.value, dtype=_DTYPE)
            f.write((" ".join([name, str(value.ndim)] + [str(n) for n in value.shape]) + "\n").encode("utf-8"))
            f.write(value.tobytes(order="C"))
    logger.info(f"Checkpoint saved to {path}: {len(parameters)} entries, step {step}")
    return path


def _read_line(f, path: Path) -> str:
    raw = f.readline()
    if not raw.endswith(b"\n"):
        raise CheckpointError(f"{path}: truncated checkpoint")
    try:
        return raw[:-1].decode("utf-8")
    except UnicodeDecodeError:
        raise CheckpointError(f"{path}: corrupt text record")


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        CheckpointError: on a missing file, bad magic, unsupported version
            or a truncated payload.
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as f:
        if f.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a QBERT checkpoint (bad magic)")
        header: Dict[str, str] = {}
        while True:
            line = _read_line(f, path)
            if line == _END:
                break
            key, sep, value = line.partition("=")
            if not sep:
                raise CheckpointError(f"{path}: malformed header line '{line}'")
            header[key] = value
        try:
            version = int(header.get("format_version", "-1"))
            step = int(header["step"])
            count = int(header["entries"])
            architecture = Architecture(header["architecture"])
            mode = RunMode(header["mode"])
        except (KeyError, ValueError) as e:
            raise CheckpointError(f"{path}: incomplete header ({e})")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        config = model_config_from_strings(
            {k[len("config."):]: v for k, v in header.items() if k.startswith("config.")}, str(path))

        entries: Dict[str, np.ndarray] = {}
        for _ in range(count):
            parts = _read_line(f, path).split(" ")
            try:
                name, ndim = parts[0], int(parts[1])
                shape = tuple(int(n) for n in parts[2:2 + ndim])
            except (IndexError, ValueError):
                raise CheckpointError(f"{path}: malformed entry record {parts}")
            if len(shape) != ndim or name in entries:
                raise CheckpointError(f"{path}: bad entry record for '{name}'")
            nbytes = int(np.prod(shape, dtype=np.int64)) * _DTYPE.itemsize
            payload = f.read(nbytes)
            if len(payload) != nbytes:
                raise CheckpointError(f"{path}: truncated payload for '{name}'")
            entries[name] = np.frombuffer(payload, dtype=_DTYPE).reshape(shape).astype(np.complex128)
        if f.read(1):
            raise CheckpointError(f"{path}: trailing bytes after {count} entries")
    logger.info(f"Checkpoint loaded from {path}: {count} entries, step {step}")
    return Checkpoint(config, step, architecture, mode, entries, version)


def restore_parameters(parameters: Dict[str, Parameter], checkpoint: Checkpoint,
                       prefix: Optional[str] = None) -> List[str]:
    """Copy checkpoint values into ``parameters``.

    With ``prefix`` only checkpoint entries under that prefix take part (e.g.
    the encoder of a pretrained model). Names and shapes must match exactly.
    """
    entries = {k: v for k, v in checkpoint.entries.items() if prefix is None or k.startswith(prefix)}
    targets = {k: p for k, p in parameters.items() if prefix is None or k.startswith(prefix)}
    missing = sorted(set(targets) - set(entries))
    unexpected = sorted(set(entries) - set(targets))
    if missing or unexpected:
        raise CheckpointError(f"parameter registry mismatch: missing {missing}, unexpected {unexpected}")
    for name, param in targets.items():
        if entries[name].shape != param.shape:
            raise CheckpointError(f"shape mismatch for {name}: checkpoint {entries[name].shape}, model {param.shape}")
        param.assign(entries[name])
    return sorted(targets)


def check_config(stored: ModelConfig, requested: ModelConfig, ignore: Iterable[str] = ()) -> None:
    """Raise ConfigurationError listing keys where the two configs differ."""
    differing = stored.diff(requested, ignore)
    if differing:
        raise ConfigurationError("checkpoint config does not match the requested config", differing)
