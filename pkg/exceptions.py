"""Exception hierarchy for the QBERT toolkit."""

from typing import Iterable, Optional, Sequence, Tuple


class QBertError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(QBertError, ValueError):
    """An input lies outside the domain of an operation.

    Raised for shape mismatches, non-Hermitian or non-unitary matrices,
    non-unit quantum states, out-of-range token ids and empty inputs.
    """


class ConfigurationError(QBertError, ValueError):
    """Invalid configuration key, value or configuration/mode combination."""

    def __init__(self, message: str, differing_keys: Optional[Sequence[str]] = None):
        self.differing_keys = list(differing_keys or [])
        if self.differing_keys:
            message = f"{message} (differing keys: {', '.join(self.differing_keys)})"
        super().__init__(message)


class NonFiniteError(QBertError, FloatingPointError):
    """A loss or gradient contains NaN or infinity."""

    def __init__(self, message: str, offending: Optional[Iterable[str]] = None):
        self.offending = list(offending or [])
        if self.offending:
            message = f"{message}: {', '.join(self.offending)}"
        super().__init__(message)


class DataFormatError(QBertError, ValueError):
    """Malformed corpus or dataset rows; carries (line number, reason) pairs."""

    def __init__(self, path: str, problems: Sequence[Tuple[int, str]]):
        self.path = path
        self.problems = list(problems)
        shown = "; ".join(f"line {line}: {reason}" for line, reason in self.problems[:10])
        extra = f" (+{len(self.problems) - 10} more)" if len(self.problems) > 10 else ""
        super().__init__(f"{path}: {shown}{extra}")


class CheckpointError(QBertError, IOError):
    """Unreadable, truncated or incompatible checkpoint file."""
