"""Whitespace tokenizer and corpus vocabulary."""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Union

from constants import MIN_TOKEN_FREQ, SPECIAL_TOKENS, UNK_ID
from exceptions import DataFormatError, DomainError

logger = logging.getLogger(__name__)


def tokenize(text: str) -> List[str]:
    return text.lower().split()


@dataclass
class Vocab:
    """Bijective token <-> id map; the special tokens hold ids 0-4."""
    tokens: List[str]
    index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if tuple(self.tokens[:len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise DomainError(f"vocabulary must start with {SPECIAL_TOKENS}")
        self.index = {}
        for i, token in enumerate(self.tokens):
            if token in self.index:
                raise DomainError(f"duplicate vocabulary token '{token}'")
            self.index[token] = i

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def build(cls, lines: Iterable[str], min_freq: int = MIN_TOKEN_FREQ, max_size: int = 0) -> "Vocab":
        """Vocabulary of tokens seen at least ``min_freq`` times, most frequent first.

        Ties are broken alphabetically; ``max_size`` (when > 0) caps the total
        size including the special tokens.
        """
        counts = Counter(token for line in lines for token in tokenize(line))
        ranked = sorted((t for t, c in counts.items() if c >= min_freq and t not in SPECIAL_TOKENS),
                        key=lambda t: (-counts[t], t))
        if max_size > 0:
            ranked = ranked[:max(0, max_size - len(SPECIAL_TOKENS))]
        vocab = cls(list(SPECIAL_TOKENS) + ranked)
        dropped = sum(1 for c in counts.values() if c < min_freq)
        logger.info(f"Built vocabulary: {len(vocab)} tokens ({dropped} types below min_freq={min_freq})")
        return vocab

    def encode(self, text: str) -> List[int]:
        return [self.index.get(token, UNK_ID) for token in tokenize(text)]

    def decode(self, ids: Iterable[int]) -> List[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(self.tokens) + "\n")
        logger.info(f"Vocabulary saved to {path}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocab":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f]
        problems = [(i + 1, "empty token or embedded space") for i, t in enumerate(tokens) if not t or " " in t]
        if problems:
            raise DataFormatError(str(path), problems)
        try:
            return cls(tokens)
        except DomainError as e:
            raise DataFormatError(str(path), [(1, str(e))])
