"""Deterministic toy corpora and labeled datasets for smoke runs and acceptance tests."""

import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)


def topic_words(topic: int, words_per_topic: int) -> List[str]:
    return [f"t{topic}w{j}" for j in range(words_per_topic)]


def topic_corpus(n_sentences: int = 200, n_topics: int = 4, words_per_topic: int = 24, sentence_len: int = 6,
                 sentences_per_doc: int = 5, seed: int = 0) -> List[str]:
    """Documents of consecutive windows over a cyclic per-topic word chain.

    Each word's neighbours are fixed by its chain, and the next sentence of
    a document continues where the previous one stopped. Documents are
    separated by a blank line.
    """
    rng = np.random.default_rng(seed)
    lines: List[str] = []
    written = 0
    while written < n_sentences:
        topic = int(rng.integers(n_topics))
        words = topic_words(topic, words_per_topic)
        offset = int(rng.integers(words_per_topic))
        for s in range(min(sentences_per_doc, n_sentences - written)):
            start = offset + s * sentence_len
            lines.append(" ".join(words[(start + k) % words_per_topic] for k in range(sentence_len)))
            written += 1
        lines.append("")
    return lines


def separable_classification(n_rows: int = 200, words_per_topic: int = 24, sentence_len: int = 6,
                             seed: int = 0) -> List[Tuple[int, str]]:
    """Two classes drawn from disjoint topic vocabularies (separable by bag of words)."""
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n_rows):
        label = int(rng.integers(2))
        words = topic_words(label, words_per_topic)
        picks = rng.integers(words_per_topic, size=sentence_len)
        rows.append((label, " ".join(words[j] for j in picks)))
    return rows


def order_classification(n_rows: int = 200, n_topics: int = 4, words_per_topic: int = 24, sentence_len: int = 6,
                         paired: bool = False, seed: int = 0) -> List[Tuple[int, str]]:
    """Label 1 for a chain window in corpus order, 0 for the same window reversed.

    Word order is the only signal, so a bag-of-words encoder cannot separate
    the classes. With ``paired`` every window appears once in each order.
    """
    rng = np.random.default_rng(seed)
    rows = []
    while len(rows) < n_rows:
        words = topic_words(int(rng.integers(n_topics)), words_per_topic)
        start = int(rng.integers(words_per_topic))
        window = [words[(start + k) % words_per_topic] for k in range(sentence_len)]
        if paired:
            rows.append((1, " ".join(window)))
            rows.append((0, " ".join(reversed(window))))
        else:
            label = int(rng.integers(2))
            rows.append((label, " ".join(window if label else list(reversed(window)))))
    return rows[:n_rows]


def write_lines(path: Union[str, Path], lines: Sequence[str]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"Wrote {len(lines)} lines to {path}")
    return path


def write_tsv(path: Union[str, Path], rows: Sequence[Tuple[int, str]]) -> Path:
    return write_lines(path, [f"{label}\t{text}" for label, text in rows])
