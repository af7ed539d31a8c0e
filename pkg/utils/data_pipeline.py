"""Corpus ingestion, MLM masking, NSP pairing and classification batching."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from constants import (
    CLS_ID,
    IGNORE_INDEX,
    MASK_ID,
    MASK_KEEP_PROB,
    MASK_PROB,
    MASK_REPLACE_PROB,
    NUM_SPECIAL_TOKENS,
    PAD_ID,
    SEP_ID,
)
from exceptions import DataFormatError, DomainError
from models import FinetuneBatch, PretrainBatch
from utils.tokenizer import Vocab

logger = logging.getLogger(__name__)

Document = List[str]


@dataclass
class SentencePair:
    first: List[int]
    second: List[int]
    is_next: int  # 1: second follows first in the corpus, 0: random sentence


@dataclass
class LabeledText:
    label: int
    text: str
    line: int = 0


def read_documents(lines: Sequence[str], max_lines: int = 0) -> List[Document]:
    """Split one-sentence-per-line text into documents at blank lines."""
    documents: List[Document] = []
    current: Document = []
    for count, line in enumerate(lines):
        if max_lines and count >= max_lines:
            logger.info(f"Corpus truncated to the first {max_lines} lines")
            break
        text = line.strip()
        if text:
            current.append(text)
        elif current:
            documents.append(current)
            current = []
    if current:
        documents.append(current)
    if not documents:
        raise DomainError("empty corpus")
    return documents


def load_corpus(path: Union[str, Path], max_lines: int = 0) -> List[Document]:
    with open(path, "r", encoding="utf-8") as f:
        documents = read_documents(f.readlines(), max_lines)
    logger.info(f"Loaded corpus {path}: {len(documents)} documents, {sum(len(d) for d in documents)} sentences")
    return documents


def mask_tokens(ids: np.ndarray, candidates: np.ndarray, vocab_size: int, rng: np.random.Generator,
                mask_prob: float = MASK_PROB) -> Tuple[np.ndarray, np.ndarray]:
    """Select ~mask_prob of the candidate positions and corrupt them.

    The selected count is mask_prob * n rounded stochastically, so its
    expectation is exact for any length. Of the selected tokens 80% become
    [MASK], 10% stay unchanged and 10% become a random non-special token.
    Returns (corrupted ids, labels with IGNORE_INDEX at unselected positions).
    """
    ids = np.asarray(ids).copy()
    labels = np.full(ids.shape, IGNORE_INDEX, dtype=np.int64)
    positions = np.flatnonzero(candidates)
    if positions.size == 0:
        return ids, labels
    expected = mask_prob * positions.size
    k = int(math.floor(expected)) + int(rng.random() < expected - math.floor(expected))
    chosen = np.sort(rng.choice(positions, size=k, replace=False))
    labels[chosen] = ids[chosen]
    for pos in chosen:
        r = rng.random()
        if r < MASK_REPLACE_PROB:
            ids[pos] = MASK_ID
        elif r >= MASK_REPLACE_PROB + MASK_KEEP_PROB:
            ids[pos] = int(rng.integers(NUM_SPECIAL_TOKENS, vocab_size))
    return ids, labels


def make_nsp_pairs(documents: Sequence[Document], vocab: Vocab, rng: np.random.Generator) -> List[SentencePair]:
    """Pairs of adjacent sentences, the second replaced by a random one half of the time."""
    encoded = [[vocab.encode(s) for s in doc] for doc in documents]
    flat = [(d, i) for d, doc in enumerate(encoded) for i in range(len(doc))]
    if len(flat) < 3:
        raise DomainError("NSP pairing needs at least three sentences")
    pairs: List[SentencePair] = []
    for d, doc in enumerate(encoded):
        for i in range(len(doc) - 1):
            if rng.random() < 0.5:
                pairs.append(SentencePair(doc[i], doc[i + 1], 1))
                continue
            while True:
                rd, ri = flat[int(rng.integers(len(flat)))]
                if (rd, ri) != (d, i + 1) and (rd, ri) != (d, i):
                    break
            pairs.append(SentencePair(doc[i], encoded[rd][ri], 0))
    if not pairs:
        raise DomainError("corpus has no document with two consecutive sentences")
    return pairs


def pack_pair(first: List[int], second: List[int], max_seq_len: int) -> Tuple[List[int], List[int], bool]:
    """[CLS] first [SEP] second [SEP], trimming the longer segment first; returns (ids, segments, truncated)."""
    first, second = list(first), list(second)
    limit = max_seq_len - 3
    truncated = False
    while len(first) + len(second) > limit:
        truncated = True
        if len(first) >= len(second) and first:
            first.pop()
        elif second:
            second.pop()
        else:
            first.pop()
    ids = [CLS_ID] + first + [SEP_ID] + second + [SEP_ID]
    segments = [0] * (len(first) + 2) + [1] * (len(second) + 1)
    return ids, segments, truncated


def pack_single(tokens: List[int], max_seq_len: int) -> Tuple[List[int], bool]:
    body = tokens[:max_seq_len - 2]
    return [CLS_ID] + body + [SEP_ID], len(body) < len(tokens)


def _pad(rows: Sequence[List[int]], width: int, fill: int) -> np.ndarray:
    out = np.full((len(rows), width), fill, dtype=np.int64)
    for r, row in enumerate(rows):
        out[r, :len(row)] = row
    return out


def tokenize_and_mask(documents: Sequence[Document], vocab: Vocab, rng: np.random.Generator, max_seq_len: int,
                      batch_size: int, mask_prob: float = MASK_PROB) -> Iterator[PretrainBatch]:
    """One shuffled pass over the NSP pairs of a corpus as masked pretraining batches."""
    if max_seq_len < 4:
        raise DomainError(f"max_seq_len {max_seq_len} cannot hold [CLS] a [SEP] b [SEP]")
    pairs = make_nsp_pairs(documents, vocab, rng)
    order = rng.permutation(len(pairs))
    truncated = 0
    for start in range(0, len(order), batch_size):
        rows, segs, nsp = [], [], []
        for idx in order[start:start + batch_size]:
            pair = pairs[idx]
            ids, segments, cut = pack_pair(pair.first, pair.second, max_seq_len)
            truncated += cut
            rows.append(ids)
            segs.append(segments)
            nsp.append(pair.is_next)
        token_ids = _pad(rows, max_seq_len, PAD_ID)
        attention = token_ids != PAD_ID
        candidates = attention & (token_ids >= NUM_SPECIAL_TOKENS)
        masked = np.empty_like(token_ids)
        labels = np.empty_like(token_ids)
        for r in range(len(rows)):
            masked[r], labels[r] = mask_tokens(token_ids[r], candidates[r], len(vocab), rng, mask_prob)
        yield PretrainBatch(
            token_ids=masked,
            segment_ids=_pad(segs, max_seq_len, 0),
            position_ids=np.broadcast_to(np.arange(max_seq_len), token_ids.shape).copy(),
            attention_mask=attention.astype(np.int64),
            mlm_labels=labels,
            nsp_labels=np.asarray(nsp, dtype=np.int64),
        )
    if truncated:
        logger.info(f"Truncated {truncated} sentence pairs to max_seq_len={max_seq_len}")


def load_labeled_tsv(path: Union[str, Path], n_classes: Optional[int] = None) -> List[LabeledText]:
    """Rows of ``label<TAB>text``; every malformed row is reported with its line number.

    Raises:
        DataFormatError: if any row is malformed or the file has no rows.
    """
    rows: List[LabeledText] = []
    problems: List[Tuple[int, str]] = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            label, sep, text = line.partition("\t")
            if not sep:
                problems.append((number, "missing tab separator"))
                continue
            try:
                value = int(label.strip())
            except ValueError:
                problems.append((number, f"label '{label}' is not an integer"))
                continue
            if n_classes is not None and n_classes > 1 and not 0 <= value < n_classes:
                problems.append((number, f"label {value} outside [0, {n_classes})"))
                continue
            if not text.strip():
                problems.append((number, "empty text"))
                continue
            rows.append(LabeledText(value, text, number))
    if not rows and not problems:
        problems.append((0, "no rows"))
    if problems:
        for number, reason in problems:
            logger.warning(f"Rejected {path}:{number}: {reason}")
        raise DataFormatError(str(path), problems)
    logger.info(f"Loaded {len(rows)} labeled rows from {path}")
    return rows


def encode_classification(rows: Sequence[LabeledText], vocab: Vocab, max_seq_len: int) -> FinetuneBatch:
    """All rows as one FinetuneBatch: [CLS] text [SEP], segment 0, padded to max_seq_len."""
    if not rows:
        raise DomainError("no classification rows to encode")
    sequences, truncated = [], 0
    for row in rows:
        ids, cut = pack_single(vocab.encode(row.text), max_seq_len)
        sequences.append(ids)
        truncated += cut
    if truncated:
        logger.info(f"Truncated {truncated} rows to max_seq_len={max_seq_len}")
    token_ids = _pad(sequences, max_seq_len, PAD_ID)
    return FinetuneBatch(
        token_ids=token_ids,
        segment_ids=np.zeros_like(token_ids),
        attention_mask=(token_ids != PAD_ID).astype(np.int64),
        class_labels=np.asarray([row.label for row in rows]),
    )


def take_rows(batch: FinetuneBatch, index: np.ndarray) -> FinetuneBatch:
    return FinetuneBatch(batch.token_ids[index], batch.segment_ids[index],
                         batch.attention_mask[index], batch.class_labels[index])


def classification_batches(data: FinetuneBatch, batch_size: int,
                           rng: Optional[np.random.Generator] = None) -> Iterator[FinetuneBatch]:
    """Minibatches over the rows of ``data``, shuffled when ``rng`` is given."""
    n = data.token_ids.shape[0]
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch_size):
        yield take_rows(data, order[start:start + batch_size])
