"""Tests for the tokenizer, corpus reading, masking, NSP pairing and TSV loading."""

import numpy as np
import pytest

from constants import CLS_ID, IGNORE_INDEX, MASK_ID, NUM_SPECIAL_TOKENS, PAD_ID, SEP_ID, SPECIAL_TOKENS, UNK_ID
from exceptions import DataFormatError, DomainError
from utils.data_pipeline import (
    classification_batches,
    encode_classification,
    load_corpus,
    load_labeled_tsv,
    make_nsp_pairs,
    mask_tokens,
    pack_pair,
    pack_single,
    read_documents,
    tokenize_and_mask,
)
from utils.synthetic import separable_classification, topic_corpus, write_lines, write_tsv
from utils.tokenizer import Vocab, tokenize


@pytest.fixture
def vocab():
    return Vocab.build(["the cat sat", "the cat ran", "a dog sat"], min_freq=1)


class TestTokenizer:

    def test_lowercase_whitespace_split(self):
        assert tokenize("  The  Cat\tsat\n") == ["the", "cat", "sat"]

    def test_specials_first_and_frequency_order(self, vocab):
        assert tuple(vocab.tokens[:NUM_SPECIAL_TOKENS]) == SPECIAL_TOKENS
        assert vocab.tokens[NUM_SPECIAL_TOKENS:NUM_SPECIAL_TOKENS + 3] == ["cat", "sat", "the"]

    def test_min_freq_and_max_size(self):
        v = Vocab.build(["a a b b c"], min_freq=2)
        assert "c" not in v.index
        assert len(Vocab.build(["a a b b c c"], min_freq=1, max_size=NUM_SPECIAL_TOKENS + 1)) == NUM_SPECIAL_TOKENS + 1

    def test_unknown_tokens(self, vocab):
        assert vocab.encode("cat zebra") == [vocab.index["cat"], UNK_ID]

    def test_decode_inverts_encode(self, vocab):
        assert vocab.decode(vocab.encode("the dog sat")) == ["the", "dog", "sat"]

    def test_save_and_load(self, vocab, tmp_path):
        path = tmp_path / "vocab.txt"
        vocab.save(path)
        assert Vocab.load(path).tokens == vocab.tokens

    def test_load_rejects_bad_files(self, tmp_path):
        path = write_lines(tmp_path / "vocab.txt", ["[PAD]", "x"])
        with pytest.raises(DataFormatError):
            Vocab.load(path)
        path = write_lines(tmp_path / "spaces.txt", list(SPECIAL_TOKENS) + ["two words"])
        with pytest.raises(DataFormatError) as info:
            Vocab.load(path)
        assert info.value.problems[0][0] == NUM_SPECIAL_TOKENS + 1

    def test_duplicate_tokens(self):
        with pytest.raises(DomainError):
            Vocab(list(SPECIAL_TOKENS) + ["a", "a"])


class TestCorpus:

    def test_documents_split_on_blank_lines(self):
        docs = read_documents(["one", "two", "", "", "three", ""])
        assert docs == [["one", "two"], ["three"]]

    def test_max_lines(self):
        assert read_documents(["a", "b", "", "c"], max_lines=2) == [["a", "b"]]

    def test_empty_corpus(self):
        with pytest.raises(DomainError):
            read_documents(["", "  "])

    def test_load_corpus(self, tmp_path):
        path = write_lines(tmp_path / "corpus.txt", topic_corpus(n_sentences=12, sentences_per_doc=4))
        docs = load_corpus(path)
        assert len(docs) == 3
        assert all(len(d) == 4 for d in docs)


class TestMasking:

    def test_selection_and_replacement_fractions(self):
        rng = np.random.default_rng(0)
        vocab_size = 50
        selected = masked = kept = 0
        total = 0
        for _ in range(400):
            ids = rng.integers(NUM_SPECIAL_TOKENS, vocab_size, size=40)
            out, labels = mask_tokens(ids, np.ones(40, dtype=bool), vocab_size, rng)
            chosen = labels != IGNORE_INDEX
            total += ids.size
            selected += chosen.sum()
            masked += (out[chosen] == MASK_ID).sum()
            kept += (out[chosen] == ids[chosen]).sum()
            np.testing.assert_array_equal(labels[chosen], ids[chosen])
            np.testing.assert_array_equal(out[~chosen], ids[~chosen])
        assert selected / total == pytest.approx(0.15, abs=0.01)
        assert masked / selected == pytest.approx(0.8, abs=0.03)
        # unchanged tokens plus random replacements that hit the original id
        assert kept / selected == pytest.approx(0.1 + 0.1 / (vocab_size - NUM_SPECIAL_TOKENS), abs=0.03)

    def test_only_candidates_are_selected(self):
        rng = np.random.default_rng(1)
        ids = np.arange(10, 30)
        candidates = np.zeros(20, dtype=bool)
        candidates[:5] = True
        for _ in range(50):
            _, labels = mask_tokens(ids, candidates, 40, rng, mask_prob=0.5)
            assert np.all(labels[5:] == IGNORE_INDEX)

    def test_no_candidates(self):
        out, labels = mask_tokens(np.array([2, 3]), np.zeros(2, dtype=bool), 10, np.random.default_rng(0))
        np.testing.assert_array_equal(out, [2, 3])
        assert np.all(labels == IGNORE_INDEX)

    def test_random_replacements_are_not_special(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            ids = np.full(20, 7)
            out, _ = mask_tokens(ids, np.ones(20, dtype=bool), 12, rng)
            assert np.all((out == MASK_ID) | (out >= NUM_SPECIAL_TOKENS))


class TestNSP:

    def test_labels_and_balance(self, vocab):
        docs = [["the cat sat", "the cat ran", "a dog sat"], ["a dog ran", "the dog sat"]]
        rng = np.random.default_rng(3)
        labels = [p.is_next for _ in range(200) for p in make_nsp_pairs(docs, vocab, rng)]
        assert np.mean(labels) == pytest.approx(0.5, abs=0.05)

    def test_positive_pairs_are_consecutive(self, vocab):
        docs = [["the cat sat", "the cat ran", "a dog sat"]]
        encoded = [vocab.encode(s) for s in docs[0]]
        for pair in make_nsp_pairs(docs, vocab, np.random.default_rng(4)):
            i = encoded.index(pair.first)
            if pair.is_next:
                assert pair.second == encoded[i + 1]
            else:
                assert pair.second not in (encoded[i], encoded[i + 1])

    def test_needs_three_sentences(self, vocab):
        with pytest.raises(DomainError):
            make_nsp_pairs([["the cat", "a dog"]], vocab, np.random.default_rng(0))

    def test_needs_a_consecutive_pair(self, vocab):
        with pytest.raises(DomainError):
            make_nsp_pairs([["the cat"], ["a dog"], ["sat"]], vocab, np.random.default_rng(0))


class TestPacking:

    def test_pack_pair_layout(self):
        ids, segments, cut = pack_pair([10, 11], [12], 8)
        assert ids == [CLS_ID, 10, 11, SEP_ID, 12, SEP_ID]
        assert segments == [0, 0, 0, 0, 1, 1]
        assert not cut

    def test_pack_pair_trims_longer_segment(self):
        ids, segments, cut = pack_pair([5] * 10, [6] * 3, 10)
        assert cut and len(ids) == 10
        assert ids.count(6) == 3
        assert len(segments) == len(ids)

    def test_pack_single_truncates(self):
        ids, cut = pack_single(list(range(10, 20)), 6)
        assert ids == [CLS_ID, 10, 11, 12, 13, SEP_ID]
        assert cut

    def test_pretrain_batches(self, vocab):
        docs = read_documents(topic_corpus(n_sentences=40, sentences_per_doc=5))
        v = Vocab.build([s for d in docs for s in d], min_freq=1)
        batches = list(tokenize_and_mask(docs, v, np.random.default_rng(0), 16, 8))
        assert sum(b.token_ids.shape[0] for b in batches) == 32
        batch = batches[0]
        assert batch.token_ids.shape == (8, 16)
        assert np.all(batch.token_ids[:, 0] == CLS_ID)
        pad = batch.attention_mask == 0
        assert np.all(batch.token_ids[pad] == PAD_ID)
        assert np.all(batch.mlm_labels[pad] == IGNORE_INDEX)
        assert set(np.unique(batch.nsp_labels)) <= {0, 1}

    def test_sequence_too_short(self, vocab):
        with pytest.raises(DomainError):
            next(tokenize_and_mask([["a b", "c d", "e f"]], vocab, np.random.default_rng(0), 3, 2))


class TestLabeledData:

    def test_load_and_encode(self, vocab, tmp_path):
        path = write_tsv(tmp_path / "train.tsv", [(0, "the cat sat"), (1, "a dog ran")])
        rows = load_labeled_tsv(path, 2)
        batch = encode_classification(rows, vocab, 8)
        assert batch.token_ids.shape == (2, 8)
        np.testing.assert_array_equal(batch.class_labels, [0, 1])
        assert batch.token_ids[0, 4] == SEP_ID
        assert np.all(batch.segment_ids == 0)

    def test_every_bad_row_reported(self, tmp_path):
        path = write_lines(tmp_path / "bad.tsv", ["0\tok", "no tab here", "x\ttext", "5\ttext", "1\t  "])
        with pytest.raises(DataFormatError) as info:
            load_labeled_tsv(path, 2)
        assert [line for line, _ in info.value.problems] == [2, 3, 4, 5]

    def test_regression_labels_unbounded(self, tmp_path):
        path = write_tsv(tmp_path / "reg.tsv", [(7, "x y")])
        assert load_labeled_tsv(path, 1)[0].label == 7

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("\n")
        with pytest.raises(DataFormatError):
            load_labeled_tsv(path)

    def test_batches_cover_every_row(self, vocab, tmp_path):
        path = write_tsv(tmp_path / "d.tsv", separable_classification(n_rows=23))
        data = encode_classification(load_labeled_tsv(path, 2), vocab, 8)
        sizes = [b.token_ids.shape[0] for b in classification_batches(data, 5, np.random.default_rng(0))]
        assert sizes == [5, 5, 5, 5, 3]
