"""Tokenization and hashed word/character n-gram features."""

from __future__ import annotations

import unicodedata
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

MAX_NGRAM = 8
MAX_BUCKETS = 1 << 26


@dataclass(frozen=True)
class FeatureConfig:
    """Feature extraction settings.

    Parameters
    ----------
    min_ngram, max_ngram : int
        Character n-gram lengths. ``min_ngram == 0`` or ``max_ngram == 0``
        disables subword features.
    bucket_count : int
        Size of the hashed table shared by character and word n-grams.
    word_ngrams : int
        Highest word n-gram order; 1 means unigrams only.
    lowercase : bool
        Lowercase tokens before lookup.
    """

    min_ngram: int = 2
    max_ngram: int = 5
    bucket_count: int = 1 << 21
    word_ngrams: int = 2
    lowercase: bool = True

    def __post_init__(self):
        if self.min_ngram < 0 or self.max_ngram < self.min_ngram:
            raise ValueError(f"need 0 <= min_ngram <= max_ngram, got {self.min_ngram}, {self.max_ngram}")
        if self.max_ngram > MAX_NGRAM:
            raise ValueError(f"max_ngram must be <= {MAX_NGRAM}")
        if not 1 <= self.bucket_count <= MAX_BUCKETS:
            raise ValueError(f"bucket_count must be in [1, 2^26], got {self.bucket_count}")
        if self.word_ngrams < 1:
            raise ValueError("word_ngrams must be >= 1")

    @property
    def subwords(self) -> bool:
        return self.min_ngram > 0 and self.max_ngram > 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FeatureVector:
    """Feature indices of one text.

    `word_indices` index the vocabulary; `ngram_indices` (word n-grams) and
    `subword_indices` (character n-grams) index the hashed bucket table.
    """

    word_indices: tuple[int, ...] = ()
    ngram_indices: tuple[int, ...] = ()
    subword_indices: tuple[int, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.word_indices) + len(self.ngram_indices) + len(self.subword_indices)

    def rows(self, vocab_size: int) -> list[int]:
        """Indices into an input matrix laid out as ``[vocab rows; bucket rows]``."""
        return [*self.word_indices, *(vocab_size + i for i in self.ngram_indices),
                *(vocab_size + i for i in self.subword_indices)]


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Whitespace tokens with surrounding punctuation stripped.

    Punctuation inside a token (hyphens, apostrophes) is kept.
    """
    tokens = []
    for raw in text.split():
        start, end = 0, len(raw)
        while start < end and _is_punct(raw[start]):
            start += 1
        while end > start and _is_punct(raw[end - 1]):
            end -= 1
        token = raw[start:end]
        if token:
            tokens.append(token.lower() if lowercase else token)
    return tokens


def char_ngrams(token: str, min_n: int, max_n: int) -> list[str]:
    """All substrings of ``"<token>"`` with length in ``[min_n, max_n]``, shortest first.

    The whole wrapped token is excluded.
    """
    if min_n <= 0 or max_n <= 0:
        return []
    wrapped = f"<{token}>"
    grams = []
    for n in range(min_n, max_n + 1):
        for i in range(len(wrapped) - n + 1):
            if n == len(wrapped):
                continue
            grams.append(wrapped[i:i + n])
    return grams


@lru_cache(maxsize=1 << 20)
def fnv1a_64(s: str) -> int:
    h = FNV_OFFSET
    for byte in s.encode("utf-8"):
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def hash_feature(s: str, bucket_count: int) -> int:
    if bucket_count < 1:
        raise ValueError("bucket_count must be >= 1")
    return fnv1a_64(s) % bucket_count


def word_ngrams(tokens: Sequence[str], max_order: int) -> list[str]:
    return [" ".join(tokens[i:i + n]) for n in range(2, max_order + 1)
            for i in range(len(tokens) - n + 1)]


def featurize(text: str, vocab: Mapping[str, int], config: FeatureConfig) -> FeatureVector:
    """Map `text` to vocabulary ids, hashed word n-grams and hashed character n-grams.

    Out-of-vocabulary tokens contribute only through their character n-grams
    (and the word n-grams they take part in).
    """
    tokens = tokenize(text, config.lowercase)
    buckets = config.bucket_count
    word_ids = tuple(vocab[t] for t in tokens if t in vocab)
    ngram_ids = tuple(hash_feature(g, buckets) for g in word_ngrams(tokens, config.word_ngrams))
    sub_ids: tuple[int, ...] = ()
    if config.subwords:
        sub_ids = tuple(hash_feature(g, buckets) for t in tokens
                        for g in char_ngrams(t, config.min_ngram, config.max_ngram))
    return FeatureVector(word_ids, ngram_ids, sub_ids)
