"""N-gram features: term dictionary construction and multi-hot encoding.

The feature space is the set of unique 1/2/3-gram terms found in the
training texts, filtered by a minimum total-occurrence threshold.  A
document is encoded as a binary vector with ones at the positions of the
dictionary terms it contains.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError, ParseError
from .textprep import TokenSequence

DEFAULT_MIN_COUNT = 3
NGRAM_SIZES = (1, 2, 3)


def ngrams(tokens: TokenSequence, n: int) -> list[str]:
    """Contiguous n-token windows joined with single spaces, in order."""
    if n not in NGRAM_SIZES:
        raise ConfigurationError(f"n must be one of {NGRAM_SIZES}, got {n}")
    if n == 1:
        return list(tokens)
    return [" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def ngram_set(tokens: TokenSequence) -> set[str]:
    """Unique terms over all 1-, 2-, and 3-gram windows."""
    terms: set[str] = set()
    for n in NGRAM_SIZES:
        terms.update(ngrams(tokens, n))
    return terms


@dataclass(frozen=True)
class Dictionary:
    """Immutable term index with deterministic positions.

    Positions are assigned by descending total occurrence count, ties by
    lexicographic term order, so the same corpus always yields the same
    layout regardless of document order.
    """

    index: dict[str, int]
    counts: dict[str, int]
    min_count: int
    size: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "size", len(self.index))

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def __len__(self) -> int:
        return self.size

    def terms(self) -> list[str]:
        """Terms in position order."""
        out = [""] * self.size
        for term, pos in self.index.items():
            out[pos] = term
        return out

    def to_tsv(self) -> str:
        lines = [f"{pos}\t{term}\t{self.counts[term]}" for pos, term in enumerate(self.terms())]
        return "\n".join([f"# min_count={self.min_count}"] + lines) + "\n"

    @classmethod
    def from_tsv(cls, text: str) -> "Dictionary":
        index: dict[str, int] = {}
        counts: dict[str, int] = {}
        min_count = DEFAULT_MIN_COUNT
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            if line.startswith("#"):
                if "min_count=" in line:
                    min_count = int(line.split("min_count=", 1)[1].strip())
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError("expected 'position<TAB>term<TAB>count'", line=lineno)
            pos, term, count = int(parts[0]), parts[1], int(parts[2])
            index[term] = pos
            counts[term] = count
        return cls(index=index, counts=counts, min_count=min_count)

    def save_tsv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_tsv(), encoding="utf-8")

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_tsv().encode("utf-8")).hexdigest()


def count_terms(tokens: TokenSequence) -> Counter:
    """Occurrence counts of every 1/2/3-gram term in one token sequence."""
    counter: Counter = Counter()
    for n in NGRAM_SIZES:
        counter.update(ngrams(tokens, n))
    return counter


def build_dictionary(docs: list[TokenSequence], min_count: int = DEFAULT_MIN_COUNT) -> Dictionary:
    """Build the term dictionary from training token sequences.

    Counts every occurrence across the whole training set (not document
    frequency) and drops terms occurring fewer than ``min_count`` times.
    """
    if min_count < 1:
        raise ConfigurationError(f"min_count must be >= 1, got {min_count}")
    totals: Counter = Counter()
    for tokens in docs:
        totals.update(count_terms(tokens))
    kept = [(term, count) for term, count in totals.items() if count >= min_count]
    kept.sort(key=lambda item: (-item[1], item[0]))
    index = {term: pos for pos, (term, _) in enumerate(kept)}
    counts = dict(kept)
    return Dictionary(index=index, counts=counts, min_count=min_count)


@dataclass(frozen=True)
class FeatureVector:
    """Multi-hot encoding of a term set in dictionary space."""

    dimension: int
    on_positions: tuple[int, ...]

    def __post_init__(self):
        bad = [p for p in self.on_positions if p >= self.dimension or p < 0]
        if bad:
            raise ConfigurationError(f"on_positions out of range: {bad}")


def encode(terms: set[str], dictionary: Dictionary) -> FeatureVector:
    """Encode a term set; out-of-dictionary terms are ignored."""
    positions = sorted(dictionary.index[t] for t in terms if t in dictionary.index)
    return FeatureVector(dimension=dictionary.size, on_positions=tuple(positions))
