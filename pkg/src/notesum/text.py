"""Low-level text utilities: normalization, character-trigram features,
offset-preserving tokenization and sentence segmentation.

Everything here is pure and offset-faithful: segmenting then re-joining
sentences with the skipped whitespace reproduces the input byte-exactly,
which the masking round-trip depends on.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

_TOKEN_RE = re.compile(r"\S+")
_SENTENCE_END_RE = re.compile(r"[.!?]+(?=\s)")
_WORD_RE = re.compile(r"[A-Za-z0-9]+(?:['\-][A-Za-z0-9]+)*")


@dataclass(frozen=True)
class Token:
    """A whitespace token with character offsets into its sentence."""

    text: str
    start: int
    end: int


def normalize(text: str) -> str:
    """Lowercase and collapse all whitespace runs to single spaces."""
    return " ".join(text.lower().split())


def char_trigrams(text: str) -> Counter:
    """Multiset of character trigrams; strings shorter than 3 chars
    contribute themselves as a single gram."""
    if len(text) >= 3:
        return Counter(text[i : i + 3] for i in range(len(text) - 2))
    return Counter({text: 1})


def trigram_jaccard(a: str, b: str) -> float:
    """Jaccard similarity of the character-trigram multisets of two strings.

    Symmetric, 1.0 for equal strings, 0.0 for disjoint trigram sets.
    """
    if not a or not b:
        raise ValueError("trigram_jaccard requires non-empty strings")
    if a == b:
        return 1.0
    ca = char_trigrams(a)
    cb = char_trigrams(b)
    inter = sum((ca & cb).values())
    if inter == 0:
        return 0.0
    union = sum(ca.values()) + sum(cb.values()) - inter
    return inter / union


def tokenize(text: str) -> list[Token]:
    """Whitespace tokens with character offsets into ``text``."""
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def word_tokens(text: str) -> list[str]:
    """Lowercased alphanumeric word tokens (punctuation stripped)."""
    return [m.group().lower() for m in _WORD_RE.finditer(text)]


def segment_sentences(text: str) -> list[tuple[str, int, int]]:
    """Split ``text`` into sentences, returning (sentence, start, end) triples.

    A sentence ends after a run of terminal punctuation followed by
    whitespace, or at a newline (notes treat line breaks as record
    boundaries). Offsets cover the trimmed sentence; everything between
    consecutive sentences is pure whitespace, so the concatenation of the
    sentences plus the inter-sentence gaps reproduces ``text`` exactly.
    """
    if not text:
        return []
    cuts = set()
    for m in _SENTENCE_END_RE.finditer(text):
        cuts.add(m.end())
    for i, ch in enumerate(text):
        if ch == "\n":
            cuts.add(i)
            cuts.add(i + 1)
    sentences: list[tuple[str, int, int]] = []
    prev = 0
    for cut in sorted(cuts) + [len(text)]:
        if cut <= prev:
            continue
        chunk = text[prev:cut]
        stripped = chunk.strip()
        if stripped:
            start = prev + len(chunk) - len(chunk.lstrip())
            sentences.append((stripped, start, start + len(stripped)))
        prev = cut
    return sentences


def join_sentences(text: str, sentences: Iterable[tuple[str, int, int]]) -> str:
    """Reassemble ``text`` from its segmentation (identity; used as an oracle)."""
    parts = []
    prev = 0
    for sentence, start, end in sentences:
        parts.append(text[prev:start])
        parts.append(sentence)
        prev = end
    parts.append(text[prev:])
    return "".join(parts)
