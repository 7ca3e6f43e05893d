"""Similarity scoring and top-fraction filtering of generated pairs.

Each pair is scored against its source with greedy maximum-cosine token
matching over a pluggable embedder (the BERTScore recipe, minus the
frozen transformer) plus an optional second scorer; the combined score
keeps only the best ``keep_fraction`` of the candidates.
"""

from __future__ import annotations

import hashlib
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, ParseError
from .text import trigram_jaccard

DEFAULT_KEEP_FRACTION = 0.15

Scorer = Callable[[str, str], float]


class EmbeddingProvider(ABC):
    """Token -> fixed-dimension vector; same token, same vector."""

    @abstractmethod
    def embed(self, token: str) -> np.ndarray: ...


class OneHotEmbedding(EmbeddingProvider):
    """Exact-match embeddings: distinct tokens get distinct basis vectors.

    Cosine similarity is 1 for equal tokens and 0 otherwise, which reduces
    greedy matching to plain token overlap.
    """

    def __init__(self, dim: int = 4096):
        self._dim = dim
        self._ids: dict[str, int] = {}

    def embed(self, token: str) -> np.ndarray:
        idx = self._ids.setdefault(token, len(self._ids))
        if idx >= self._dim:
            raise ConfigurationError(
                f"one-hot vocabulary exceeded {self._dim} tokens; raise dim"
            )
        vec = np.zeros(self._dim)
        vec[idx] = 1.0
        return vec


def _token_rng(token: str, seed: int) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{token}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


class HashedRandomEmbedding(EmbeddingProvider):
    """Deterministic pseudo-random unit vectors keyed by (seed, token)."""

    def __init__(self, seed: int = 0, dim: int = 64):
        self._seed = seed
        self._dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            vec = _token_rng(token, self._seed).standard_normal(self._dim)
            vec /= np.linalg.norm(vec)
            self._cache[token] = vec
        return vec


class FileEmbedding(EmbeddingProvider):
    """Precomputed vectors in word2vec text format: ``token v1 v2 ...``.

    Tokens absent from the file fall back to a deterministic hashed
    vector so unknown words still match themselves and nothing else.
    """

    def __init__(self, path: Union[str, Path]):
        vectors: dict[str, np.ndarray] = {}
        dim: Optional[int] = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                try:
                    vec = np.array([float(x) for x in parts[1:]])
                except ValueError:
                    raise ParseError(
                        "non-numeric vector component", path=str(path), line=lineno
                    ) from None
                if vec.size == 0 or not np.isfinite(vec).all() or not vec.any():
                    raise ParseError(
                        f"vector for {parts[0]!r} is empty, non-finite or zero",
                        path=str(path),
                        line=lineno,
                    )
                if dim is None:
                    dim = vec.size
                elif vec.size != dim:
                    raise ParseError(
                        f"vector for {parts[0]!r} has dimension {vec.size}, expected {dim}",
                        path=str(path),
                        line=lineno,
                    )
                vectors[parts[0]] = vec
        if not vectors:
            raise ConfigurationError(f"embedding file {path} contains no vectors")
        self._vectors = vectors
        self._dim = int(dim)
        self._fallback = HashedRandomEmbedding(seed=0, dim=self._dim)

    def embed(self, token: str) -> np.ndarray:
        vec = self._vectors.get(token)
        if vec is None:
            return self._fallback.embed(token)
        return vec


def make_embedder(spec: str) -> EmbeddingProvider:
    """Build a provider from its CLI name: ``onehot``,
    ``hashed-random(seed)`` (or ``hashed-random:seed``) or ``file:<path>``."""
    if spec == "onehot":
        return OneHotEmbedding()
    if spec.startswith("hashed-random"):
        seed = spec[len("hashed-random") :].strip("():")
        try:
            return HashedRandomEmbedding(seed=int(seed) if seed else 0)
        except ValueError:
            raise ConfigurationError(f"bad hashed-random seed in {spec!r}") from None
    if spec.startswith("file:"):
        return FileEmbedding(spec[len("file:") :])
    raise ConfigurationError(
        f"unknown embedder {spec!r}; expected onehot, hashed-random(seed) or file:<path>"
    )


def greedy_match_f1(
    candidate_tokens: Sequence[str],
    reference_tokens: Sequence[str],
    embedder: EmbeddingProvider,
    idf: Optional[Mapping[str, float]] = None,
) -> tuple[float, float, float]:
    """Greedy maximum-cosine matching of candidate against reference tokens.

    Precision averages each candidate token's best cosine similarity to
    the reference; recall is the mirror image; F1 is their harmonic mean.
    ``idf`` optionally weights the averages per token. With one-hot
    embeddings this reduces to token-overlap precision/recall/F1.
    """
    if not candidate_tokens or not reference_tokens:
        raise ValueError("greedy_match_f1 requires non-empty token lists")
    cand = np.stack([embedder.embed(t) for t in candidate_tokens])
    ref = np.stack([embedder.embed(t) for t in reference_tokens])
    cand = cand / np.maximum(np.linalg.norm(cand, axis=1, keepdims=True), 1e-12)
    ref = ref / np.maximum(np.linalg.norm(ref, axis=1, keepdims=True), 1e-12)
    sims = cand @ ref.T

    def weights(tokens: Sequence[str]) -> np.ndarray:
        if idf is None:
            return np.ones(len(tokens))
        return np.array([max(float(idf.get(t, 0.0)), 0.0) for t in tokens])

    w_cand = weights(candidate_tokens)
    w_ref = weights(reference_tokens)
    if w_cand.sum() <= 0 or w_ref.sum() <= 0:
        w_cand = np.ones(len(candidate_tokens))
        w_ref = np.ones(len(reference_tokens))
    precision = float(sims.max(axis=1) @ w_cand / w_cand.sum())
    recall = float(sims.max(axis=0) @ w_ref / w_ref.sum())
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def compute_idf(texts: Iterable[str]) -> dict[str, float]:
    """Smoothed inverse document frequencies over whitespace tokens."""
    doc_freq: dict[str, int] = {}
    n_docs = 0
    for text in texts:
        n_docs += 1
        for token in set(text.split()):
            doc_freq[token] = doc_freq.get(token, 0) + 1
    return {
        token: math.log((n_docs + 1) / (freq + 1)) + 1.0
        for token, freq in doc_freq.items()
    }


class EmbeddingScorer:
    """Scorer adapter: greedy-match F1 of candidate vs reference texts."""

    def __init__(self, embedder: EmbeddingProvider, idf: Optional[Mapping[str, float]] = None):
        self._embedder = embedder
        self._idf = idf

    def __call__(self, candidate: str, reference: str) -> float:
        cand = candidate.lower().split()
        ref = reference.lower().split()
        if not cand or not ref:
            return 0.0
        return greedy_match_f1(cand, ref, self._embedder, idf=self._idf)[2]


def trigram_scorer(candidate: str, reference: str) -> float:
    """Character-trigram Jaccard of the two texts (the default second
    scorer standing in for a learned metric)."""
    if not candidate.strip() or not reference.strip():
        return 0.0
    return trigram_jaccard(candidate.lower(), reference.lower())


@dataclass(frozen=True)
class FilterConfig:
    """Keep fraction and how scorer outputs combine."""

    keep_fraction: float = DEFAULT_KEEP_FRACTION
    weights: Mapping[str, float] = field(
        default_factory=lambda: {"embedding": 0.5, "trigram": 0.5}
    )

    def __post_init__(self):
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ConfigurationError(
                f"keep_fraction must be in (0, 1], got {self.keep_fraction}"
            )
        total = sum(self.weights.values())
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ConfigurationError(f"scorer weights must sum to 1, got {total}")
        if any(w < 0 for w in self.weights.values()):
            raise ConfigurationError("scorer weights must be non-negative")


def combined_score(
    scores: Mapping[str, float], weights: Mapping[str, float]
) -> float:
    """Weighted mean of per-scorer values; zero-weight scorers are ignored."""
    total = 0.0
    for name, weight in weights.items():
        if weight == 0.0:
            continue
        if name not in scores:
            raise ConfigurationError(f"unknown scorer {name!r} in weights")
        total += weight * scores[name]
    return total


def score_pair(
    candidate: str,
    reference: str,
    scorers: Mapping[str, Scorer],
    weights: Mapping[str, float],
) -> dict[str, float]:
    """Per-scorer values plus their weighted combination under 'combined'."""
    for name in weights:
        if weights[name] != 0.0 and name not in scorers:
            raise ConfigurationError(f"unknown scorer {name!r} in weights")
    values = {name: float(fn(candidate, reference)) for name, fn in scorers.items()}
    values["combined"] = combined_score(values, weights)
    return values


def filter_top_fraction(scored: Sequence[tuple[object, float]], keep_fraction: float):
    """Keep the ceil(keep_fraction * n) highest-scoring items.

    Ties break by input position (earlier wins); the survivors come back
    in their original relative order.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    n = len(scored)
    if n == 0:
        return []
    keep = math.ceil(keep_fraction * n)
    ranked = sorted(range(n), key=lambda i: (-scored[i][1], i))[:keep]
    return [scored[i][0] for i in sorted(ranked)]
