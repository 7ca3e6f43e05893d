"""Paraphrase generation with instruction templates and self-debiased decoding.

A source sentence is wrapped in an instruction for the target label (SAME
THING) while the remaining labels act as counter instructions; at each
decoding step the counter distributions are subtracted from the target
distribution so the continuation fits only the intended instruction. The
backbone is any object implementing :class:`LanguageModel`; a small
cue-conditioned bigram model ships for tests and demos.
"""

from __future__ import annotations

import enum
import json
import logging
import re
from abc import ABC, abstractmethod
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (
    BackendError,
    ConfigurationError,
    DataError,
    ParseError,
    TemplateError,
)
from .seeding import substream
from .text import segment_sentences, word_tokens

log = logging.getLogger(__name__)

TERM_1 = "[Term 1]"
TERM_2 = "[Term 2]"
SOURCE = "[Source]"
CONTINUATION_MARKER = "Sentence 2:"

STOP_PUNCTUATION = (".", "!", "?")
MAX_REQUIRED_TERMS = 2


class LabelId(enum.Enum):
    """The three instruction labels and their numeric values."""

    SAME_THING = 1.0
    SOMEWHAT_SIMILAR = 0.5
    DIFFERENT_TOPICS = 0.0

    @classmethod
    def from_value(cls, value: float) -> "LabelId":
        for label in cls:
            if label.value == float(value):
                return label
        raise DataError(f"unknown label value {value!r}; expected 1, 0.5 or 0")

    def file_tag(self) -> str:
        return {self.SAME_THING: "1", self.SOMEWHAT_SIMILAR: "0.5", self.DIFFERENT_TOPICS: "0"}[self]


@dataclass(frozen=True)
class InstructionTemplate:
    """An instruction text with [Term 1]/[Term 2]/[Source] placeholders,
    ending at the 'Sentence 2:' continuation point."""

    label: LabelId
    text: str

    def __post_init__(self):
        if not self.text.rstrip().endswith(CONTINUATION_MARKER):
            raise ConfigurationError(
                f"template for label {self.label.name} must end with "
                f"{CONTINUATION_MARKER!r}"
            )
        if SOURCE not in self.text:
            raise ConfigurationError(
                f"template for label {self.label.name} is missing {SOURCE}"
            )
        if self.label is LabelId.SAME_THING and self.arity() and "keep" not in self.text.lower():
            raise ConfigurationError(
                "the SAME_THING template must instruct the model to keep its terms"
            )

    def arity(self) -> int:
        return int(TERM_1 in self.text) + int(TERM_2 in self.text)


class TemplateSet:
    """Templates indexed by (label, number of required terms).

    The packaged ``templates/`` directory provides editable defaults,
    one ``label<L>_terms<N>.txt`` file per slot. Only the SAME_THING
    wording is fixed by the generation protocol; the other labels'
    instructions are free text. A user-supplied directory overrides the
    defaults slot by slot; missing files fall back to the defaults.
    """

    _FILE_RE = re.compile(r"label(1|0\.5|0)_terms([012])\.txt$")

    def __init__(self, templates: Mapping[tuple[LabelId, int], InstructionTemplate]):
        self._templates = dict(templates)

    @classmethod
    def _parse_dir(cls, entries) -> dict[tuple[LabelId, int], InstructionTemplate]:
        templates: dict[tuple[LabelId, int], InstructionTemplate] = {}
        for entry in sorted(entries, key=lambda e: e.name):
            m = cls._FILE_RE.match(entry.name)
            if m is None:
                log.warning("ignoring template file with unrecognized name: %s", entry)
                continue
            label = LabelId.from_value(float(m.group(1)))
            arity = int(m.group(2))
            text = entry.read_text(encoding="utf-8").strip()
            template = InstructionTemplate(label=label, text=text)
            if template.arity() != arity:
                raise ConfigurationError(
                    f"{entry}: template declares {arity} terms but uses "
                    f"{template.arity()} placeholders"
                )
            templates[(label, arity)] = template
        return templates

    @classmethod
    def defaults(cls) -> "TemplateSet":
        packaged = resources.files(__package__) / "templates"
        entries = [e for e in packaged.iterdir() if e.name.endswith(".txt")]
        return cls(cls._parse_dir(entries))

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "TemplateSet":
        directory = Path(directory)
        if not directory.is_dir():
            raise ConfigurationError(f"template directory {directory} does not exist")
        templates = dict(cls.defaults()._templates)
        templates.update(cls._parse_dir(directory.glob("*.txt")))
        return cls(templates)

    def write_files(self, directory: Union[str, Path]) -> None:
        """Materialize the current templates as editable files."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for (label, arity), template in self._templates.items():
            name = f"label{label.file_tag()}_terms{arity}.txt"
            (directory / name).write_text(template.text + "\n", encoding="utf-8")

    def get(self, label: LabelId, arity: int) -> InstructionTemplate:
        try:
            return self._templates[(label, arity)]
        except KeyError:
            raise ConfigurationError(
                f"no template for label {label.name} with {arity} terms"
            ) from None


@dataclass(frozen=True)
class GenerationConfig:
    """Decoding settings: output cap, self-debias strength, stop rule."""

    max_output_tokens: int = 40
    lam: float = 1.0
    greedy: bool = True
    top_k: Optional[int] = None
    seed: int = 0
    stop_punctuation: tuple[str, ...] = STOP_PUNCTUATION

    def __post_init__(self):
        if self.max_output_tokens < 1:
            raise ConfigurationError(
                f"max_output_tokens must be >= 1, got {self.max_output_tokens}"
            )
        if self.lam < 0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lam}")
        if self.top_k is not None and self.top_k < 1:
            raise ConfigurationError(f"top_k must be >= 1, got {self.top_k}")


@dataclass
class GeneratedPair:
    """A source sentence with its generated paraphrase and bookkeeping."""

    source: str
    generated: str
    label: LabelId
    required_terms: list[str] = field(default_factory=list)
    scores: dict[str, float] = field(default_factory=dict)
    doc_id: str = ""

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "source": self.source,
            "generated": self.generated,
            "label": self.label.value,
            "required_terms": self.required_terms,
            "scores": self.scores,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "GeneratedPair":
        return cls(
            source=record["source"],
            generated=record["generated"],
            label=LabelId.from_value(record["label"]),
            required_terms=list(record.get("required_terms", [])),
            scores=dict(record.get("scores", {})),
            doc_id=record.get("doc_id", ""),
        )


class LanguageModel(ABC):
    """Next-token interface any generative backend must implement.

    ``next_token_distribution`` returns a probability vector over
    ``vocabulary()`` (non-negative, summing to 1 within 1e-9) given a
    token prefix. Implementations must be safe for concurrent read-only
    queries.
    """

    @abstractmethod
    def vocabulary(self) -> Sequence[str]: ...

    @abstractmethod
    def next_token_distribution(self, prefix: Sequence[str]) -> np.ndarray: ...


class CueBigramLM(LanguageModel):
    """Bigram toy model whose tables are switched by a cue word in the prefix.

    The transition table is keyed by (cue, previous token); the cue is the
    last prefix token found in ``cues`` (None when absent), which lets an
    instruction wording steer continuations the way a real LLM would.
    Unseen contexts fall back to the cue-free table, then to uniform.
    """

    def __init__(
        self,
        vocab: Sequence[str],
        table: Mapping[tuple[Optional[str], str], Mapping[str, float]],
        cues: Iterable[str] = (),
        smoothing: float = 0.01,
    ):
        self._vocab = tuple(dict.fromkeys(vocab))
        if not self._vocab:
            raise ConfigurationError("vocabulary must be non-empty")
        self._ids = {w: i for i, w in enumerate(self._vocab)}
        self._cues = frozenset(cues)
        self._smoothing = float(smoothing)
        self._table: dict[tuple[Optional[str], str], np.ndarray] = {}
        for (cue, prev), weights in table.items():
            row = np.full(len(self._vocab), self._smoothing, dtype=float)
            for token, weight in weights.items():
                if token not in self._ids:
                    raise ConfigurationError(f"table token {token!r} not in vocabulary")
                row[self._ids[token]] += float(weight)
            self._table[(cue, prev)] = row / row.sum()
        uniform = np.full(len(self._vocab), 1.0 / len(self._vocab))
        self._uniform = uniform

    @classmethod
    def from_corpus(
        cls,
        sentences: Iterable[str],
        cues: Iterable[str] = (),
        smoothing: float = 0.01,
    ) -> "CueBigramLM":
        """Train a cue-free bigram table from whitespace-tokenized text.

        Contexts never seen in training (e.g. the instruction's final
        token) back off to the sentence-start distribution, so decoding a
        prompt continuation restarts a corpus-like sentence.
        """
        counts: dict[str, Counter] = defaultdict(Counter)
        starts: Counter = Counter()
        vocab: dict[str, None] = {}
        for sentence in sentences:
            tokens = sentence.split()
            for token in tokens:
                vocab.setdefault(token, None)
            if tokens:
                starts[tokens[0]] += 1
            for prev, nxt in zip(tokens, tokens[1:]):
                counts[prev][nxt] += 1
        if not vocab:
            raise ConfigurationError("cannot train a bigram model on empty text")
        table = {(None, prev): dict(nxts) for prev, nxts in counts.items()}
        # "" cannot be a real token; it keys the start-of-sentence row
        table[(None, "")] = dict(starts)
        return cls(sorted(vocab), table, cues=cues, smoothing=smoothing)

    def vocabulary(self) -> Sequence[str]:
        return self._vocab

    def next_token_distribution(self, prefix: Sequence[str]) -> np.ndarray:
        cue = None
        for token in reversed(prefix):
            if token in self._cues:
                cue = token
                break
        prev = prefix[-1] if prefix else ""
        for key in ((cue, prev), (None, prev), (None, "")):
            row = self._table.get(key)
            if row is not None:
                return row
        return self._uniform


def select_terms(source: str, problem_list: str, max_terms: int = MAX_REQUIRED_TERMS) -> list[str]:
    """Terms shared between a source sentence and its problem list.

    A term is a maximal contiguous word n-gram of the source that also
    occurs contiguously (case-insensitive, punctuation-insensitive) in the
    problem list. Longest matches win, overlapping shorter ones are
    dropped, and at most ``max_terms`` survive. Surfaces keep the source's
    original casing.
    """
    src_words = [m.group() for m in re.finditer(r"[A-Za-z0-9]+(?:['\-][A-Za-z0-9]+)*", source)]
    src_norm = [w.lower() for w in src_words]
    ref_norm = word_tokens(problem_list)
    if not src_norm or not ref_norm:
        return []
    ref_grams: set[tuple[str, ...]] = set()
    for n in range(1, len(src_norm) + 1):
        for i in range(len(ref_norm) - n + 1):
            ref_grams.add(tuple(ref_norm[i : i + n]))
    taken: set[int] = set()
    terms: list[str] = []
    for n in range(len(src_norm), 0, -1):
        for i in range(len(src_norm) - n + 1):
            positions = range(i, i + n)
            if any(p in taken for p in positions):
                continue
            if tuple(src_norm[i : i + n]) in ref_grams:
                terms.append(" ".join(src_words[i : i + n]))
                taken.update(positions)
                if len(terms) == max_terms:
                    return terms
    return terms


def instantiate_template(
    template: InstructionTemplate, terms: Sequence[str], source: str
) -> str:
    """Byte-exact placeholder substitution; the prompt keeps the template's
    'Sentence 2:' continuation ending."""
    needed = template.arity()
    if len(terms) < needed:
        raise TemplateError(
            f"template for label {template.label.name} needs {needed} terms, "
            f"got {len(terms)}"
        )
    prompt = template.text.replace(SOURCE, source)
    if needed >= 1:
        prompt = prompt.replace(TERM_1, terms[0])
    if needed >= 2:
        prompt = prompt.replace(TERM_2, terms[1])
    return prompt


def suppressed_scores(
    p_target: np.ndarray, p_counters: Sequence[np.ndarray], lam: float
) -> np.ndarray:
    """Unnormalized self-debias scores: max(0, p_target - lam * max counter)."""
    p_target = np.asarray(p_target, dtype=float)
    if not p_counters:
        return p_target.copy()
    stacked = np.stack([np.asarray(c, dtype=float) for c in p_counters])
    if stacked.shape[1:] != p_target.shape:
        raise ValueError(
            f"counter distributions have shape {stacked.shape[1:]}, "
            f"target has {p_target.shape}"
        )
    return np.maximum(0.0, p_target - lam * stacked.max(axis=0))


def self_debias_step(
    p_target: np.ndarray, p_counters: Sequence[np.ndarray], lam: float
) -> np.ndarray:
    """One decoding-time debias step.

    Subtracts ``lam`` times the strongest counter probability from each
    token, clamps at zero, and renormalizes; if everything clamps to zero
    the target distribution is returned unchanged.
    """
    scores = suppressed_scores(p_target, p_counters, lam)
    total = scores.sum()
    if total <= 0.0:
        return np.asarray(p_target, dtype=float).copy()
    return scores / total


def _check_distribution(dist: np.ndarray, vocab_size: int) -> np.ndarray:
    dist = np.asarray(dist, dtype=float)
    if dist.shape != (vocab_size,):
        raise BackendError(
            f"language model returned shape {dist.shape}, expected ({vocab_size},)"
        )
    if (dist < 0).any() or abs(float(dist.sum()) - 1.0) > 1e-9:
        raise BackendError("language model returned an invalid distribution")
    return dist


def generate(
    lm: LanguageModel,
    target_prompt: str,
    counter_prompts: Sequence[str],
    cfg: GenerationConfig,
    rng: Optional[np.random.Generator] = None,
) -> str:
    """Decode a continuation of ``target_prompt`` away from the counters.

    Every emitted token extends the target prefix and every counter prefix
    alike; decoding stops at sentence-final punctuation or at the output
    cap. Greedy by default; sampling (optionally top-k) uses the supplied
    or seeded generator.
    """
    vocab = list(lm.vocabulary())
    target_prefix = target_prompt.split()
    counter_prefixes = [p.split() for p in counter_prompts]
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    emitted: list[str] = []
    for _ in range(cfg.max_output_tokens):
        p_target = _check_distribution(
            lm.next_token_distribution(target_prefix + emitted), len(vocab)
        )
        p_counters = [
            _check_distribution(lm.next_token_distribution(prefix + emitted), len(vocab))
            for prefix in counter_prefixes
        ]
        adjusted = self_debias_step(p_target, p_counters, cfg.lam)
        if cfg.greedy:
            choice = int(np.argmax(adjusted))
        else:
            probs = adjusted
            if cfg.top_k is not None and cfg.top_k < len(vocab):
                keep = np.argsort(probs)[::-1][: cfg.top_k]
                mask = np.zeros_like(probs)
                mask[keep] = probs[keep]
                total = mask.sum()
                probs = mask / total if total > 0 else adjusted
            choice = int(rng.choice(len(vocab), p=probs))
        token = vocab[choice]
        emitted.append(token)
        if token.endswith(cfg.stop_punctuation):
            break
    return " ".join(emitted)


def validate_terms(generated: str, required_terms: Sequence[str]) -> bool:
    """Accept iff every required term occurs case-insensitively in the text."""
    haystack = generated.lower()
    return all(term.lower() in haystack for term in required_terms)


COUNTER_LABELS = {
    LabelId.SAME_THING: (LabelId.SOMEWHAT_SIMILAR, LabelId.DIFFERENT_TOPICS),
    LabelId.SOMEWHAT_SIMILAR: (LabelId.SAME_THING, LabelId.DIFFERENT_TOPICS),
    LabelId.DIFFERENT_TOPICS: (LabelId.SAME_THING, LabelId.SOMEWHAT_SIMILAR),
}


def generate_pair(
    lm: LanguageModel,
    source: str,
    problem_list: str,
    templates: TemplateSet,
    cfg: GenerationConfig,
    label: LabelId = LabelId.SAME_THING,
    doc_id: str = "",
    rng: Optional[np.random.Generator] = None,
) -> Optional[GeneratedPair]:
    """Generate one candidate pair for a source sentence.

    Returns None when the generation violates the term-preservation rule
    for SAME_THING pairs; other labels have no required terms.
    """
    terms = select_terms(source, problem_list)
    arity = len(terms)
    target_prompt = instantiate_template(templates.get(label, arity), terms, source)
    counter_prompts = [
        instantiate_template(templates.get(counter, arity), terms, source)
        for counter in COUNTER_LABELS[label]
    ]
    generated = generate(lm, target_prompt, counter_prompts, cfg, rng=rng)
    required = terms if label is LabelId.SAME_THING else []
    if not validate_terms(generated, required):
        return None
    return GeneratedPair(
        source=source,
        generated=generated,
        label=label,
        required_terms=required,
        scores={},
        doc_id=doc_id,
    )


def augment_notes(
    notes: Iterable,
    lm: LanguageModel,
    templates: TemplateSet,
    cfg: GenerationConfig,
    label: LabelId = LabelId.SAME_THING,
) -> Iterator[GeneratedPair]:
    """Candidate pairs for every assessment sentence of every note.

    Each (note, sentence) job gets its own RNG substream so output does
    not depend on processing order. Notes without an assessment or a
    problem-list summary are skipped with a warning; pairs failing term
    validation are dropped silently (they are rejected, not errors).
    """
    for note in notes:
        if not note.assessment or not note.summary:
            log.warning(
                "note %r lacks assessment or summary; skipped for augmentation",
                note.doc_id,
            )
            continue
        for idx, (sentence, _start, _end) in enumerate(segment_sentences(note.assessment)):
            rng = substream(cfg.seed, "augment", f"{note.doc_id}:{idx}")
            pair = generate_pair(
                lm,
                sentence,
                note.summary,
                templates,
                cfg,
                label=label,
                doc_id=note.doc_id,
                rng=rng,
            )
            if pair is not None:
                yield pair


def write_pairs(pairs: Iterable[GeneratedPair], path: Union[str, Path]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_record(), ensure_ascii=False))
            fh.write("\n")
            count += 1
    return count


def read_pairs(path: Union[str, Path]) -> Iterator[GeneratedPair]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield GeneratedPair.from_record(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, DataError) as exc:
                raise ParseError(
                    f"corrupt pair record: {exc}", path=str(path), line=lineno
                ) from None
