"""Streaming pre-training corpus construction.

Reads progress notes from line-delimited JSON, segments and annotates
each note, applies the masking policy with a per-document RNG substream,
and writes masked examples back out as line-delimited records. Output is
byte-identical regardless of worker count because every document's
randomness derives only from (seed, doc_id).
"""

from __future__ import annotations

import json
import logging
import multiprocessing
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

from .annotation import (
    DEFAULT_MAX_WINDOW,
    DEFAULT_THRESHOLD,
    I2b2Source,
    TermDictionary,
    annotate_sentence,
)
from .errors import DataError, ParseError
from .masking import MaskedExample, MaskPolicyConfig, apply_mask, choose_mask_source
from .seeding import substream
from .text import segment_sentences

log = logging.getLogger(__name__)

SECTION_FIELDS = ("assessment", "subjective", "objective", "summary")


@dataclass
class ProgressNote:
    """One progress note: a raw body plus optional named sections."""

    doc_id: str
    text: str = ""
    assessment: Optional[str] = None
    subjective: Optional[str] = None
    objective: Optional[str] = None
    summary: Optional[str] = None

    def __post_init__(self):
        if not self.doc_id:
            raise DataError("note is missing a doc_id")
        for name in ("text", "assessment", "subjective", "objective", "summary"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, str):
                raise DataError(f"note {self.doc_id!r}: field {name} is not text")
        if not self.text:
            sections = [
                s for s in (self.assessment, self.subjective, self.objective) if s
            ]
            self.text = "\n".join(sections)
        if not self.text:
            raise DataError(f"note {self.doc_id!r} has no text and no sections")


@dataclass
class CorpusStats:
    """Corpus-level counters mirroring the pre-training report shape."""

    total_rows: int = 0
    rows_no_umls: int = 0
    rows_no_i2b2: int = 0
    rows_no_entities: int = 0
    masks_total: int = 0
    sentences_total: int = 0
    skipped: int = 0

    def check(self) -> None:
        if self.rows_no_entities > min(self.rows_no_umls, self.rows_no_i2b2):
            raise DataError("stats violate rows_no_entities <= min(no_umls, no_i2b2)")
        if max(self.rows_no_umls, self.rows_no_i2b2) > self.total_rows:
            raise DataError("stats violate no-entity rows <= total_rows")

    def as_dict(self) -> dict:
        return asdict(self)

    def report(self) -> str:
        return (
            f"rows          {self.total_rows}\n"
            f"  no UMLS     {self.rows_no_umls}\n"
            f"  no i2b2     {self.rows_no_i2b2}\n"
            f"  no entities {self.rows_no_entities}\n"
            f"sentences     {self.sentences_total}\n"
            f"masks         {self.masks_total}\n"
            f"skipped       {self.skipped}"
        )


@dataclass(frozen=True)
class AnnotationConfig:
    """Matching settings shared by both dictionary channels."""

    threshold: float = DEFAULT_THRESHOLD
    max_window: int = DEFAULT_MAX_WINDOW


def mask_note(
    note: ProgressNote,
    umls_dict: TermDictionary,
    i2b2_source: I2b2Source,
    mask_cfg: MaskPolicyConfig,
    annot_cfg: AnnotationConfig = AnnotationConfig(),
) -> tuple[MaskedExample, bool, bool, int]:
    """Annotate and mask one note.

    Returns (example, has_umls, has_i2b2, sentence_count). Randomness
    comes from the (seed, doc_id) substream only.
    """
    sentences = []
    for idx, (sent, start, _end) in enumerate(segment_sentences(note.text)):
        sentences.append(
            annotate_sentence(
                sent,
                umls_dict,
                i2b2_source,
                threshold=annot_cfg.threshold,
                max_window=annot_cfg.max_window,
                doc_id=note.doc_id,
                sentence_index=idx,
                start=start,
            )
        )
    rng = substream(mask_cfg.seed, "masking", note.doc_id)
    decisions = [choose_mask_source(s, mask_cfg, rng) for s in sentences]
    example = apply_mask(note.text, sentences, decisions, mask_cfg, doc_id=note.doc_id)
    has_umls = any(s.umls_spans for s in sentences)
    has_i2b2 = any(s.i2b2_spans for s in sentences)
    return example, has_umls, has_i2b2, len(sentences)


_WORKER_STATE: dict = {}


def _init_worker(umls_dict, i2b2_source, mask_cfg, annot_cfg):
    _WORKER_STATE["args"] = (umls_dict, i2b2_source, mask_cfg, annot_cfg)


def _mask_note_task(note: ProgressNote):
    umls_dict, i2b2_source, mask_cfg, annot_cfg = _WORKER_STATE["args"]
    return mask_note(note, umls_dict, i2b2_source, mask_cfg, annot_cfg)


def build_pretrain_corpus(
    notes: Iterable[ProgressNote],
    umls_dict: TermDictionary,
    i2b2_source: I2b2Source,
    mask_cfg: MaskPolicyConfig,
    annot_cfg: AnnotationConfig = AnnotationConfig(),
    stats: Optional[CorpusStats] = None,
    workers: int = 1,
) -> tuple[Iterator[MaskedExample], CorpusStats]:
    """Masked examples for a note stream, one per note, in input order.

    Returns the example iterator and the stats object it updates; counters
    are final once the iterator is exhausted. ``workers > 1`` fans
    annotation/masking out to a process pool while preserving input order,
    so the output bytes never depend on the worker count.
    """
    if stats is None:
        stats = CorpusStats()

    def consume(results):
        for example, has_umls, has_i2b2, n_sentences in results:
            stats.total_rows += 1
            stats.sentences_total += n_sentences
            stats.masks_total += example.num_masks
            if not has_umls:
                stats.rows_no_umls += 1
            if not has_i2b2:
                stats.rows_no_i2b2 += 1
            if not (has_umls or has_i2b2):
                stats.rows_no_entities += 1
            yield example

    def serial():
        for note in notes:
            yield mask_note(note, umls_dict, i2b2_source, mask_cfg, annot_cfg)

    if workers <= 1:
        return consume(serial()), stats

    def parallel():
        with multiprocessing.Pool(
            workers,
            initializer=_init_worker,
            initargs=(umls_dict, i2b2_source, mask_cfg, annot_cfg),
        ) as pool:
            yield from pool.imap(_mask_note_task, notes, chunksize=64)

    return consume(parallel()), stats


def read_notes(path: Union[str, Path], stats: Optional[CorpusStats] = None) -> Iterator[ProgressNote]:
    """Stream notes from a line-delimited JSON file.

    Malformed records are skipped with a warning (and counted when a
    stats object is supplied) rather than aborting a long run.
    """
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise DataError("record is not an object")
                note = ProgressNote(
                    doc_id=str(record.get("doc_id", "")),
                    text=record.get("text", "") or "",
                    **{k: record.get(k) for k in SECTION_FIELDS},
                )
            except (json.JSONDecodeError, DataError, TypeError) as exc:
                log.warning("%s:%d: skipping malformed note: %s", path, lineno, exc)
                if stats is not None:
                    stats.skipped += 1
                continue
            yield note


def write_corpus(examples: Iterable[MaskedExample], path: Union[str, Path]) -> int:
    """Write masked examples as line-delimited JSON; returns the count."""
    count = 0
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for ex in examples:
                fh.write(
                    json.dumps(
                        {"doc_id": ex.doc_id, "input": ex.input_text, "target": ex.target_text},
                        ensure_ascii=False,
                    )
                )
                fh.write("\n")
                count += 1
    except OSError as exc:
        raise ParseError(f"cannot write corpus: {exc}", path=str(path)) from exc
    return count


def read_corpus(
    path: Union[str, Path],
    sentinel_format: str = "<extra_id_{i}>",
) -> Iterator[MaskedExample]:
    """Read a corpus written by :func:`write_corpus`; lossless round trip.

    A corrupt line raises a ParseError naming the line number.
    """
    cfg = MaskPolicyConfig(sentinel_format=sentinel_format)
    pattern = cfg.sentinel_pattern()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                doc_id = record["doc_id"]
                input_text = record["input"]
                target_text = record["target"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(
                    f"corrupt corpus record: {exc}", path=str(path), line=lineno
                ) from None
            num_masks = max(len(pattern.findall(target_text)) - 1, 0)
            yield MaskedExample(doc_id, input_text, target_text, num_masks)
