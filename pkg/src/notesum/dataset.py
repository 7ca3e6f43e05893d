"""Fine-tuning dataset assembly.

Composes model inputs from note sections (assessment alone or assessment
+ subjective + objective), attaches problem-list targets, folds accepted
augmented paraphrases back into their source notes, and caps the set at
a target size without ever displacing an original instance.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Union

from .augment import GeneratedPair
from .corpus import ProgressNote
from .errors import DataError, ParseError

log = logging.getLogger(__name__)

DEFAULT_TARGET_SIZE = 1000


class CompositionMode(enum.Enum):
    """Which note sections feed the model input."""

    A = "a"
    ASO = "aso"


class Provenance(enum.Enum):
    ORIGINAL = "original"
    AUGMENTED = "augmented"


@dataclass(frozen=True)
class TaskInstance:
    """One training/eval instance: composed input and problem-list target."""

    doc_id: str
    input_text: str
    target_text: str
    provenance: Provenance = Provenance.ORIGINAL

    def __post_init__(self):
        if not self.input_text:
            raise DataError(f"instance {self.doc_id!r} has empty input")
        if not self.target_text:
            raise DataError(f"instance {self.doc_id!r} has empty target")


def _require(note: ProgressNote, section: str) -> str:
    value = getattr(note, section)
    if not value:
        raise DataError(f"note {note.doc_id!r} is missing section {section!r}")
    return value


def compose_input(
    note: ProgressNote,
    mode: CompositionMode,
    separator: Optional[str] = None,
) -> str:
    """Model input for one note.

    Mode A is the assessment verbatim. Mode ASO appends subjective and
    objective in that fixed order; with the default ``separator=None``
    the extra sections carry labelled headers so they stay recoverable,
    otherwise the three texts are joined with the separator as-is.
    """
    assessment = _require(note, "assessment")
    if mode is CompositionMode.A:
        return assessment
    subjective = _require(note, "subjective")
    objective = _require(note, "objective")
    if separator is None:
        return (
            f"{assessment}\nSubjective: {subjective}\nObjective: {objective}"
        )
    return separator.join((assessment, subjective, objective))


def serialize_problem_list(items: Sequence[str], delimiter: str = "\n") -> str:
    """Join problem-list items into a target string (newline by default)."""
    return delimiter.join(item.strip() for item in items if item.strip())


def truncate_tokens(text: str, max_tokens: int) -> str:
    """First ``max_tokens`` whitespace tokens, re-joined with single spaces;
    text already within the cap is returned unchanged."""
    if max_tokens < 1:
        raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")
    tokens = text.split()
    if len(tokens) <= max_tokens:
        return text
    return " ".join(tokens[:max_tokens])


def _pair_rank_score(pair: GeneratedPair) -> float:
    if "combined" in pair.scores:
        return pair.scores["combined"]
    if pair.scores:
        return sum(pair.scores.values()) / len(pair.scores)
    return 0.0


def assemble_training_set(
    notes: Iterable[ProgressNote],
    augmented: Iterable[GeneratedPair],
    target_size: int = DEFAULT_TARGET_SIZE,
    mode: CompositionMode = CompositionMode.ASO,
    separator: Optional[str] = None,
) -> list[TaskInstance]:
    """Originals plus the best augmented instances, capped at target_size.

    Every original note becomes one instance. Each augmented pair rewrites
    its source sentence inside the source note's assessment and inherits
    the note's other sections and problem-list target. Originals are never
    dropped: if they already exceed ``target_size`` that is a data error,
    and remaining capacity goes to augmented pairs in descending combined
    score (stable by input order). Duplicate (doc_id, input) instances are
    skipped.
    """
    notes_by_id: dict[str, ProgressNote] = {}
    instances: list[TaskInstance] = []
    seen: set[tuple[str, str]] = set()
    for note in notes:
        if note.doc_id in notes_by_id:
            raise DataError(f"duplicate doc_id {note.doc_id!r} in notes")
        notes_by_id[note.doc_id] = note
        instance = TaskInstance(
            doc_id=note.doc_id,
            input_text=compose_input(note, mode, separator),
            target_text=_require(note, "summary"),
            provenance=Provenance.ORIGINAL,
        )
        key = (instance.doc_id, instance.input_text)
        if key in seen:
            continue
        seen.add(key)
        instances.append(instance)

    if target_size < len(instances):
        raise DataError(
            f"target_size {target_size} is below the {len(instances)} original "
            "instances; refusing to drop originals"
        )

    ordered = sorted(
        enumerate(augmented), key=lambda iv: (-_pair_rank_score(iv[1]), iv[0])
    )
    budget = target_size - len(instances)
    for _, pair in ordered:
        if budget == 0:
            break
        note = notes_by_id.get(pair.doc_id)
        if note is None:
            log.warning("augmented pair references unknown doc_id %r; skipped", pair.doc_id)
            continue
        assessment = _require(note, "assessment")
        if pair.source not in assessment:
            log.warning(
                "augmented pair for %r has a source sentence not found in the "
                "note's assessment; skipped",
                pair.doc_id,
            )
            continue
        new_assessment = assessment.replace(pair.source, pair.generated, 1)
        patched = ProgressNote(
            doc_id=note.doc_id,
            text=note.text,
            assessment=new_assessment,
            subjective=note.subjective,
            objective=note.objective,
            summary=note.summary,
        )
        instance = TaskInstance(
            doc_id=note.doc_id,
            input_text=compose_input(patched, mode, separator),
            target_text=_require(note, "summary"),
            provenance=Provenance.AUGMENTED,
        )
        key = (instance.doc_id, instance.input_text)
        if key in seen:
            continue
        seen.add(key)
        instances.append(instance)
        budget -= 1
    return instances


def read_section_notes(path: Union[str, Path]) -> Iterator[ProgressNote]:
    """Notes with section fields from line-delimited JSON; unlike the
    pre-training reader, malformed records here abort with context."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                yield ProgressNote(
                    doc_id=str(record.get("doc_id", "")),
                    text=record.get("text", "") or "",
                    assessment=record.get("assessment"),
                    subjective=record.get("subjective"),
                    objective=record.get("objective"),
                    summary=record.get("summary"),
                )
            except (json.JSONDecodeError, DataError, TypeError) as exc:
                raise ParseError(
                    f"bad note record: {exc}", path=str(path), line=lineno
                ) from None


def write_instances(instances: Iterable[TaskInstance], path: Union[str, Path]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(
                json.dumps(
                    {
                        "doc_id": inst.doc_id,
                        "input": inst.input_text,
                        "target": inst.target_text,
                        "provenance": inst.provenance.value,
                    },
                    ensure_ascii=False,
                )
            )
            fh.write("\n")
            count += 1
    return count


def read_instances(path: Union[str, Path]) -> Iterator[TaskInstance]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                yield TaskInstance(
                    doc_id=record["doc_id"],
                    input_text=record["input"],
                    target_text=record["target"],
                    provenance=Provenance(record.get("provenance", "original")),
                )
            except (json.JSONDecodeError, KeyError, ValueError, DataError) as exc:
                raise ParseError(
                    f"bad instance record: {exc}", path=str(path), line=lineno
                ) from None
