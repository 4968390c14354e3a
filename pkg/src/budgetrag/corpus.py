"""Patient record ingestion, note filtering, and word chunking.

The corpus file is UTF-8 JSONL, one patient per line:

    {"patient_id": str, "label": 0|1, "anchor_date": RFC3339|null,
     "notes": [{"note_type": str, "timestamp": RFC3339, "text": str}]}

Notes are kept only when their type is on the admissible-type whitelist
and their text is non-empty after trimming. A "word" everywhere in this
package is a maximal run of non-whitespace characters (``str.split``),
which keeps counting reproducible across tokenizers and languages.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable

from .errors import CorpusFormatError

# Admissible peri-operative note types (the default whitelist).
DEFAULT_NOTE_TYPES = frozenset({
    "IP Operative Report",
    "Addendum IP Operative Report",
    "OP Operative Report",
    "Addendum OP Operative Report",
    "Brief Op Note",
    "Perioperative Record",
    "OR PreOp",
    "OR PreOp Anesthesia",
    "Pre-Op Medical Assessment",
    "OR PostOp",
    "Anesthesia Procedure Notes",
    "Anesthesia Preprocedural Evaluation",
    "Anesthesia Postprocedural Evaluation",
    "OR Nursing",
    "Anesthesia Transfer of Care",
    "Anesthesia PACU Discharge",
})

DEFAULT_MAX_CHUNK_WORDS = 512
NOTE_SEPARATOR = "\n\n"


@dataclass(frozen=True)
class ClinicalNote:
    """One timestamped clinical note."""

    note_type: str
    timestamp: datetime  # always timezone-aware UTC
    text: str


@dataclass(frozen=True)
class PatientRecord:
    """A labeled patient with chronologically ordered notes."""

    patient_id: str
    label: int  # 1 = complication, 0 = none
    notes: tuple[ClinicalNote, ...]
    anchor_date: datetime | None = None

    @property
    def is_empty(self) -> bool:
        """True when no notes survived filtering."""
        return not self.notes


@dataclass(frozen=True)
class Chunk:
    """A contiguous span of at most ``max_words`` whitespace words.

    ``position`` is the zero-based ordinal of the chunk within the
    patient's concatenated text. Joining all chunk texts of a patient in
    position order with single spaces reproduces the source word
    sequence.
    """

    patient_id: str
    position: int
    word_count: int
    text: str


def parse_rfc3339(value: str, *, context: str = "timestamp") -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime.

    Python 3.10's ``fromisoformat`` rejects the trailing ``Z``, so it is
    normalized first. Timestamps without a UTC offset are rejected.
    """
    if not isinstance(value, str):
        raise CorpusFormatError(f"{context}: expected an RFC 3339 string, got {type(value).__name__}")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError as exc:
        raise CorpusFormatError(f"{context}: not a valid RFC 3339 timestamp: {value!r}") from exc
    if parsed.tzinfo is None:
        raise CorpusFormatError(f"{context}: timestamp {value!r} has no UTC offset")
    return parsed.astimezone(timezone.utc)


def load_whitelist(path: str | Path) -> frozenset[str]:
    """Read a note-type whitelist file, one type name per line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    types = {line.strip() for line in lines if line.strip()}
    if not types:
        raise CorpusFormatError(f"whitelist file {path} contains no note types")
    return frozenset(types)


def _parse_note(obj: dict, line_no: int, idx: int) -> ClinicalNote:
    where = f"line {line_no}, note {idx}"
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"{where}: note must be an object")
    for field in ("note_type", "timestamp", "text"):
        if field not in obj:
            raise CorpusFormatError(f"{where}: missing required field {field!r}")
    if not isinstance(obj["note_type"], str):
        raise CorpusFormatError(f"{where}: note_type must be a string")
    if not isinstance(obj["text"], str):
        raise CorpusFormatError(f"{where}: text must be a string")
    ts = parse_rfc3339(obj["timestamp"], context=where)
    return ClinicalNote(note_type=obj["note_type"], timestamp=ts, text=obj["text"])


def _parse_record(obj: dict, line_no: int, whitelist: frozenset[str]) -> PatientRecord:
    where = f"line {line_no}"
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"{where}: record must be a JSON object")
    for field in ("patient_id", "label", "notes"):
        if field not in obj:
            raise CorpusFormatError(f"{where}: missing required field {field!r}")
    patient_id = obj["patient_id"]
    if not isinstance(patient_id, str) or not patient_id:
        raise CorpusFormatError(f"{where}: patient_id must be a non-empty string")
    label = obj["label"]
    if label not in (0, 1) or isinstance(label, bool):
        raise CorpusFormatError(f"{where}: label must be 0 or 1, got {label!r}")
    anchor = obj.get("anchor_date")
    anchor_dt = None if anchor is None else parse_rfc3339(anchor, context=f"{where}, anchor_date")
    raw_notes = obj["notes"]
    if not isinstance(raw_notes, list):
        raise CorpusFormatError(f"{where}: notes must be a list")

    notes = []
    for idx, raw in enumerate(raw_notes):
        note = _parse_note(raw, line_no, idx)
        if note.note_type not in whitelist:
            continue
        if not note.text.strip():
            continue
        notes.append(note)
    notes.sort(key=lambda n: n.timestamp)  # stable: equal timestamps keep file order
    return PatientRecord(
        patient_id=patient_id,
        label=int(label),
        notes=tuple(notes),
        anchor_date=anchor_dt,
    )


def load_corpus(path: str | Path, note_whitelist: Iterable[str] | None = None) -> list[PatientRecord]:
    """Load patient records from a JSONL corpus file.

    Only whitelisted, non-blank notes are retained; notes are sorted by
    timestamp. Patients whose notes were all filtered out are still
    returned (``record.is_empty``) so cohort counts match the input.
    Unknown fields are ignored; a malformed line raises
    :class:`CorpusFormatError` naming the line number.
    """
    whitelist = frozenset(note_whitelist) if note_whitelist is not None else DEFAULT_NOTE_TYPES
    records: list[PatientRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {line_no}: invalid JSON: {exc.msg}") from exc
            record = _parse_record(obj, line_no, whitelist)
            if record.patient_id in seen:
                raise CorpusFormatError(f"line {line_no}: duplicate patient_id {record.patient_id!r}")
            seen.add(record.patient_id)
            records.append(record)
    return records


def window_notes(record: PatientRecord, window_days: int) -> PatientRecord:
    """Keep only notes inside the trailing time window.

    The window is ``[anchor - window_days, anchor]`` where the anchor is
    ``record.anchor_date`` when present, otherwise the latest note
    timestamp. A record with no notes is returned unchanged.
    """
    if window_days <= 0:
        raise ValueError(f"window_days must be positive, got {window_days}")
    if not record.notes:
        return record
    anchor = record.anchor_date or max(n.timestamp for n in record.notes)
    try:
        start = anchor - timedelta(days=window_days)
    except OverflowError:  # window wider than the representable range
        start = datetime.min.replace(tzinfo=timezone.utc)
    kept = tuple(n for n in record.notes if start <= n.timestamp <= anchor)
    return dataclasses.replace(record, notes=kept)


def concat_text(record: PatientRecord) -> str:
    """Join note texts in timestamp order with a blank-line separator."""
    return NOTE_SEPARATOR.join(n.text for n in record.notes)


def word_count(text: str) -> int:
    return len(text.split())


def chunk_text(text: str, max_words: int = DEFAULT_MAX_CHUNK_WORDS, *, patient_id: str = "") -> list[Chunk]:
    """Split text into consecutive runs of exactly ``max_words`` words.

    The final chunk may be shorter; no word is split or dropped. Empty
    or whitespace-only text yields an empty list.
    """
    if max_words < 1:
        raise ValueError(f"max_words must be >= 1, got {max_words}")
    words = text.split()
    chunks = []
    for position, start in enumerate(range(0, len(words), max_words)):
        piece = words[start:start + max_words]
        chunks.append(Chunk(
            patient_id=patient_id,
            position=position,
            word_count=len(piece),
            text=" ".join(piece),
        ))
    return chunks


def chunk_record(record: PatientRecord, max_words: int = DEFAULT_MAX_CHUNK_WORDS) -> list[Chunk]:
    """Chunk a patient's concatenated note text."""
    return chunk_text(concat_text(record), max_words, patient_id=record.patient_id)
