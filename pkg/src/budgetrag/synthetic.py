"""Deterministic synthetic corpus generator.

Builds labeled fake patients whose notes are benign clinical filler;
positive patients additionally carry planted complication sentences.
The filler vocabulary is disjoint from the default retrieval-query and
keyword vocabulary, so retrieval quality is measurable: a planted
sentence is found iff its chunk is ranked into the budget.

Note texts are built from fixed-size word blocks so that planted
sentences never straddle chunk boundaries when the chunk size equals
the block size. Everything is driven by a seeded ``random.Random``;
identical arguments produce byte-identical corpora.

Run ``python -m budgetrag.synthetic --patients 60 --out corpus.jsonl``
to write a demo corpus.
"""

from __future__ import annotations

import argparse
import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .classifier import DEFAULT_COMPLICATION_KEYWORDS
from .corpus import DEFAULT_NOTE_TYPES

# Benign filler; must stay free of every word used by the default
# retrieval query and keyword phrases (tests enforce the disjointness).
FILLER_VOCAB = (
    "patient", "remains", "stable", "overnight", "tolerating", "regular",
    "diet", "ambulating", "hallway", "without", "assistance", "vital",
    "values", "within", "normal", "limits", "afebrile", "pain",
    "controlled", "with", "oral", "medication", "incision", "clean",
    "dry", "intact", "minimal", "erythema", "absent", "drainage",
    "bowel", "sounds", "present", "voiding", "spontaneously", "plan",
    "continue", "current", "management", "physical", "therapy",
    "consulted", "anticipate", "return", "home", "tomorrow", "morning",
    "family", "bedside", "updated", "labs", "reviewed", "hemoglobin",
    "platelets", "electrolytes", "unremarkable", "chest", "clear",
    "auscultation", "heart", "rate", "rhythm", "extremities", "warm",
    "perfused", "neurologically", "appropriate", "resting",
    "comfortably", "reports", "improving", "appetite", "encouraged",
    "incentive", "spirometry", "hourly", "while", "awake", "drains",
    "peripheral", "access", "maintained", "fluids", "advanced",
    "telemetry", "monitoring", "discontinued", "dressing", "changed",
    "ice", "applied", "elevating", "extremity", "walker", "steady",
    "gait", "nutrition", "counseled", "glucose", "checks", "routine",
)

_BASE_TIME = datetime(2024, 3, 10, 8, 0, 0, tzinfo=timezone.utc)
_NOTE_TYPES = sorted(DEFAULT_NOTE_TYPES)


@dataclass
class SyntheticCorpus:
    records: list[dict] = field(default_factory=list)
    planted: dict[str, list[str]] = field(default_factory=dict)  # patient_id -> sentences

    @property
    def patient_ids(self) -> list[str]:
        return [r["patient_id"] for r in self.records]


def _filler_word(rng: random.Random) -> str:
    # sprinkle numeric observations for vocabulary spread
    roll = rng.random()
    if roll < 0.08:
        return str(rng.randint(50, 199))
    if roll < 0.12:
        return f"{rng.randint(95, 135)}/{rng.randint(55, 90)}"
    return rng.choice(FILLER_VOCAB)


def _filler_block(rng: random.Random, block_words: int) -> list[str]:
    return [_filler_word(rng) for _ in range(block_words)]


def _planted_sentence(phrases: list[str]) -> list[str]:
    """A clinical-looking sentence carrying the given keyword phrases.

    Each phrase is mentioned twice so a chunk containing the sentence
    shares enough vocabulary with the complication-seeking query to
    rank clearly above filler chunks.
    """
    first = [w for i, p in enumerate(phrases) for w in (["and"] if i else []) + p.split()]
    second = [w for i, p in enumerate(phrases) for w in (["with"] if i else []) + p.split()]
    return (
        ["Postoperative", "complications", "documented:"] + first
        + ["noted", "on", "rounds,", "ongoing"] + second
        + ["requiring", "urgent", "intervention."]
    )


def _sample_phrase_groups(rng: random.Random, keywords: tuple[str, ...],
                          n_groups: int) -> list[list[str]]:
    """Partition shuffled keywords into groups of total word mass >= 4."""
    available = list(keywords)
    rng.shuffle(available)
    groups: list[list[str]] = []
    while len(groups) < n_groups and available:
        group: list[str] = []
        mass = 0
        while available and mass < 4 and len(group) < 3:
            phrase = available.pop()
            group.append(phrase)
            mass += len(phrase.split())
        if mass >= 4:
            groups.append(group)
        elif not groups:
            groups.append(group)  # tiny keyword lists still plant something
    return groups


def generate_corpus(
    n_patients: int = 60,
    *,
    positive_fraction: float = 0.5,
    notes_per_patient: int = 2,
    blocks_per_note: int = 5,
    block_words: int = 64,
    min_planted: int = 2,
    max_planted: int = 4,
    keywords: tuple[str, ...] = DEFAULT_COMPLICATION_KEYWORDS,
    seed: int = 0,
) -> SyntheticCorpus:
    """Generate a labeled corpus of ``n_patients`` fake patients.

    Each patient has ``notes_per_patient`` notes of
    ``blocks_per_note * block_words`` words. Positive patients get
    ``min_planted``..``max_planted`` planted sentences, each built from
    distinct keyword phrases and placed in a distinct block.
    """
    if not 0.0 <= positive_fraction <= 1.0:
        raise ValueError("positive_fraction must be within [0, 1]")
    rng = random.Random(seed)
    n_positive = round(n_patients * positive_fraction)
    labels = [1] * n_positive + [0] * (n_patients - n_positive)
    rng.shuffle(labels)

    corpus = SyntheticCorpus()
    total_blocks = notes_per_patient * blocks_per_note
    for i in range(n_patients):
        patient_id = f"p{i:04d}"
        label = labels[i]
        blocks = [_filler_block(rng, block_words) for _ in range(total_blocks)]
        sentences: list[str] = []
        if label == 1:
            groups = _sample_phrase_groups(rng, keywords, rng.randint(min_planted, max_planted))
            target_blocks = rng.sample(range(total_blocks), k=len(groups))
            for block_idx, phrases in zip(target_blocks, groups):
                sentence = _planted_sentence(phrases)
                if len(sentence) > block_words:
                    raise ValueError(
                        f"block_words={block_words} cannot hold a {len(sentence)}-word sentence"
                    )
                offset = rng.randint(0, block_words - len(sentence))
                # in-place replacement keeps the block at block_words words
                blocks[block_idx][offset:offset + len(sentence)] = sentence
                sentences.append(" ".join(sentence))

        notes = []
        for note_idx in range(notes_per_patient):
            note_blocks = blocks[note_idx * blocks_per_note:(note_idx + 1) * blocks_per_note]
            text = " ".join(word for block in note_blocks for word in block)
            timestamp = _BASE_TIME + timedelta(hours=6 * note_idx, minutes=i % 60)
            notes.append({
                "note_type": _NOTE_TYPES[(i + note_idx) % len(_NOTE_TYPES)],
                "timestamp": timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "text": text,
            })
        corpus.records.append({
            "patient_id": patient_id,
            "label": label,
            "anchor_date": None,
            "notes": notes,
        })
        corpus.planted[patient_id] = sentences
    return corpus


def write_corpus(path: str | Path, corpus: SyntheticCorpus) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in corpus.records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Write a deterministic synthetic demo corpus.")
    parser.add_argument("--patients", type=int, default=60)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--notes-per-patient", type=int, default=2)
    parser.add_argument("--blocks-per-note", type=int, default=5)
    parser.add_argument("--block-words", type=int, default=64)
    args = parser.parse_args(argv)
    corpus = generate_corpus(
        args.patients,
        notes_per_patient=args.notes_per_patient,
        blocks_per_note=args.blocks_per_note,
        block_words=args.block_words,
        seed=args.seed,
    )
    write_corpus(args.out, corpus)
    words = args.notes_per_patient * args.blocks_per_note * args.block_words
    print(f"wrote {args.patients} patients ({words} words each) to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
