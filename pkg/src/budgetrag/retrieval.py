"""Context assembly for both ingestion modes.

RAG mode embeds a complication-seeking query, ranks the patient's
chunks by similarity, and packs ranked chunks into a hard word budget;
accepted chunks are re-sorted into their original narrative order. LONG
mode concatenates the whole windowed record. Budget filling is greedy
in rank order with skip: a chunk that does not fit the remaining budget
is skipped and scanning continues, up to ``top_n_scan`` ranked
candidates. Chunks are never truncated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import Chunk, PatientRecord, chunk_record, concat_text, window_notes
from .errors import BudgetRagError, MissingPatientError
from .vindex import VectorIndex

MODE_RAG = "RAG"
MODE_LONG = "LONG"

DEFAULT_BUDGET_WORDS = 4000
DEFAULT_TOP_N_SCAN = 64

# Shipped default retrieval query; overridable via config or --query.
# Logged with every run through the manifest.
DEFAULT_QUERY_TEXT = (
    "Evidence of post-operative complications such as anastomotic leak, "
    "wound dehiscence, surgical site infection, postoperative hemorrhage, "
    "sepsis, reoperation, pulmonary embolism, deep vein thrombosis, "
    "intra-abdominal abscess, respiratory failure, acute kidney injury, "
    "or unplanned readmission."
)


@dataclass(frozen=True)
class RetrievalConfig:
    budget_words: int = DEFAULT_BUDGET_WORDS
    query_text: str = DEFAULT_QUERY_TEXT
    top_n_scan: int = DEFAULT_TOP_N_SCAN

    def __post_init__(self):
        if self.budget_words < 1:
            raise ValueError(f"budget_words must be >= 1, got {self.budget_words}")
        if self.top_n_scan < 1:
            raise ValueError(f"top_n_scan must be >= 1, got {self.top_n_scan}")


@dataclass(frozen=True)
class AssembledContext:
    """The text handed to the classifier for one patient."""

    patient_id: str
    mode: str  # MODE_RAG | MODE_LONG
    text: str
    word_count: int
    selected_positions: tuple[int, ...] = ()
    candidate_scores: tuple[tuple[int, float], ...] = ()  # (position, score) in rank order
    total_words: int = 0


def assemble_rag_from_chunks(
    patient_id: str,
    chunks: list[Chunk],
    index: VectorIndex,
    embedder,
    cfg: RetrievalConfig,
) -> AssembledContext:
    """Assemble a budgeted context from pre-computed chunks.

    The chunks must be the same ones whose embeddings were added to the
    index (positions are matched against index entries for this
    patient).
    """
    total_words = sum(c.word_count for c in chunks)
    if not chunks:
        return AssembledContext(patient_id=patient_id, mode=MODE_RAG, text="", word_count=0)

    hits = index.search(embedder.embed(cfg.query_text), k=cfg.top_n_scan, filter_patient=patient_id)
    if not hits:
        raise MissingPatientError(f"patient {patient_id!r} has chunks but none are indexed")

    by_position = {c.position: c for c in chunks}
    remaining = cfg.budget_words
    accepted: list[Chunk] = []
    for hit in hits:
        chunk = by_position.get(hit.position)
        if chunk is None:
            raise BudgetRagError(
                f"index entry ({patient_id!r}, {hit.position}) has no matching chunk"
            )
        if chunk.word_count <= remaining:
            accepted.append(chunk)
            remaining -= chunk.word_count
            if remaining == 0:
                break
    accepted.sort(key=lambda c: c.position)
    return AssembledContext(
        patient_id=patient_id,
        mode=MODE_RAG,
        text="\n\n".join(c.text for c in accepted),
        word_count=sum(c.word_count for c in accepted),
        selected_positions=tuple(c.position for c in accepted),
        candidate_scores=tuple((h.position, h.score) for h in hits),
        total_words=total_words,
    )


def assemble_rag(
    record: PatientRecord,
    index: VectorIndex,
    embedder,
    cfg: RetrievalConfig,
    max_words: int | None = None,
) -> AssembledContext:
    """Chunk a record and assemble its budgeted context.

    The record must be the already-windowed record whose chunks were
    indexed; ``max_words`` must match the chunk size used at index
    build time (defaults to the standard 512).
    """
    chunks = chunk_record(record) if max_words is None else chunk_record(record, max_words)
    return assemble_rag_from_chunks(record.patient_id, chunks, index, embedder, cfg)


def assemble_long(record: PatientRecord, window_days: int = 30) -> AssembledContext:
    """Assemble the whole-text context from the trailing note window."""
    text = concat_text(window_notes(record, window_days))
    count = len(text.split())
    return AssembledContext(
        patient_id=record.patient_id,
        mode=MODE_LONG,
        text=text,
        word_count=count,
        total_words=count,
    )


def context_stats(ctx: AssembledContext) -> tuple[int, float]:
    """Return (word_count, selected_ratio).

    The ratio is selected words over the patient's total words; LONG
    contexts and zero-word patients are defined as 1.0.
    """
    if ctx.mode == MODE_LONG or ctx.total_words == 0:
        return ctx.word_count, 1.0
    return ctx.word_count, ctx.word_count / ctx.total_words


# --- audit export ------------------------------------------------------


def context_to_json(ctx: AssembledContext) -> dict:
    return {
        "patient_id": ctx.patient_id,
        "mode": ctx.mode,
        "word_count": ctx.word_count,
        "selected_positions": list(ctx.selected_positions),
        "text": ctx.text,
    }


def write_contexts(path: str | Path, contexts: list[AssembledContext]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ctx in contexts:
            fh.write(json.dumps(context_to_json(ctx), ensure_ascii=False) + "\n")


def read_contexts(path: str | Path) -> list[AssembledContext]:
    contexts = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BudgetRagError(f"contexts file line {line_no}: invalid JSON: {exc.msg}") from exc
            contexts.append(AssembledContext(
                patient_id=obj["patient_id"],
                mode=obj["mode"],
                text=obj["text"],
                word_count=obj["word_count"],
                selected_positions=tuple(obj.get("selected_positions", ())),
            ))
    return contexts
