"""Budgeted retrieval-augmented classification of long clinical records.

Splits multi-note patient records into 512-word chunks, indexes chunk
embeddings in a flat exact-search vector store, assembles budget-capped
contexts (or the whole windowed text), classifies through a pluggable
chat-completion backend, and compares the two ingestion modes with a
full metric and DeLong statistical suite plus cost/runtime projections.
"""

__version__ = "0.1.0"

from .corpus import Chunk, ClinicalNote, PatientRecord, chunk_text, concat_text, load_corpus, window_notes
from .embedding import EmbedderConfig, HashingEmbedder, build_embedder, embed_hashing
from .vindex import SearchHit, VectorIndex
from .retrieval import AssembledContext, RetrievalConfig, assemble_long, assemble_rag, context_stats
from .classifier import (
    ClassificationOutcome,
    ClassifierConfig,
    classify,
    classify_batch,
    classify_mock,
    parse_response,
)
from .metrics import (
    DeLongResult,
    MetricBundle,
    ScoredCohort,
    auroc,
    confusion_metrics,
    delong_test,
    evaluate_cohort,
    normal_cdf,
    pr_auc,
    roc_points,
)
from .costmodel import PriceSheet, UsageSummary, project_cost, project_time, summarize_usage

__all__ = [
    "AssembledContext",
    "Chunk",
    "ClassificationOutcome",
    "ClassifierConfig",
    "ClinicalNote",
    "DeLongResult",
    "EmbedderConfig",
    "HashingEmbedder",
    "MetricBundle",
    "PatientRecord",
    "PriceSheet",
    "RetrievalConfig",
    "ScoredCohort",
    "SearchHit",
    "UsageSummary",
    "VectorIndex",
    "assemble_long",
    "assemble_rag",
    "auroc",
    "build_embedder",
    "chunk_text",
    "classify",
    "classify_batch",
    "classify_mock",
    "concat_text",
    "confusion_metrics",
    "context_stats",
    "delong_test",
    "embed_hashing",
    "evaluate_cohort",
    "load_corpus",
    "normal_cdf",
    "parse_response",
    "pr_auc",
    "project_cost",
    "project_time",
    "roc_points",
    "summarize_usage",
    "window_notes",
]
