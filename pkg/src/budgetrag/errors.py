"""Exception hierarchy shared across the pipeline.

Every error carries a ``category`` that the CLI maps to an exit code:
``"data"`` -> 2 (validation / file-format problems), ``"remote"`` -> 3
(embedding or chat endpoint failures). Usage errors exit 1 and are
handled by the argument parser directly.
"""

from __future__ import annotations


class BudgetRagError(Exception):
    """Base class for all pipeline errors."""

    category = "data"


# --- corpus -----------------------------------------------------------------

class CorpusFormatError(BudgetRagError):
    """Malformed corpus file (bad JSON, missing field, bad timestamp...)."""


# --- vector index -----------------------------------------------------------

class DimensionMismatchError(BudgetRagError):
    """Vector length does not match the index dimension."""


class DuplicateChunkError(BudgetRagError):
    """A (patient_id, position) key was added twice."""


class InvalidVectorError(BudgetRagError):
    """Vector is not finite or not unit-normalized."""


class IndexFormatError(BudgetRagError):
    """Index file does not start with the expected magic bytes."""


class IndexVersionError(BudgetRagError):
    """Index file has an unsupported format version."""


class IndexTruncatedError(BudgetRagError):
    """Index file ends before the declared payload is complete."""


class IndexChecksumError(BudgetRagError):
    """Index file checksum does not match its content."""


# --- retrieval --------------------------------------------------------------

class MissingPatientError(BudgetRagError):
    """Patient has chunks but none are present in the index."""


# --- classifier -------------------------------------------------------------

class ResponseParseError(BudgetRagError):
    """Model response did not contain a usable JSON verdict."""

    def __init__(self, message: str, raw_response: str = ""):
        super().__init__(message)
        self.raw_response = raw_response


# --- remote services --------------------------------------------------------

class RemoteServiceError(BudgetRagError):
    """Transport failure or non-2xx response, possibly after retries."""

    category = "remote"

    def __init__(self, message: str, status: int | None = None, retryable: bool = False):
        super().__init__(message)
        self.status = status
        self.retryable = retryable


class RemoteSchemaError(BudgetRagError):
    """Remote response was 2xx but missing an expected field."""

    category = "remote"


class ZeroVectorError(BudgetRagError):
    """Remote embedding service returned an all-zero vector."""

    category = "remote"


# --- metrics ----------------------------------------------------------------

class UndefinedMetricError(BudgetRagError):
    """Metric is undefined for the cohort (e.g. a single-class cohort)."""


class PairingError(BudgetRagError):
    """Two cohorts are not paired (length, label, or patient-id mismatch)."""


class InsufficientDataError(BudgetRagError):
    """Too few positives or negatives for the requested statistic."""


# --- cost model / CLI -------------------------------------------------------

class PatientSetMismatchError(BudgetRagError):
    """Two outcome sets do not cover the same patients."""

    def __init__(self, message: str, only_a: list[str] | None = None, only_b: list[str] | None = None):
        super().__init__(message)
        self.only_a = only_a or []
        self.only_b = only_b or []


class FingerprintMismatchError(BudgetRagError):
    """An input file's hash does not match its recorded manifest fingerprint."""
