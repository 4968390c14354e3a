"""Token accounting, dollar costs, and cohort-size projections.

Counts are whitespace words standing in for provider tokens; every
output labels the unit "tokens (word-approximated)" so the
approximation is visible. Projections are exactly linear and pass
through the origin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .classifier import ClassificationOutcome
from .errors import PatientSetMismatchError

UNIT_LABEL = "tokens (word-approximated)"


@dataclass(frozen=True)
class PriceSheet:
    usd_per_million_tokens: float = 2.50
    seconds_per_patient_rag: float = 0.90
    seconds_per_patient_long: float = 1.11

    def __post_init__(self):
        for name in ("usd_per_million_tokens", "seconds_per_patient_rag", "seconds_per_patient_long"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @classmethod
    def from_json(cls, path: str | Path) -> "PriceSheet":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**{
            k: data[k]
            for k in ("usd_per_million_tokens", "seconds_per_patient_rag", "seconds_per_patient_long")
            if k in data
        })


@dataclass(frozen=True)
class UsageSummary:
    patients: int
    total_words_long: int
    total_words_rag: int
    cost_long_usd: float
    cost_rag_usd: float
    savings_fraction: float


def cost_usd(total_words: int | float, prices: PriceSheet) -> float:
    return total_words / 1e6 * prices.usd_per_million_tokens


def summarize_usage(
    outcomes_long: list[ClassificationOutcome],
    outcomes_rag: list[ClassificationOutcome],
    prices: PriceSheet,
) -> UsageSummary:
    """Aggregate prompt word counts per mode into dollar totals.

    Both outcome lists must cover the same patient set; the summary is
    invariant to patient order.
    """
    ids_long = {o.patient_id for o in outcomes_long}
    ids_rag = {o.patient_id for o in outcomes_rag}
    if ids_long != ids_rag:
        only_long = sorted(ids_long - ids_rag)
        only_rag = sorted(ids_rag - ids_long)
        raise PatientSetMismatchError(
            f"outcome sets differ: {len(only_long)} only in long, {len(only_rag)} only in rag "
            f"(only long: {only_long[:5]}, only rag: {only_rag[:5]})",
            only_a=only_long,
            only_b=only_rag,
        )
    total_long = sum(o.prompt_words for o in outcomes_long)
    total_rag = sum(o.prompt_words for o in outcomes_rag)
    cost_long = cost_usd(total_long, prices)
    cost_rag = cost_usd(total_rag, prices)
    savings = 1.0 - cost_rag / cost_long if cost_long > 0 else 0.0
    return UsageSummary(
        patients=len(ids_long),
        total_words_long=total_long,
        total_words_rag=total_rag,
        cost_long_usd=cost_long,
        cost_rag_usd=cost_rag,
        savings_fraction=savings,
    )


def project_cost(
    per_patient_tokens: float,
    prices: PriceSheet,
    patient_counts: list[int],
) -> list[tuple[int, float]]:
    """Linear cost projection: usd = count * per_patient_tokens/1e6 * price."""
    if per_patient_tokens < 0:
        raise ValueError("per_patient_tokens must be >= 0")
    return [
        (count, count * per_patient_tokens / 1e6 * prices.usd_per_million_tokens)
        for count in patient_counts
    ]


@dataclass(frozen=True)
class TimeProjection:
    rows: list[tuple[int, float, float]]  # (count, seconds_rag, seconds_long)
    improvement_fraction: float  # 1 - rag/long


def project_time(prices: PriceSheet, patient_counts: list[int]) -> TimeProjection:
    """Linear runtime projection per mode from the per-patient rates."""
    rows = [
        (count, count * prices.seconds_per_patient_rag, count * prices.seconds_per_patient_long)
        for count in patient_counts
    ]
    if prices.seconds_per_patient_long > 0:
        improvement = 1.0 - prices.seconds_per_patient_rag / prices.seconds_per_patient_long
    else:
        improvement = 0.0
    return TimeProjection(rows=rows, improvement_fraction=improvement)


def write_cost_csv(path: str | Path, rows: list[tuple[int, float]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("patients,cost_usd\n")
        for count, usd in rows:
            fh.write(f"{count},{usd!r}\n")


def write_time_csv(path: str | Path, rows: list[tuple[int, float, float]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("patients,seconds_rag,seconds_long\n")
        for count, rag, long in rows:
            fh.write(f"{count},{rag!r},{long!r}\n")
