"""Cost accounting and linear projections."""

from __future__ import annotations

import json

import pytest

from budgetrag.classifier import ClassificationOutcome
from budgetrag.costmodel import (
    PriceSheet,
    project_cost,
    project_time,
    summarize_usage,
    write_cost_csv,
    write_time_csv,
)
from budgetrag.errors import PatientSetMismatchError


def outcome(pid, words, mode="RAG"):
    return ClassificationOutcome(patient_id=pid, mode=mode, label=0, severity=1,
                                 score=0.4, raw_response="{}", prompt_words=words, latency_ms=0)


PRICES = PriceSheet(usd_per_million_tokens=2.50,
                    seconds_per_patient_rag=0.90,
                    seconds_per_patient_long=1.11)


class TestSummarizeUsage:
    def test_reference_totals_are_exact(self):
        long = [outcome("p1", 100_000_000, "LONG"), outcome("p2", 72_000_000, "LONG")]
        rag = [outcome("p1", 7_000_000), outcome("p2", 6_200_000)]
        summary = summarize_usage(long, rag, PRICES)
        assert summary.total_words_long == 172_000_000
        assert summary.total_words_rag == 13_200_000
        assert summary.cost_long_usd == 430.0
        assert summary.cost_rag_usd == 33.0
        assert summary.savings_fraction == pytest.approx(0.923, abs=0.002)
        assert summary.savings_fraction > 0.90
        assert summary.patients == 2

    def test_patient_set_mismatch_lists_difference(self):
        with pytest.raises(PatientSetMismatchError) as err:
            summarize_usage([outcome("p1", 10, "LONG")], [outcome("p2", 5)], PRICES)
        assert err.value.only_a == ["p1"]
        assert err.value.only_b == ["p2"]

    def test_permutation_invariance(self):
        long = [outcome(f"p{i}", 100 * i, "LONG") for i in range(1, 6)]
        rag = [outcome(f"p{i}", 10 * i) for i in range(1, 6)]
        forward = summarize_usage(long, rag, PRICES)
        backward = summarize_usage(list(reversed(long)), list(reversed(rag)), PRICES)
        assert forward == backward

    def test_zero_cost_long(self):
        summary = summarize_usage([outcome("p1", 0, "LONG")], [outcome("p1", 0)], PRICES)
        assert summary.savings_fraction == 0.0


class TestProjectCost:
    def test_zero_patients_is_free(self):
        assert project_cost(75_010.0, PRICES, [0]) == [(0, 0.0)]

    def test_reference_extrapolation(self):
        # per-patient rate 172e6 / 2293 ~= 75,010 words; at 100k patients
        # this projects to ~$18,753
        rate = 172e6 / 2293
        rows = project_cost(rate, PRICES, [100_000])
        assert rows[0][1] == pytest.approx(18752.73, abs=0.01)
        assert round(rows[0][1]) == 18753

    def test_doubling_count_doubles_cost(self):
        rows = dict(project_cost(500.0, PRICES, [1000, 2000]))
        assert rows[2000] == 2 * rows[1000]

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            project_cost(-1.0, PRICES, [1])


class TestProjectTime:
    def test_reference_improvement_rates(self):
        mistral = project_time(PriceSheet(2.5, 0.90, 1.11), [100])
        assert mistral.improvement_fraction == pytest.approx(0.189, abs=0.005)
        llama = project_time(PriceSheet(2.5, 0.45, 0.58), [100])
        assert llama.improvement_fraction == pytest.approx(0.224, abs=0.005)

    def test_linear_rows(self):
        projection = project_time(PriceSheet(2.5, 0.45, 0.58), [1000])
        count, rag_s, long_s = projection.rows[0]
        assert (count, rag_s) == (1000, pytest.approx(450.0))
        assert long_s == pytest.approx(580.0)

    def test_passes_through_origin(self):
        projection = project_time(PRICES, [0])
        assert projection.rows[0] == (0, 0.0, 0.0)


class TestCsvAndConfig:
    def test_cost_csv_format(self, tmp_path):
        path = tmp_path / "cost.csv"
        write_cost_csv(path, [(0, 0.0), (1000, 2.5)])
        assert path.read_text(encoding="utf-8") == "patients,cost_usd\n0,0.0\n1000,2.5\n"

    def test_time_csv_format(self, tmp_path):
        path = tmp_path / "time.csv"
        write_time_csv(path, [(10, 9.0, 11.1)])
        assert path.read_text(encoding="utf-8").splitlines() == [
            "patients,seconds_rag,seconds_long", "10,9.0,11.1"]

    def test_price_sheet_from_json(self, tmp_path):
        path = tmp_path / "prices.json"
        path.write_text(json.dumps({
            "usd_per_million_tokens": 5.0,
            "seconds_per_patient_rag": 0.2,
            "seconds_per_patient_long": 0.4,
        }), encoding="utf-8")
        prices = PriceSheet.from_json(path)
        assert prices.usd_per_million_tokens == 5.0
        assert prices.seconds_per_patient_long == 0.4

    def test_negative_price_rejected(self):
        with pytest.raises(ValueError):
            PriceSheet(usd_per_million_tokens=-1.0)
