"""Binary complication classification of assembled contexts.

Two backends share one contract:

* ``remote`` -- a chat-completions endpoint: request
  ``{"model", "temperature", "messages": [{"role": "user", "content"}]}``,
  response text at ``choices[0].message.content``.
* ``mock`` -- a deterministic offline stand-in that emits the same JSON
  verdict a well-behaved model would, driven by a configurable
  complication-keyword list.

The model's verdict is a JSON object ``{"complication": 0|1,
"severity": 1..5}``; it may be wrapped in prose or markdown fences. The
ranking score used for ROC curves is derived deterministically from the
verdict: ``severity/5`` for label 1, else ``(1 - severity/5) * 0.5``.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import BudgetRagError, ResponseParseError
from .remote import post_json
from .retrieval import AssembledContext

DEFAULT_COMPLICATION_KEYWORDS = (
    "anastomotic leak",
    "wound dehiscence",
    "surgical site infection",
    "postoperative hemorrhage",
    "sepsis",
    "reoperation",
    "pulmonary embolism",
    "deep vein thrombosis",
    "intra-abdominal abscess",
    "respiratory failure",
    "acute kidney injury",
    "unplanned readmission",
)

# Only the {context} placeholder is substituted (plain replace, so the
# JSON braces below need no escaping).
DEFAULT_PROMPT_TEMPLATE = (
    "You are reviewing a surgical patient's clinical notes.\n"
    "Decide whether the notes document a post-operative complication.\n"
    "Answer with one JSON object and nothing else, in the form\n"
    '{"complication": 0 or 1, "severity": <integer 1-5>}\n'
    "where severity grades the worst complication found (1 = none or minimal).\n"
    "\n"
    "Notes:\n"
    "{context}\n"
)


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "mock"  # "mock" | "remote"
    endpoint: str | None = None
    model_name: str = "mock"
    temperature: float = 0.0
    max_retries: int = 3
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE
    keywords: tuple[str, ...] = DEFAULT_COMPLICATION_KEYWORDS

    def __post_init__(self):
        if self.kind not in ("mock", "remote"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.kind == "remote" and not (self.endpoint and self.model_name):
            raise ValueError("remote classifier requires endpoint and model_name")
        if "{context}" not in self.prompt_template:
            raise ValueError("prompt_template must contain a {context} placeholder")


@dataclass(frozen=True)
class ClassificationOutcome:
    patient_id: str
    mode: str
    label: int
    severity: int
    score: float
    raw_response: str
    prompt_words: int
    latency_ms: int
    severity_defaulted: bool = False


@dataclass(frozen=True)
class FailedClassification:
    patient_id: str
    mode: str
    error: str
    message: str


@dataclass
class BatchResult:
    outcomes: list[ClassificationOutcome] = field(default_factory=list)
    failures: list[FailedClassification] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


class ParsedResponse(NamedTuple):
    label: int
    severity: int
    severity_defaulted: bool = False


def rank_score(label: int, severity: int) -> float:
    """Deterministic ROC ranking score from a (label, severity) verdict."""
    if label == 1:
        return severity / 5.0
    return (1.0 - severity / 5.0) * 0.5


def _balanced_object_candidates(raw: str):
    """Yield balanced ``{...}`` spans, respecting JSON string literals."""
    start = 0
    while True:
        open_idx = raw.find("{", start)
        if open_idx < 0:
            return
        depth = 0
        in_string = False
        escaped = False
        for i in range(open_idx, len(raw)):
            ch = raw[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield raw[open_idx:i + 1]
                    break
        start = open_idx + 1


def parse_response(raw: str) -> ParsedResponse:
    """Extract the first parseable JSON verdict from model output.

    Tolerates surrounding prose and markdown fences. ``complication``
    must be 0 or 1; a missing or invalid ``severity`` falls back to 3
    with ``severity_defaulted`` set.
    """
    for candidate in _balanced_object_candidates(raw):
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if not isinstance(obj, dict) or "complication" not in obj:
            continue
        label = obj["complication"]
        if label not in (0, 1):
            raise ResponseParseError(f"'complication' must be 0 or 1, got {label!r}", raw_response=raw)
        severity = obj.get("severity")
        if isinstance(severity, bool) or not isinstance(severity, int) or not 1 <= severity <= 5:
            return ParsedResponse(int(label), 3, True)
        return ParsedResponse(int(label), severity, False)
    raise ResponseParseError("no JSON object with a 'complication' field found", raw_response=raw)


def mock_response(context_text: str, keywords: tuple[str, ...] = DEFAULT_COMPLICATION_KEYWORDS) -> str:
    """Deterministic fake model reply driven by keyword spotting.

    Label is 1 iff any keyword phrase occurs (case-insensitive);
    severity is ``min(5, 1 + distinct hits)``.
    """
    lowered = context_text.lower()
    hits = sum(1 for kw in keywords if kw.lower() in lowered)
    label = 1 if hits > 0 else 0
    severity = min(5, 1 + hits)
    return json.dumps({"complication": label, "severity": severity})


def render_prompt(template: str, context_text: str) -> str:
    return template.replace("{context}", context_text)


def _remote_response(prompt: str, cfg: ClassifierConfig) -> str:
    payload = {
        "model": cfg.model_name,
        "temperature": cfg.temperature,
        "messages": [{"role": "user", "content": prompt}],
    }
    response = post_json(cfg.endpoint, payload, max_attempts=max(1, cfg.max_retries))
    try:
        content = response["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ResponseParseError(
            f"response is missing choices[0].message.content: {exc}",
            raw_response=json.dumps(response)[:2000],
        ) from exc
    if not isinstance(content, str):
        raise ResponseParseError("choices[0].message.content is not a string")
    return content


def classify(ctx: AssembledContext, cfg: ClassifierConfig) -> ClassificationOutcome:
    """Classify one assembled context (empty context allowed).

    The mock path is pure, so its latency is recorded as 0 ms to keep
    offline runs byte-reproducible; remote latency is measured wall
    clock.
    """
    prompt = render_prompt(cfg.prompt_template, ctx.text)
    if cfg.kind == "mock":
        raw = mock_response(ctx.text, cfg.keywords)
        latency_ms = 0
    else:
        started = time.perf_counter()
        raw = _remote_response(prompt, cfg)
        latency_ms = int((time.perf_counter() - started) * 1000)
    parsed = parse_response(raw)
    return ClassificationOutcome(
        patient_id=ctx.patient_id,
        mode=ctx.mode,
        label=parsed.label,
        severity=parsed.severity,
        score=rank_score(parsed.label, parsed.severity),
        raw_response=raw,
        prompt_words=len(prompt.split()),
        latency_ms=latency_ms,
        severity_defaulted=parsed.severity_defaulted,
    )


def classify_mock(ctx: AssembledContext, keywords: tuple[str, ...] = DEFAULT_COMPLICATION_KEYWORDS) -> ClassificationOutcome:
    """Classify offline with the keyword mock."""
    return classify(ctx, ClassifierConfig(kind="mock", keywords=tuple(keywords)))


def classify_batch(
    contexts: list[AssembledContext],
    cfg: ClassifierConfig,
    parallelism: int = 1,
    *,
    deterministic: bool = False,
) -> BatchResult:
    """Classify a batch, recording per-item failures without aborting.

    Results preserve input order regardless of ``parallelism``. The
    returned manifest snapshots the configuration and timestamps
    (zeroed under ``deterministic``).
    """
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism}")
    started_at = "1970-01-01T00:00:00Z" if deterministic else _utc_now()

    def one(ctx: AssembledContext):
        try:
            return classify(ctx, cfg)
        except BudgetRagError as exc:
            return FailedClassification(
                patient_id=ctx.patient_id,
                mode=ctx.mode,
                error=type(exc).__name__,
                message=str(exc),
            )

    if parallelism == 1 or len(contexts) <= 1:
        results = [one(ctx) for ctx in contexts]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(one, contexts))

    batch = BatchResult()
    for res in results:
        if isinstance(res, ClassificationOutcome):
            batch.outcomes.append(res)
        else:
            batch.failures.append(res)
    batch.manifest = {
        "classifier": {
            "kind": cfg.kind,
            "model_name": cfg.model_name,
            "endpoint": cfg.endpoint,
            "temperature": cfg.temperature,
            "max_retries": cfg.max_retries,
        },
        "prompt_template": cfg.prompt_template,
        "keywords": list(cfg.keywords) if cfg.kind == "mock" else None,
        "parallelism": parallelism,
        "contexts": len(contexts),
        "failures": len(batch.failures),
        "started_at": started_at,
        "finished_at": "1970-01-01T00:00:00Z" if deterministic else _utc_now(),
    }
    return batch


def _utc_now() -> str:
    from datetime import datetime, timezone

    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# --- outcomes persistence ----------------------------------------------


def outcome_to_json(outcome: ClassificationOutcome) -> dict:
    return {
        "patient_id": outcome.patient_id,
        "mode": outcome.mode,
        "label": outcome.label,
        "severity": outcome.severity,
        "score": outcome.score,
        "raw_response": outcome.raw_response,
        "prompt_words": outcome.prompt_words,
        "latency_ms": outcome.latency_ms,
        "severity_defaulted": outcome.severity_defaulted,
    }


def write_outcomes(path, batch: BatchResult) -> None:
    """Write outcomes JSONL; failures become lines with ``"failed": true``."""
    with open(path, "w", encoding="utf-8") as fh:
        for outcome in batch.outcomes:
            fh.write(json.dumps(outcome_to_json(outcome), ensure_ascii=False) + "\n")
        for failure in batch.failures:
            fh.write(json.dumps({
                "patient_id": failure.patient_id,
                "mode": failure.mode,
                "failed": True,
                "error": failure.error,
                "message": failure.message,
            }, ensure_ascii=False) + "\n")


def read_outcomes(path) -> tuple[list[ClassificationOutcome], list[FailedClassification]]:
    outcomes: list[ClassificationOutcome] = []
    failures: list[FailedClassification] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BudgetRagError(f"outcomes file line {line_no}: invalid JSON: {exc.msg}") from exc
            if obj.get("failed"):
                failures.append(FailedClassification(
                    patient_id=obj["patient_id"],
                    mode=obj.get("mode", ""),
                    error=obj.get("error", "unknown"),
                    message=obj.get("message", ""),
                ))
                continue
            outcomes.append(ClassificationOutcome(
                patient_id=obj["patient_id"],
                mode=obj["mode"],
                label=int(obj["label"]),
                severity=int(obj["severity"]),
                score=float(obj["score"]),
                raw_response=obj.get("raw_response", ""),
                prompt_words=int(obj.get("prompt_words", 0)),
                latency_ms=int(obj.get("latency_ms", 0)),
                severity_defaulted=bool(obj.get("severity_defaulted", False)),
            ))
    return outcomes, failures
