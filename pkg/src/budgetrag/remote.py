"""JSON-over-HTTP helper shared by the embedding and classifier clients.

Auth: when the ``BUDGETRAG_API_KEY`` environment variable is set, it is
sent as ``Authorization: Bearer <token>``. Retries use exponential
backoff (base 0.5 s, factor 2) on transport failures, 429, and 5xx;
other 4xx responses fail immediately.
"""

from __future__ import annotations

import json
import os
import time
from typing import Callable

import requests

from .errors import RemoteSchemaError, RemoteServiceError

API_KEY_ENV = "BUDGETRAG_API_KEY"
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_BACKOFF_BASE = 0.5
DEFAULT_BACKOFF_FACTOR = 2.0


def _auth_headers() -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(API_KEY_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    return headers


def post_json(
    url: str,
    payload: dict,
    *,
    timeout: float = 60.0,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    backoff_base: float = DEFAULT_BACKOFF_BASE,
    backoff_factor: float = DEFAULT_BACKOFF_FACTOR,
    sleep: Callable[[float], None] | None = None,
) -> dict:
    """POST a JSON payload and return the decoded JSON response.

    Raises :class:`RemoteServiceError` after retries are exhausted (with
    the last HTTP status when there was one) and
    :class:`RemoteSchemaError` when a 2xx body is not valid JSON.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    if sleep is None:
        sleep = time.sleep
    delay = backoff_base
    last_error: RemoteServiceError | None = None
    for attempt in range(1, max_attempts + 1):
        try:
            response = requests.post(url, json=payload, headers=_auth_headers(), timeout=timeout)
        except requests.RequestException as exc:
            last_error = RemoteServiceError(f"request to {url} failed: {exc}", retryable=True)
        else:
            if 200 <= response.status_code < 300:
                try:
                    return response.json()
                except (ValueError, json.JSONDecodeError) as exc:
                    raise RemoteSchemaError(f"response from {url} is not valid JSON: {exc}") from exc
            retryable = response.status_code == 429 or response.status_code >= 500
            last_error = RemoteServiceError(
                f"{url} returned HTTP {response.status_code}",
                status=response.status_code,
                retryable=retryable,
            )
            if not retryable:
                raise last_error
        if attempt < max_attempts:
            sleep(delay)
            delay *= backoff_factor
    assert last_error is not None
    raise last_error
