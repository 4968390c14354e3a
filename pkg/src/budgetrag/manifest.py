"""Run manifests: provenance records binding outputs to inputs.

Every pipeline command writes exactly one manifest next to its primary
output (``<out>.manifest.json``). The manifest snapshots the effective
configuration and the SHA-256 fingerprints of all inputs and outputs.
Downstream commands re-hash their inputs and compare against the
sidecar manifest when one exists; a mismatch stops the run.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from .errors import FingerprintMismatchError

EPOCH = "1970-01-01T00:00:00Z"


def utc_now(deterministic: bool = False) -> str:
    if deterministic:
        return EPOCH
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return f"sha256:{digest.hexdigest()}"


def manifest_path(artifact: str | Path) -> Path:
    return Path(f"{artifact}.manifest.json")


def validate_input(path: str | Path) -> str:
    """Hash an input file and check it against its sidecar manifest.

    Returns the fingerprint. Inputs without a sidecar manifest (e.g.
    the raw corpus) are accepted as-is.
    """
    actual = sha256_file(path)
    sidecar = manifest_path(path)
    if sidecar.exists():
        recorded = json.loads(sidecar.read_text(encoding="utf-8"))
        expected = recorded.get("outputs", {}).get(Path(path).name)
        if expected is not None and expected != actual:
            raise FingerprintMismatchError(
                f"{path} does not match its manifest fingerprint "
                f"(recorded {expected}, actual {actual}); the file was modified after it was produced"
            )
    return actual


def write_manifest(
    primary_out: str | Path,
    *,
    command: str,
    config: dict,
    inputs: dict[str, str],
    output_paths: list[str | Path],
    started_at: str,
    deterministic: bool = False,
    embedder: str | None = None,
    classifier: dict | None = None,
    extra: dict | None = None,
) -> Path:
    outputs = {Path(p).name: sha256_file(p) for p in output_paths}
    manifest = {
        "command": command,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "artifacts": [str(p) for p in output_paths],
        "embedder": embedder,
        "classifier": classifier,
        "started_at": started_at,
        "finished_at": utc_now(deterministic),
    }
    if extra:
        manifest.update(extra)
    path = manifest_path(primary_out)
    path.write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path
