"""Artifact stores with provenance headers.

Every artifact file opens with {"kind", "config_hash"}; readers verify
both, so artifacts produced under a different configuration can never be
mixed into a run. Stores contain no timestamps, which keeps reruns
byte-identical (timestamps live only in the run manifest).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable

from .errors import ValidationError


class MissingUpstreamArtifact(ValidationError):
    def __init__(self, stage: str, path: Path):
        super().__init__(f"stage {stage!r} needs missing artifact {path.name}; run earlier stages first")
        self.stage = stage
        self.path = path


class ArtifactMismatch(ValidationError):
    """Artifact kind or config hash does not match the current run."""


def _dump(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False)


def write_records(path: str | Path, kind: str, config_hash: str, records: Iterable[dict]) -> None:
    """Write a line-delimited store: one header line, then one record per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(_dump({"kind": kind, "config_hash": config_hash}) + "\n")
        for record in records:
            fh.write(_dump(record) + "\n")


def read_records(path: str | Path, kind: str, config_hash: str) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise MissingUpstreamArtifact(kind, path)
    with path.open("r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        _check_header(path, header, kind, config_hash)
        return [json.loads(line) for line in fh if line.strip()]


def write_doc(path: str | Path, kind: str, config_hash: str, payload: dict) -> None:
    """Write a single-document JSON artifact with embedded provenance."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"kind": kind, "config_hash": config_hash, **payload}
    path.write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def read_doc(path: str | Path, kind: str, config_hash: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise MissingUpstreamArtifact(kind, path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    _check_header(path, doc, kind, config_hash)
    return doc


def _check_header(path: Path, header: dict, kind: str, config_hash: str) -> None:
    if header.get("kind") != kind:
        raise ArtifactMismatch(f"{path.name}: expected kind {kind!r}, found {header.get('kind')!r}")
    if header.get("config_hash") != config_hash:
        raise ArtifactMismatch(
            f"{path.name}: artifact was produced under config {header.get('config_hash')!r}, "
            f"current config is {config_hash!r}"
        )


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
