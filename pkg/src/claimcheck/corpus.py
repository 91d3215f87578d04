"""Claim/evidence corpus ingestion, cleaning, splitting, and statistics.

A corpus row carries {id, claim, date, source, verdict, evidence, url}.
Only binary-labelled rows are admitted: the raw "True"/"False" verdicts
map to Supports/Refutes, already-canonical labels pass through, and
everything else (Half True, Pants on Fire, ...) is rejected loudly.

Evidence cleaning removes paragraphs that cite any outlet on a
user-editable blocklist, keeping only primary-source material.
"""

from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from statistics import fmean
from typing import Iterable, Sequence

from .errors import ValidationError
from .textutil import split_paragraphs, stats_tokenize

logger = logging.getLogger(__name__)

# Stable serialization order for diffable line-delimited artifacts.
FIELD_ORDER = ("id", "claim", "date", "source", "verdict", "evidence", "url")

REQUIRED_NONEMPTY = ("id", "claim", "verdict", "evidence")


class VerdictLabel(Enum):
    """The closed two-value verdict set. There is no third state."""

    SUPPORTS = "Supports"
    REFUTES = "Refutes"


_RAW_LABEL_MAP = {"true": VerdictLabel.SUPPORTS, "false": VerdictLabel.REFUTES}
_CANONICAL_LABELS = {label.value: label for label in VerdictLabel}


class MissingField(ValidationError):
    def __init__(self, row: int, fieldname: str):
        super().__init__(f"row {row}: missing or empty field {fieldname!r}")
        self.row = row
        self.field = fieldname


class DuplicateId(ValidationError):
    def __init__(self, record_id: str):
        super().__init__(f"duplicate record id {record_id!r}")
        self.record_id = record_id


class UnreadableFile(ValidationError):
    pass


class UnsupportedLabel(ValidationError):
    def __init__(self, raw: str, row: int | None = None):
        where = f"row {row}: " if row is not None else ""
        super().__init__(f"{where}unsupported verdict label {raw!r}; only True/False rows are kept")
        self.raw = raw
        self.row = row


class EmptyEvidenceAfterFilter(ValidationError):
    """Every evidence paragraph was blocklisted; the record must be dropped."""

    def __init__(self, record_id: str):
        super().__init__(f"record {record_id!r}: no evidence left after outlet filtering")
        self.record_id = record_id


class BadRatios(ValidationError):
    pass


class EmptyCorpus(ValidationError):
    pass


@dataclass(frozen=True)
class ClaimRecord:
    """One claim with its evidence document, source metadata, and gold verdict."""

    id: str
    claim: str
    date: str
    source: str
    verdict: VerdictLabel
    evidence: str
    url: str

    def to_row(self) -> dict:
        return {
            "id": self.id,
            "claim": self.claim,
            "date": self.date,
            "source": self.source,
            "verdict": self.verdict.value,
            "evidence": self.evidence,
            "url": self.url,
        }


@dataclass(frozen=True)
class SourceBlocklist:
    """Outlet names matched case-insensitively as substrings of a paragraph."""

    outlets: tuple[str, ...]

    def __post_init__(self):
        folded = [name.casefold() for name in self.outlets]
        if len(set(folded)) != len(folded):
            raise ValidationError("blocklist contains duplicate outlet names")

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "SourceBlocklist":
        """Normalize (strip, dedupe case-insensitively) while keeping order."""
        seen: set[str] = set()
        outlets: list[str] = []
        for name in names:
            name = name.strip()
            if not name or name.casefold() in seen:
                continue
            seen.add(name.casefold())
            outlets.append(name)
        return cls(tuple(outlets))

    @classmethod
    def from_file(cls, path: str | Path) -> "SourceBlocklist":
        """Plain-text list, one outlet per line, '#' comments allowed."""
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise UnreadableFile(f"cannot read blocklist {path}: {exc}") from exc
        names = [ln for ln in (ln.strip() for ln in lines) if ln and not ln.startswith("#")]
        return cls.from_names(names)

    def matches(self, paragraph: str) -> bool:
        folded = paragraph.casefold()
        return any(name.casefold() in folded for name in self.outlets)


@dataclass(frozen=True)
class CorpusSplits:
    train: list[ClaimRecord]
    validation: list[ClaimRecord]
    test: list[ClaimRecord]
    seed: int

    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.validation), len(self.test))


@dataclass(frozen=True)
class CorpusStats:
    total: int
    per_label: dict[VerdictLabel, int]
    mean_claim_tokens: float
    mean_evidence_tokens: float


def map_verdict_label(raw: str) -> VerdictLabel:
    """Map a raw binary verdict string: True -> Supports, False -> Refutes.

    Anything else, including the four excluded multi-grade classes, raises
    UnsupportedLabel; the corpus keeps only binary-labelled rows.
    """
    normalized = raw.strip().casefold()
    if normalized in _RAW_LABEL_MAP:
        return _RAW_LABEL_MAP[normalized]
    raise UnsupportedLabel(raw)


def _record_from_mapping(row_num: int, row: dict, seen_ids: set[str]) -> ClaimRecord:
    for name in FIELD_ORDER:
        if name not in row or row[name] is None:
            raise MissingField(row_num, name)
    for name in REQUIRED_NONEMPTY:
        if not str(row[name]).strip():
            raise MissingField(row_num, name)
    raw_verdict = str(row["verdict"]).strip()
    # Canonical labels (a re-ingested cleaned store) pass through; raw
    # labels go through the binary mapping, which rejects everything else.
    verdict = _CANONICAL_LABELS.get(raw_verdict)
    if verdict is None:
        try:
            verdict = map_verdict_label(raw_verdict)
        except UnsupportedLabel:
            raise UnsupportedLabel(raw_verdict, row=row_num) from None
    record_id = str(row["id"])
    if record_id in seen_ids:
        raise DuplicateId(record_id)
    seen_ids.add(record_id)
    return ClaimRecord(
        id=record_id,
        claim=str(row["claim"]),
        date=str(row["date"]),
        source=str(row["source"]),
        verdict=verdict,
        evidence=str(row["evidence"]),
        url=str(row["url"]),
    )


def parse_corpus(path: str | Path, format: str = "json-lines") -> list[ClaimRecord]:
    """Load a corpus file into validated records.

    format is "json-lines" (one JSON object per line) or "delimited"
    (CSV/TSV with a header row naming the seven fields).
    """
    if format not in ("json-lines", "delimited"):
        raise ValidationError(f"unknown corpus format {format!r}")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"cannot read corpus {path}: {exc}") from exc

    records: list[ClaimRecord] = []
    seen_ids: set[str] = set()
    if format == "json-lines":
        for row_num, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise UnreadableFile(f"{path}: row {row_num} is not valid JSON: {exc}") from exc
            records.append(_record_from_mapping(row_num, row, seen_ids))
    else:
        lines = text.splitlines()
        if not lines:
            return []
        delimiter = "\t" if "\t" in lines[0] else ","
        reader = csv.DictReader(lines, delimiter=delimiter)
        for row_num, row in enumerate(reader, start=2):
            records.append(_record_from_mapping(row_num, row, seen_ids))
    return records


def filter_evidence(record: ClaimRecord, blocklist: SourceBlocklist) -> ClaimRecord:
    """Drop every evidence paragraph citing a blocklisted outlet.

    Returns the record unchanged when nothing matches, otherwise a copy
    with the surviving paragraphs rejoined by blank lines. Raises
    EmptyEvidenceAfterFilter when nothing survives; callers drop (and
    log) such records.
    """
    paragraphs = split_paragraphs(record.evidence)
    kept = [p for p in paragraphs if not blocklist.matches(p)]
    if paragraphs and not kept:
        raise EmptyEvidenceAfterFilter(record.id)
    if len(kept) == len(paragraphs):
        return record
    return replace(record, evidence="\n\n".join(kept))


def split_corpus(
    records: Sequence[ClaimRecord],
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
    seed: int = 42,
) -> CorpusSplits:
    """Seeded shuffle then contiguous slicing into train/validation/test.

    Cumulative rounding keeps every split within one record of its exact
    ratio share; the three splits partition the input.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise BadRatios(f"need three non-negative ratios, got {ratios!r}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios must sum to 1.0, got {sum(ratios)!r}")
    shuffled = list(records)
    random.Random(seed).shuffle(shuffled)
    n = len(shuffled)
    cut1 = round(n * ratios[0])
    cut2 = round(n * (ratios[0] + ratios[1]))
    return CorpusSplits(
        train=shuffled[:cut1],
        validation=shuffled[cut1:cut2],
        test=shuffled[cut2:],
        seed=seed,
    )


def compute_stats(records: Sequence[ClaimRecord]) -> CorpusStats:
    """Per-label counts plus mean token lengths of claim and evidence.

    Token counts use whitespace tokenization after punctuation stripping,
    so they are backend-independent.
    """
    if not records:
        raise EmptyCorpus("cannot compute statistics of an empty corpus")
    per_label = {label: 0 for label in VerdictLabel}
    for record in records:
        per_label[record.verdict] += 1
    return CorpusStats(
        total=len(records),
        per_label=per_label,
        mean_claim_tokens=fmean(len(stats_tokenize(r.claim)) for r in records),
        mean_evidence_tokens=fmean(len(stats_tokenize(r.evidence)) for r in records),
    )


def default_blocklist_path() -> Path:
    """Path of the bundled 30-outlet starter blocklist (editable copy advised)."""
    return Path(str(resources.files("claimcheck").joinpath("data/blocklist.txt")))
