"""Outcome evaluation: macro-F1 scoring, entailment auditing of the
explanations, and export/aggregation of manual-annotation files.

Percentages in the entailment report are truncated (not rounded) to one
decimal so they reproduce the published benchmark rendering exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import random
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from statistics import fmean
from typing import Sequence

from .corpus import VerdictLabel
from .errors import BackendError, BackendFailure, EmptyInput, ValidationError
from .nle import NleText


class LengthMismatch(ValidationError):
    pass


class UndecodableNliOutput(BackendError):
    def __init__(self, raw: str):
        super().__init__(f"cannot decode NLI output {raw!r}")
        self.raw = raw


class SampleTooLarge(ValidationError):
    pass


class OutOfRangeRating(ValidationError):
    def __init__(self, file: str, item: str, value: str):
        super().__init__(f"{file}: item {item!r} has rating {value!r} outside 1..5")
        self.file = file
        self.item = item
        self.value = value


# ---------------------------------------------------------------------------
# Verdict scoring


def confusion_counts(
    predictions: Sequence[VerdictLabel], golds: Sequence[VerdictLabel]
) -> dict[tuple[VerdictLabel, VerdictLabel], int]:
    """Counts per (gold, predicted) label pair; total equals len(golds)."""
    counts = {(g, p): 0 for g in VerdictLabel for p in VerdictLabel}
    for gold, pred in zip(golds, predictions):
        counts[(gold, pred)] += 1
    return counts


def macro_f1(predictions: Sequence[VerdictLabel], golds: Sequence[VerdictLabel]) -> float:
    """Unweighted mean of per-class F1 over the two verdict classes.

    A class absent from both golds and predictions contributes F1 = 0 by
    convention (with a warning) rather than being dropped from the mean.
    """
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(golds)} golds")
    if not golds:
        raise EmptyInput("nothing to score")
    counts = confusion_counts(predictions, golds)
    f1s = []
    for label in VerdictLabel:
        tp = counts[(label, label)]
        fp = sum(counts[(g, label)] for g in VerdictLabel if g != label)
        fn = sum(counts[(label, p)] for p in VerdictLabel if p != label)
        if tp + fp + fn == 0:
            warnings.warn(f"class {label.value} absent from golds and predictions; F1 := 0")
            f1s.append(0.0)
            continue
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return sum(f1s) / len(f1s)


# ---------------------------------------------------------------------------
# Entailment audit of the explanations


class NliVerdict(Enum):
    ENTAILMENT = "Entailment"
    NEUTRAL = "Neutral"
    CONTRADICTION = "Contradiction"


_NLI_DECODE = {label.value.casefold(): label for label in NliVerdict}

NLI_PROMPT_PREFIX = "cb hypothesis: "
NLI_PREMISE_MARKER = " premise: "


def one_decimal_pct(count: int, total: int) -> float:
    """Percentage truncated to one decimal (integer arithmetic, no drift)."""
    return (count * 1000) // total / 10


@dataclass(frozen=True)
class NliReport:
    counts: dict[NliVerdict, int]
    percentages: dict[NliVerdict, float]

    @classmethod
    def from_verdicts(cls, verdicts: Sequence[NliVerdict]) -> "NliReport":
        if not verdicts:
            raise EmptyInput("no entailment verdicts to report")
        counts = {label: 0 for label in NliVerdict}
        for verdict in verdicts:
            counts[verdict] += 1
        total = len(verdicts)
        percentages = {label: one_decimal_pct(counts[label], total) for label in NliVerdict}
        return cls(counts=counts, percentages=percentages)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


class NliBackend(ABC):
    """Entailment backend: prompt in, one of three verdict words out."""

    identity: str = "unspecified"

    @abstractmethod
    def generate(self, prompt: str) -> str:
        raise NotImplementedError


class StubNliBackend(NliBackend):
    """Deterministic stub: programmed responses, then a hash-based fallback."""

    identity = "stub-nli"

    def __init__(self):
        self._programmed: dict[str, str] = {}

    def program(self, prompt: str, output: str) -> None:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        self._programmed[digest] = output

    def generate(self, prompt: str) -> str:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        if digest in self._programmed:
            return self._programmed[digest]
        return [v.value for v in NliVerdict][int(digest, 16) % 3]


def build_nli_prompt(claim: str, nle: NleText) -> str:
    """Serialize the entailment query: can the claim be deduced from the NLE."""
    if not claim.strip():
        raise EmptyInput("claim is empty")
    if not nle.text.strip():
        raise EmptyInput("explanation text is empty")
    return f"{NLI_PROMPT_PREFIX}{claim}{NLI_PREMISE_MARKER}{nle.text}"


def decode_nli(raw: str) -> NliVerdict:
    verdict = _NLI_DECODE.get(raw.strip().casefold())
    if verdict is None:
        raise UndecodableNliOutput(raw)
    return verdict


def evaluate_nli(records: Sequence[tuple[str, NleText]], nli_backend: NliBackend) -> NliReport:
    """Run the entailment audit over (claim, explanation) pairs."""
    if not records:
        raise EmptyInput("no records to evaluate")
    verdicts = []
    for claim, nle in records:
        prompt = build_nli_prompt(claim, nle)
        try:
            raw = nli_backend.generate(prompt)
        except Exception as exc:
            raise BackendFailure(f"NLI backend {nli_backend.identity!r}: {exc}") from exc
        verdicts.append(decode_nli(raw))
    return NliReport.from_verdicts(verdicts)


# ---------------------------------------------------------------------------
# Manual-evaluation schema

CRITERIA = ("plausibility", "fluency", "correctness")

RATING_SCALES: dict[str, dict[int, str]] = {
    "plausibility": {
        5: "Very Convincing",
        4: "Slightly Convincing",
        3: "Slightly Not Convincing",
        2: "Not Convincing",
        1: "Can Not Judge",
    },
    "fluency": {
        5: "Flawless English",
        4: "Good English",
        3: "Non-native English",
        2: "Disfluent English",
        1: "Incomprehensible",
    },
    "correctness": {
        5: "Absolutely True",
        4: "Probably True",
        3: "Probably Not True",
        2: "Absolutely Not True",
        1: "Can Not Judge",
    },
}

_COLUMNS = (
    "item_id",
    "claim",
    "nle",
    "plausibility",
    "fluency",
    "correctness",
    "annotator_id",
    "system_id",
)


@dataclass(frozen=True)
class AnnotationTask:
    """One item shown to an annotator: a claim, its explanation, three ratings."""

    item_id: str
    claim: str
    nle_text: str
    system_id: str


def _flatten(text: str) -> str:
    # Annotation files are flat tabular text; collapse line/tab structure.
    return " ".join(text.split())


def _legend_lines() -> list[str]:
    lines = ["# Rate each item on the three criteria using the integer scales below."]
    for criterion in CRITERIA:
        scale = " | ".join(
            f"{rating}={label}" for rating, label in sorted(RATING_SCALES[criterion].items(), reverse=True)
        )
        lines.append(f"# {criterion}: {scale}")
    lines.append("# Fill in your annotator_id and leave the other columns untouched.")
    return lines


def export_annotation_tasks(
    items: Sequence[tuple[str, str, str]],
    path: str | Path,
    n: int = 100,
    seed: int = 0,
    system_id: str = "claimcheck",
) -> list[AnnotationTask]:
    """Write a seeded sample of (item_id, claim, nle) triples for annotators.

    The file is tab-separated with a '#' legend embedding the rating
    scales; the rating and annotator columns start empty.
    """
    if n > len(items):
        raise SampleTooLarge(f"asked for {n} tasks but only {len(items)} items available")
    sampled = random.Random(seed).sample(list(items), n)
    tasks = [
        AnnotationTask(item_id=i, claim=c, nle_text=t, system_id=system_id)
        for i, c, t in sampled
    ]
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter="\t", lineterminator="\n")
    writer.writerow(_COLUMNS)
    for task in tasks:
        writer.writerow(
            [task.item_id, _flatten(task.claim), _flatten(task.nle_text), "", "", "", "", task.system_id]
        )
    Path(path).write_text("\n".join(_legend_lines()) + "\n" + buffer.getvalue(), encoding="utf-8")
    return tasks


def read_annotation_file(path: str | Path) -> list[dict[str, str]]:
    """Read a (possibly filled) annotation file back into row dicts."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    data_lines = [ln for ln in lines if not ln.startswith("#")]
    return list(csv.DictReader(data_lines, delimiter="\t"))


@dataclass
class AnnotationSummary:
    """Mean ratings per criterion, grouped by system and by annotator."""

    per_system: dict[str, dict[str, float]] = field(default_factory=dict)
    per_annotator: dict[str, dict[str, float]] = field(default_factory=dict)
    n_items: int = 0
    n_annotators: int = 0


def _parse_rating(file: str, item: str, value: str) -> int:
    try:
        rating = int(value.strip())
    except (ValueError, AttributeError):
        raise OutOfRangeRating(file, item, value) from None
    if not 1 <= rating <= 5:
        raise OutOfRangeRating(file, item, str(rating))
    return rating


def aggregate_annotations(files: Sequence[str | Path]) -> AnnotationSummary:
    """Arithmetic means per criterion across annotators and items.

    Grouped by the system column so externally produced files can be
    compared side by side; per-annotator means are reported as well.
    """
    if not files:
        raise EmptyInput("no annotation files")
    by_system: dict[str, dict[str, list[int]]] = {}
    by_annotator: dict[str, dict[str, list[int]]] = {}
    items: set[str] = set()
    for file in files:
        for row in read_annotation_file(file):
            item = row.get("item_id", "")
            items.add(item)
            system = row.get("system_id") or "unknown"
            annotator = row.get("annotator_id") or "unknown"
            for criterion in CRITERIA:
                rating = _parse_rating(str(file), item, row.get(criterion, ""))
                by_system.setdefault(system, {c: [] for c in CRITERIA})[criterion].append(rating)
                by_annotator.setdefault(annotator, {c: [] for c in CRITERIA})[criterion].append(rating)
    return AnnotationSummary(
        per_system={
            system: {c: fmean(vals) for c, vals in crits.items()}
            for system, crits in by_system.items()
        },
        per_annotator={
            annotator: {c: fmean(vals) for c, vals in crits.items()}
            for annotator, crits in by_annotator.items()
        },
        n_items=len(items),
        n_annotators=len(by_annotator),
    )
