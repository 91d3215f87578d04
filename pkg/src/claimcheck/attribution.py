"""Shapley-value attribution over evidence features.

A coalition value function scores any subset of features; each feature's
attribution is its average marginal contribution over all feature
orderings:

    phi_i = sum over S subset of N\\{i} of |S|!(n-|S|-1)!/n! * (v(S+{i}) - v(S))

Exact enumeration is used for small n, a seeded permutation-sampling
estimator otherwise. For rationale generation the default value function
is the token-overlap F1 between the summary of the coalition-only
evidence and the reference rationale.
"""

from __future__ import annotations

import html
import math
import random
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import ClaimRecord
from .errors import EmptyInput, ValidationError
from .rationale import SummarizationBackend, SummaryConfig, generate_rationale
from .textutil import split_sentences, token_f1, tokenize

# A coalition value function: subset of feature indices -> real value.
# Must be deterministic and defined on the empty set.
CoalitionValueFn = Callable[[frozenset[int]], float]

EXACT_FEATURE_LIMIT = 14  # 2^n subset enumeration guard


class TooManyFeatures(ValidationError):
    def __init__(self, n: int):
        super().__init__(
            f"{n} features exceeds the exact-enumeration limit of {EXACT_FEATURE_LIMIT}; "
            "use sampled_shapley"
        )
        self.n = n


@dataclass(frozen=True)
class Feature:
    """One span of the evidence at the chosen granularity."""

    index: int
    text: str
    granularity: str  # "sentence" or "token"


@dataclass(frozen=True)
class AttributionResult:
    features: tuple[Feature, ...]
    phi: tuple[float, ...]
    value_empty: float
    value_full: float
    method: str  # "exact" or "sampled"
    num_permutations: int | None = None
    seed: int | None = None


def evidence_features(evidence: str, granularity: str = "sentence") -> list[Feature]:
    """Partition evidence into ordered features (sentences or tokens)."""
    if granularity == "sentence":
        spans = split_sentences(evidence)
    elif granularity == "token":
        spans = tokenize(evidence)
    else:
        raise ValidationError(f"unknown granularity {granularity!r}")
    if not spans:
        raise EmptyInput("evidence has no features")
    return [Feature(index=i, text=span, granularity=granularity) for i, span in enumerate(spans)]


def _subset(mask: int, n: int) -> frozenset[int]:
    return frozenset(i for i in range(n) if mask >> i & 1)


def exact_shapley(features: Sequence[Feature], value_fn: CoalitionValueFn) -> AttributionResult:
    """Exact values by full subset enumeration; n is capped at 14."""
    n = len(features)
    if n == 0:
        raise EmptyInput("no features to attribute")
    if n > EXACT_FEATURE_LIMIT:
        raise TooManyFeatures(n)

    values = [value_fn(_subset(mask, n)) for mask in range(1 << n)]
    # weight[s] = s! (n-s-1)! / n!  for a coalition of size s joined by one player
    n_fact = math.factorial(n)
    weight = [math.factorial(s) * math.factorial(n - s - 1) / n_fact for s in range(n)]

    phi = [0.0] * n
    for i in range(n):
        bit = 1 << i
        for mask in range(1 << n):
            if mask & bit:
                continue
            size = bin(mask).count("1")
            phi[i] += weight[size] * (values[mask | bit] - values[mask])

    return AttributionResult(
        features=tuple(features),
        phi=tuple(phi),
        value_empty=values[0],
        value_full=values[(1 << n) - 1],
        method="exact",
    )


def sampled_shapley(
    features: Sequence[Feature],
    value_fn: CoalitionValueFn,
    num_permutations: int,
    seed: int,
) -> AttributionResult:
    """Monte Carlo permutation estimator of the same attribution.

    Each sampled ordering contributes one marginal per feature; the
    estimate is the mean. Marginals telescope per permutation, so the
    efficiency identity sum(phi) = v(N) - v(empty) holds by construction.
    Deterministic given the seed.
    """
    n = len(features)
    if n == 0:
        raise EmptyInput("no features to attribute")
    if num_permutations < 1:
        raise ValidationError("num_permutations must be >= 1")

    cache: dict[int, float] = {}

    def value(mask: int) -> float:
        if mask not in cache:
            cache[mask] = value_fn(_subset(mask, n))
        return cache[mask]

    rng = random.Random(seed)
    totals = [0.0] * n
    value_empty = value(0)
    full_mask = (1 << n) - 1
    for _ in range(num_permutations):
        order = list(range(n))
        rng.shuffle(order)
        mask = 0
        previous = value_empty
        for i in order:
            mask |= 1 << i
            current = value(mask)
            totals[i] += current - previous
            previous = current

    return AttributionResult(
        features=tuple(features),
        phi=tuple(t / num_permutations for t in totals),
        value_empty=value_empty,
        value_full=value(full_mask),
        method="sampled",
        num_permutations=num_permutations,
        seed=seed,
    )


def rationale_value_fn(
    record: ClaimRecord,
    backend: SummarizationBackend,
    config: SummaryConfig,
    granularity: str = "sentence",
) -> CoalitionValueFn:
    """Value function scoring how well a feature coalition reproduces the rationale.

    evaluate(S) summarizes the evidence restricted to the features in S
    (everything else removed, order preserved) and returns the
    token-overlap F1 against the reference rationale of the full
    evidence. evaluate(empty) is 0 by definition. Coalition perturbation
    is removal, not mask substitution, so any backend can be plugged in.
    """
    features = evidence_features(record.evidence, granularity)
    reference = generate_rationale(record.evidence, backend, config, record_id=record.id).text

    def evaluate(subset: frozenset[int]) -> float:
        if not subset:
            return 0.0
        coalition_text = " ".join(features[i].text for i in sorted(subset))
        summary = generate_rationale(coalition_text, backend, config, record_id=record.id).text
        return token_f1(summary, reference)

    return evaluate


@dataclass(frozen=True)
class HighlightEntry:
    text: str
    phi: float
    polarity: str  # "positive", "negative", or "zero"
    intensity: float  # |phi| / max|phi|, 0 when all phi are 0


@dataclass(frozen=True)
class HighlightDoc:
    entries: tuple[HighlightEntry, ...]
    html: str


_POSITIVE_RGB = "33, 102, 172"  # blue
_NEGATIVE_RGB = "178, 24, 43"  # red


def export_highlights(result: AttributionResult, title: str = "") -> HighlightDoc:
    """Turn an attribution into per-feature highlight entries plus markup.

    Blue marks positive contributions, red negative; intensity scales
    with |phi| relative to the largest magnitude.
    """
    max_abs = max((abs(p) for p in result.phi), default=0.0)
    entries = []
    for feature, phi in zip(result.features, result.phi):
        if phi > 0:
            polarity = "positive"
        elif phi < 0:
            polarity = "negative"
        else:
            polarity = "zero"
        intensity = abs(phi) / max_abs if max_abs > 0 else 0.0
        entries.append(HighlightEntry(feature.text, phi, polarity, intensity))

    spans = []
    for entry in entries:
        escaped = html.escape(entry.text)
        if entry.polarity == "zero" or entry.intensity == 0.0:
            spans.append(f"<span title=\"phi={entry.phi:+.4f}\">{escaped}</span>")
        else:
            rgb = _POSITIVE_RGB if entry.polarity == "positive" else _NEGATIVE_RGB
            spans.append(
                f"<span style=\"background-color: rgba({rgb}, {entry.intensity:.3f})\" "
                f"title=\"phi={entry.phi:+.4f}\">{escaped}</span>"
            )
    heading = f"<h2>{html.escape(title)}</h2>\n" if title else ""
    markup = heading + "<p>" + " ".join(spans) + "</p>"
    return HighlightDoc(entries=tuple(entries), html=markup)


def render_highlight_page(docs: Sequence[HighlightDoc]) -> str:
    """Standalone HTML page wrapping one or more highlight documents."""
    body = "\n".join(doc.html for doc in docs)
    return (
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
        "<title>Rationale attribution highlights</title>\n"
        "<style>body { font-family: sans-serif; max-width: 50em; margin: 2em auto; }</style>\n"
        "</head>\n<body>\n"
        "<p>Blue marks features pushing the rationale toward its reference; "
        "red marks features working against it.</p>\n"
        f"{body}\n</body>\n</html>\n"
    )
