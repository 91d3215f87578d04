"""Tokenization and text segmentation shared by the pipeline.

The sentence splitter is a deliberately simple punctuation/newline rule:
good enough for lead-sentence summaries and sentence-level attribution
without pulling in an NLP dependency.
"""

from __future__ import annotations

import re
import string
from collections import Counter

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)
_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+|\n+")
_PARAGRAPH_BOUNDARY = re.compile(r"\n\s*\n")


def tokenize(text: str) -> list[str]:
    """Whitespace tokens; the token unit of the bundled stub backends."""
    return text.split()


def stats_tokenize(text: str) -> list[str]:
    """Whitespace tokens after punctuation stripping, for corpus statistics."""
    return text.translate(_PUNCT_TABLE).split()


def split_sentences(text: str) -> list[str]:
    """Split after terminal punctuation or at line breaks, keeping punctuation."""
    return [p.strip() for p in _SENTENCE_BOUNDARY.split(text) if p and p.strip()]


def split_paragraphs(text: str) -> list[str]:
    """Split on blank lines, falling back to single newlines when there are none."""
    parts = [p.strip() for p in _PARAGRAPH_BOUNDARY.split(text) if p.strip()]
    if len(parts) <= 1 and "\n" in text.strip():
        parts = [p.strip() for p in text.split("\n") if p.strip()]
    return parts


def token_f1(candidate: str, reference: str) -> float:
    """Token-overlap F1 between two texts (multiset intersection)."""
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand and not ref:
        return 1.0
    overlap = sum((Counter(cand) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    return 2.0 * overlap / (len(cand) + len(ref))
