"""Natural-language explanation assembly.

This module performs string assembly only. Any model-generated free text
here would be a defect: the explanation must contain exactly the verdict
word and the rationale, nothing invented.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import VerdictLabel
from .errors import ValidationError
from .rationale import Rationale
from .verdict import VerdictPrediction

NLE_PREFIX = "The evidence "
NLE_CONNECTIVE = " the claim because "

# Lowercase third-person inflection for mid-sentence use.
VERDICT_WORDS = {VerdictLabel.SUPPORTS: "supports", VerdictLabel.REFUTES: "refutes"}
_WORD_TO_LABEL = {word: label for label, word in VERDICT_WORDS.items()}


class RecordMismatch(ValidationError):
    def __init__(self, prediction_id: str, rationale_id: str):
        super().__init__(
            f"prediction is for record {prediction_id!r} but rationale is for {rationale_id!r}"
        )
        self.prediction_id = prediction_id
        self.rationale_id = rationale_id


@dataclass(frozen=True)
class NleText:
    """Assembled explanation; text reconstructs exactly from the template."""

    record_id: str
    text: str
    verdict_word: str
    rationale_text: str


def compose_nle(prediction: VerdictPrediction, rationale: Rationale) -> NleText:
    """Render "The evidence <verdict word> the claim because <rationale>".

    The rationale is spliced in verbatim, terminal punctuation and all.
    """
    if prediction.record_id != rationale.record_id:
        raise RecordMismatch(prediction.record_id, rationale.record_id)
    word = VERDICT_WORDS[prediction.label]
    return NleText(
        record_id=prediction.record_id,
        text=f"{NLE_PREFIX}{word}{NLE_CONNECTIVE}{rationale.text}",
        verdict_word=word,
        rationale_text=rationale.text,
    )


def parse_nle(text: str) -> tuple[str, str]:
    """Recover (verdict_word, rationale_text) from an explanation string."""
    if not text.startswith(NLE_PREFIX):
        raise ValidationError("not an assembled explanation: bad prefix")
    body = text[len(NLE_PREFIX):]
    word, sep, rationale_text = body.partition(NLE_CONNECTIVE)
    if not sep or word not in _WORD_TO_LABEL:
        raise ValidationError("not an assembled explanation: bad verdict word or connective")
    return word, rationale_text


def nle_from_row(record_id: str, text: str) -> NleText:
    """Rebuild an NleText from its stored (record_id, text) row."""
    word, rationale_text = parse_nle(text)
    return NleText(record_id=record_id, text=text, verdict_word=word, rationale_text=rationale_text)
