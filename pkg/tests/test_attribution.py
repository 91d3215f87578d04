from __future__ import annotations

import itertools
import math
import random

import pytest

from claimcheck.attribution import (
    EXACT_FEATURE_LIMIT,
    AttributionResult,
    Feature,
    TooManyFeatures,
    evidence_features,
    exact_shapley,
    export_highlights,
    rationale_value_fn,
    render_highlight_page,
    sampled_shapley,
)
from claimcheck.corpus import ClaimRecord, VerdictLabel
from claimcheck.rationale import LeadSummarizer, SummaryConfig


def features_of(n):
    return [Feature(index=i, text=f"f{i}", granularity="sentence") for i in range(n)]


def brute_force_shapley(n, value_fn):
    """Independent oracle: average marginals over all n! orderings."""
    totals = [0.0] * n
    for order in itertools.permutations(range(n)):
        coalition = frozenset()
        for i in order:
            with_i = coalition | {i}
            totals[i] += value_fn(with_i) - value_fn(coalition)
            coalition = with_i
    return [t / math.factorial(n) for t in totals]


def random_game(n, rng):
    """A random coalition game with values in [0, 1] and v(empty)=0."""
    table = {frozenset(): 0.0}
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            table[frozenset(combo)] = rng.random()
    return table.__getitem__


# ---------------------------------------------------------------------------
# Feature extraction


def test_sentence_features_partition_in_order():
    features = evidence_features("One here. Two there. Three low.")
    assert [f.text for f in features] == ["One here.", "Two there.", "Three low."]
    assert [f.index for f in features] == [0, 1, 2]


def test_token_features():
    features = evidence_features("a b c", granularity="token")
    assert [f.text for f in features] == ["a", "b", "c"]


# ---------------------------------------------------------------------------
# Exact values


HAND_GAME = {
    frozenset(): 0.0,
    frozenset({0}): 1.0,
    frozenset({1}): 1.0,
    frozenset({2}): 0.0,
    frozenset({0, 1}): 2.0,
    frozenset({0, 2}): 2.0,
    frozenset({1, 2}): 1.0,
    frozenset({0, 1, 2}): 3.0,
}


def test_exact_three_feature_hand_game():
    result = exact_shapley(features_of(3), HAND_GAME.__getitem__)
    oracle = brute_force_shapley(3, HAND_GAME.__getitem__)
    assert result.phi == pytest.approx(oracle, abs=1e-12)
    assert result.phi == pytest.approx((1.5, 1.0, 0.5), abs=1e-12)
    assert result.value_empty == 0.0
    assert result.value_full == 3.0


def test_exact_constant_game_gives_zero():
    result = exact_shapley(features_of(4), lambda s: 2.5)
    assert result.phi == pytest.approx([0.0] * 4, abs=1e-12)


def test_exact_additive_game_returns_weights():
    weights = [0.3, -1.2, 0.0, 4.5, 2.25]
    result = exact_shapley(features_of(5), lambda s: sum(weights[i] for i in s))
    assert result.phi == pytest.approx(weights, abs=1e-9)


def test_exact_symmetric_features_get_equal_phi():
    # v depends only on coalition size, so all features are symmetric.
    result = exact_shapley(features_of(5), lambda s: math.sqrt(len(s)))
    assert max(result.phi) - min(result.phi) < 1e-12


def test_exact_null_player():
    # Feature 2 never changes the value.
    value_fn = lambda s: sum(1.0 for i in s if i != 2)
    result = exact_shapley(features_of(4), value_fn)
    assert result.phi[2] == pytest.approx(0.0, abs=1e-12)


def test_exact_efficiency_on_random_games():
    rng = random.Random(123)
    for _ in range(30):
        n = rng.randint(1, 8)
        value_fn = random_game(n, rng)
        result = exact_shapley(features_of(n), value_fn)
        assert sum(result.phi) == pytest.approx(result.value_full - result.value_empty, abs=1e-9)


def test_exact_feature_limit():
    with pytest.raises(TooManyFeatures):
        exact_shapley(features_of(EXACT_FEATURE_LIMIT + 1), lambda s: 0.0)


def test_exact_agrees_with_permutation_oracle_on_random_games():
    rng = random.Random(7)
    for _ in range(5):
        n = rng.randint(2, 5)
        value_fn = random_game(n, rng)
        result = exact_shapley(features_of(n), value_fn)
        assert result.phi == pytest.approx(brute_force_shapley(n, value_fn), abs=1e-12)


# ---------------------------------------------------------------------------
# Sampled values


def test_sampled_single_permutation_is_its_marginals():
    seed = 17
    n = 4
    value_fn = HAND_GAME.__getitem__ if n == 3 else random_game(n, random.Random(0))
    result = sampled_shapley(features_of(n), value_fn, num_permutations=1, seed=seed)
    # Reproduce the permutation the estimator drew and its telescoping marginals.
    order = list(range(n))
    random.Random(seed).shuffle(order)
    expected = [0.0] * n
    coalition = frozenset()
    for i in order:
        expected[i] = value_fn(coalition | {i}) - value_fn(coalition)
        coalition = coalition | {i}
    assert result.phi == pytest.approx(expected, abs=1e-12)


def test_sampled_deterministic_given_seed():
    value_fn = random_game(6, random.Random(2))
    a = sampled_shapley(features_of(6), value_fn, num_permutations=50, seed=5)
    b = sampled_shapley(features_of(6), value_fn, num_permutations=50, seed=5)
    assert a.phi == b.phi


def test_sampled_efficiency_holds_by_construction():
    value_fn = random_game(7, random.Random(3))
    result = sampled_shapley(features_of(7), value_fn, num_permutations=20, seed=9)
    assert sum(result.phi) == pytest.approx(result.value_full - result.value_empty, abs=1e-9)


def test_sampled_converges_to_exact():
    value_fn = random_game(8, random.Random(4))
    features = features_of(8)
    exact = exact_shapley(features, value_fn)
    sampled = sampled_shapley(features, value_fn, num_permutations=2000, seed=11)
    linf = max(abs(s - e) for s, e in zip(sampled.phi, exact.phi))
    assert linf <= 0.05


# ---------------------------------------------------------------------------
# Rationale value function


BACKEND = LeadSummarizer()
SHORT_CONFIG = SummaryConfig(min_tokens=1, max_tokens=120)


def record_with(evidence, record_id="r1"):
    return ClaimRecord(id=record_id, claim="some claim", date="2021-01-01", source="x",
                       verdict=VerdictLabel.SUPPORTS, evidence=evidence, url="https://x")


def test_value_fn_empty_coalition_is_zero():
    value_fn = rationale_value_fn(record_with("Water is wet."), BACKEND, SHORT_CONFIG)
    assert value_fn(frozenset()) == 0.0


def test_value_fn_single_sentence_identity():
    # One sentence; the coalition containing it reproduces the reference
    # exactly, so token-overlap F1 is 1.0 (hand check: identical multisets).
    value_fn = rationale_value_fn(record_with("Water is wet."), BACKEND, SHORT_CONFIG)
    assert value_fn(frozenset({0})) == pytest.approx(1.0)


def test_value_fn_full_coalition_reproduces_reference():
    evidence = "First fact stated. Second fact follows. Third fact closes."
    value_fn = rationale_value_fn(record_with(evidence), BACKEND, SHORT_CONFIG)
    assert value_fn(frozenset({0, 1, 2})) == pytest.approx(1.0)


def test_value_fn_partial_coalition_hand_computed():
    # With a 4-token floor the reference summary spans both sentences,
    # "aa bb. cc dd." (4 tokens). Coalition {0} summarizes to "aa bb."
    # (2 tokens); overlap 2 tokens, so F1 = 2*2/(2+4) = 2/3.
    evidence = "aa bb. cc dd."
    config = SummaryConfig(min_tokens=4, max_tokens=120)
    value_fn = rationale_value_fn(record_with(evidence), BACKEND, config)
    assert value_fn(frozenset({0})) == pytest.approx(2 / 3)


# ---------------------------------------------------------------------------
# Highlight export


def result_with_phi(phi):
    return AttributionResult(features=tuple(features_of(len(phi))), phi=tuple(phi),
                             value_empty=0.0, value_full=sum(phi), method="exact")


def test_highlight_polarities():
    doc = export_highlights(result_with_phi([0.5, -0.2, 0.0]))
    assert [e.polarity for e in doc.entries] == ["positive", "negative", "zero"]
    assert doc.entries[0].intensity == pytest.approx(1.0)
    assert doc.entries[1].intensity == pytest.approx(0.4)


def test_highlight_uniform_intensity_when_all_equal():
    doc = export_highlights(result_with_phi([0.3, 0.3, 0.3]))
    assert all(e.intensity == pytest.approx(1.0) for e in doc.entries)


def test_highlight_zero_scale_degenerate():
    doc = export_highlights(result_with_phi([0.0, 0.0]))
    assert all(e.intensity == 0.0 for e in doc.entries)
    assert all(e.polarity == "zero" for e in doc.entries)


def test_highlight_markup_escapes_and_colors():
    features = [Feature(0, "a <b> tag.", "sentence"), Feature(1, "plain.", "sentence")]
    result = AttributionResult(features=tuple(features), phi=(0.5, -0.5), value_empty=0.0,
                               value_full=0.0, method="exact")
    doc = export_highlights(result, title="record r1")
    assert "a &lt;b&gt; tag." in doc.html
    assert "rgba(33, 102, 172" in doc.html  # blue for positive
    assert "rgba(178, 24, 43" in doc.html  # red for negative
    page = render_highlight_page([doc])
    assert page.startswith("<!DOCTYPE html>")
    assert "record r1" in page
