import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrcner.errors import SpanError, ValidationError
from mrcner.spans import (EntitySpan, EntityType, TagSet, is_nested, resolve_flat_conflicts,
                          spans_overlap)

PER, ORG, LOC = EntityType(0, "PER"), EntityType(1, "ORG"), EntityType(2, "LOC")
TYPES = [PER, ORG, LOC]


def sp(s, e, t=PER, score=None):
    return EntitySpan(s, e, t, score)


@pytest.mark.parametrize("a, b, expected", [
    ((0, 1), (1, 2), True),
    ((0, 1), (2, 3), False),
    ((0, 5), (2, 3), True),
])
def test_spans_overlap(a, b, expected):
    assert spans_overlap(sp(*a), sp(*b)) is expected


@pytest.mark.parametrize("outer, inner, expected", [
    ((0, 5), (2, 3), True),
    ((0, 3), (0, 3), False),
    ((2, 3), (0, 5), False),
])
def test_is_nested(outer, inner, expected):
    assert is_nested(sp(*outer), sp(*inner)) is expected


def test_identical_interval_of_other_type_not_nested():
    assert not is_nested(sp(0, 3, PER), sp(0, 3, ORG))


def test_span_invariants():
    with pytest.raises(SpanError):
        EntitySpan(3, 2, PER)
    with pytest.raises(SpanError):
        EntitySpan(-1, 2, PER)
    with pytest.raises(SpanError):
        EntitySpan(0, 2, PER, 1.5)


def test_span_equality_ignores_score():
    assert sp(0, 1, PER, 0.2) == sp(0, 1, PER, 0.9)
    assert len({sp(0, 1, PER, 0.2), sp(0, 1, PER, 0.9)}) == 1


def test_tagset_validation():
    with pytest.raises(ValidationError):
        TagSet([])
    with pytest.raises(ValidationError):
        TagSet.from_names(["A", "A"])
    with pytest.raises(ValidationError):
        TagSet([EntityType(1, "A")])
    tags = TagSet.from_names(["A", "B"])
    assert tags["B"].index == 1
    assert "A" in tags and "C" not in tags


def test_resolve_flat_conflicts_examples():
    got = resolve_flat_conflicts([sp(0, 2, PER, 0.9), sp(1, 3, ORG, 0.8)])
    assert [(s.start, s.end, s.label) for s in got] == [(0, 2, "PER")]
    assert resolve_flat_conflicts([]) == []
    both = [sp(0, 1, PER, 0.5), sp(3, 4, ORG, 0.5)]
    assert resolve_flat_conflicts(both) == both


def test_resolve_flat_conflicts_needs_scores():
    with pytest.raises(SpanError, match="scored"):
        resolve_flat_conflicts([sp(0, 1, PER)])


def test_resolve_flat_conflicts_tie_break():
    # equal scores: smaller start wins, then smaller end, then smaller type index
    got = resolve_flat_conflicts([sp(1, 3, PER, 0.5), sp(0, 2, ORG, 0.5)])
    assert [s.key for s in got] == [(0, 2, "ORG")]
    got = resolve_flat_conflicts([sp(0, 3, PER, 0.5), sp(0, 2, ORG, 0.5)])
    assert [s.key for s in got] == [(0, 2, "ORG")]
    got = resolve_flat_conflicts([sp(0, 2, ORG, 0.5), sp(0, 2, PER, 0.5)])
    assert [s.key for s in got] == [(0, 2, "PER")]


def _greedy_by_subsets(spans):
    """Oracle: the greedy output is the unique non-overlapping subset in which
    every excluded span overlaps an included one that precedes it in greedy order."""
    order = sorted(spans, key=lambda s: (-s.score, s.start, s.end, s.entity_type.index))
    rank = {id(s): k for k, s in enumerate(order)}
    for r in range(len(spans), -1, -1):
        for subset in itertools.combinations(spans, r):
            if any(spans_overlap(a, b) for a, b in itertools.combinations(subset, 2)):
                continue
            chosen = {id(s) for s in subset}
            ok = all(any(spans_overlap(s, k) and rank[id(k)] < rank[id(s)] for k in subset)
                     for s in spans if id(s) not in chosen)
            if ok:
                return subset
    raise AssertionError("no greedy-consistent subset")


span_strategy = st.builds(
    lambda s, length, t, score: EntitySpan(s, s + length, TYPES[t], score),
    st.integers(0, 10), st.integers(0, 4), st.integers(0, 2),
    st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]),
)


@settings(max_examples=200, deadline=None)
@given(st.lists(span_strategy, max_size=8, unique_by=lambda s: s.key))
def test_resolve_flat_conflicts_properties(spans):
    out = resolve_flat_conflicts(spans)
    assert not any(spans_overlap(a, b) for a, b in itertools.combinations(out, 2))
    assert set(out) <= set(spans)
    assert resolve_flat_conflicts(out) == out
    for dropped in set(spans) - set(out):
        assert any(spans_overlap(dropped, k) and k.score >= dropped.score for k in out)
    assert set(out) == set(_greedy_by_subsets(spans))


@given(span_strategy, span_strategy)
def test_overlap_symmetric_and_nesting_antisymmetric(a, b):
    assert spans_overlap(a, b) == spans_overlap(b, a)
    assert not (is_nested(a, b) and is_nested(b, a))
    if is_nested(a, b):
        assert spans_overlap(a, b)
