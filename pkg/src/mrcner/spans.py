"""Entity types, tag sets and typed token spans.

Span ends are INCLUSIVE everywhere in this package: ``EntitySpan(2, 4, t)``
covers tokens 2, 3 and 4.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field

from .errors import SpanError, ValidationError


@dataclass(frozen=True, order=True)
class EntityType:
    index: int
    name: str

    def __post_init__(self):
        if self.index < 0:
            raise ValidationError(f"entity type index must be >= 0, got {self.index}")
        if not self.name:
            raise ValidationError("entity type name must be non-empty")

    def __str__(self) -> str:
        return self.name


class TagSet:
    """Ordered, non-empty collection of entity types indexed from 0."""

    def __init__(self, types: Iterable[EntityType]):
        types = tuple(types)
        if not types:
            raise ValidationError("tag set must be non-empty")
        names = [t.name for t in types]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate entity type names: {dupes}")
        if [t.index for t in types] != list(range(len(types))):
            raise ValidationError("entity type indexes must be contiguous from 0 in order")
        self._types = types
        self._by_name = {t.name: t for t in types}

    @classmethod
    def from_names(cls, names: Iterable[str]) -> TagSet:
        return cls(EntityType(i, n) for i, n in enumerate(names))

    @property
    def types(self) -> tuple[EntityType, ...]:
        return self._types

    @property
    def names(self) -> list[str]:
        return [t.name for t in self._types]

    def __getitem__(self, name: str) -> EntityType:
        try:
            return self._by_name[name]
        except KeyError:
            raise ValidationError(f"unknown entity type {name!r}; known: {self.names}") from None

    def __contains__(self, name: object) -> bool:
        return name in self._by_name

    def __iter__(self) -> Iterator[EntityType]:
        return iter(self._types)

    def __len__(self) -> int:
        return len(self._types)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TagSet) and self._types == other._types

    def __hash__(self) -> int:
        return hash(self._types)

    def __repr__(self) -> str:
        return f"TagSet({self.names})"


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int
    entity_type: EntityType
    score: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise SpanError(f"invalid span bounds ({self.start}, {self.end}); need 0 <= start <= end")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise SpanError(f"span score must lie in [0, 1], got {self.score}")

    @property
    def label(self) -> str:
        return self.entity_type.name

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.start, self.end, self.entity_type.name)

    def sort_key(self) -> tuple[int, int, int]:
        return (self.start, self.end, self.entity_type.index)

    def __len__(self) -> int:
        return self.end - self.start + 1


def spans_overlap(a: EntitySpan, b: EntitySpan) -> bool:
    """True iff the closed intervals of ``a`` and ``b`` share a token."""
    return a.start <= b.end and b.start <= a.end


def is_nested(outer: EntitySpan, inner: EntitySpan) -> bool:
    """True iff ``inner`` lies inside ``outer`` and the intervals differ.

    Identical intervals are not nested, whatever their types.
    """
    if (outer.start, outer.end) == (inner.start, inner.end):
        return False
    return outer.start <= inner.start and inner.end <= outer.end


def sort_spans(spans: Iterable[EntitySpan]) -> list[EntitySpan]:
    return sorted(spans, key=EntitySpan.sort_key)


def resolve_flat_conflicts(spans: Sequence[EntitySpan]) -> list[EntitySpan]:
    """Greedy non-overlapping subset for flat-NER output.

    Spans are visited by descending score, ties broken by smaller start,
    smaller end, then smaller type index; a span is kept when it overlaps
    nothing kept so far. The result is returned in canonical
    (start, end, type index) order.
    """
    for s in spans:
        if s.score is None:
            raise SpanError("resolve_flat_conflicts requires scored spans; got an unscored span "
                            f"({s.start}, {s.end}, {s.label})")
    order = sorted(spans, key=lambda s: (-s.score, s.start, s.end, s.entity_type.index))
    kept: list[EntitySpan] = []
    for s in order:
        if not any(spans_overlap(s, k) for k in kept):
            kept.append(s)
    return sort_spans(kept)
