"""Span-level micro-averaged precision, recall and F1."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from .errors import ValidationError
from .spans import EntitySpan

SpanKey = tuple[int, int, str]


@dataclass
class EvalResult:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    per_type: dict[str, EvalResult] = field(default_factory=dict)

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other: EvalResult) -> EvalResult:
        return EvalResult(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def restrict(self, names: Iterable[str]) -> EvalResult:
        """Pooled counts over a subset of types."""
        names = set(names)
        out = EvalResult()
        for name, r in self.per_type.items():
            if name in names:
                out = out + r
                out.per_type[name] = r
        return out

    def to_dict(self) -> dict:
        d = {"tp": self.tp, "fp": self.fp, "fn": self.fn, "precision": self.precision,
             "recall": self.recall, "f1": self.f1}
        if self.per_type:
            d["per_type"] = {k: v.to_dict() for k, v in sorted(self.per_type.items())}
        return d


def _keys(spans: Iterable) -> set[SpanKey]:
    out = set()
    for s in spans:
        out.add(s.key if isinstance(s, EntitySpan) else (int(s[0]), int(s[1]), str(s[2])))
    return out


def micro_prf(gold: Mapping[str, Iterable], pred: Mapping[str, Iterable],
              type_names: Iterable[str] = ()) -> EvalResult:
    """Exact (start, end, type) matching, counts pooled over all sentences.

    ``gold`` and ``pred`` map sentence id to spans (``EntitySpan`` or
    ``(start, end, label)`` tuples); duplicates count once. ``type_names``
    forces per-type entries for types with no gold or predicted spans.
    """
    if set(gold) != set(pred):
        only_g = sorted(set(gold) - set(pred))[:5]
        only_p = sorted(set(pred) - set(gold))[:5]
        raise ValidationError(f"sentence ids differ: gold-only {only_g}, pred-only {only_p}")
    per_type: dict[str, EvalResult] = {name: EvalResult() for name in type_names}
    for sid in gold:
        g, p = _keys(gold[sid]), _keys(pred[sid])
        for key in g | p:
            r = per_type.setdefault(key[2], EvalResult())
            if key in g and key in p:
                r.tp += 1
            elif key in p:
                r.fp += 1
            else:
                r.fn += 1
    total = EvalResult()
    for r in per_type.values():
        total = total + r
    total.per_type = dict(sorted(per_type.items()))
    return total


def corpus_spans(sentences: Iterable) -> dict[str, list[EntitySpan]]:
    return {s.id: list(s.spans) for s in sentences}
