"""Corpus readers, MRC triple construction and ground-truth label tensors.

File formats (all UTF-8):

* CoNLL: one token per line, whitespace-separated columns, BIO tag in the
  last column, blank line between sentences.
* Span JSONL: ``{"id": str, "tokens": [str], "spans": [{"start", "end", "label"}]}``
  with an INCLUSIVE ``end``. Predictions are written in the same schema,
  plus an optional ``score`` per span.
* Triple dump: ``{"sentence_id", "label", "query", "context", "answers"}``.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, SpanError, ValidationError
from .queries import QueryCatalog, lookup_query, require_valid
from .spans import EntitySpan, EntityType, TagSet

log = logging.getLogger(__name__)

Tokenizer = Callable[[str], list[str]]


def whitespace_tokenizer(text: str) -> list[str]:
    return text.split()


def char_tokenizer(text: str) -> list[str]:
    """One token per non-space character, for Chinese-style corpora."""
    return [c for c in text if not c.isspace()]


TOKENIZERS: dict[str, Tokenizer] = {"whitespace": whitespace_tokenizer, "char": char_tokenizer}


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[str, ...]
    spans: tuple[EntitySpan, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "spans", tuple(self.spans))
        if not self.tokens:
            raise ValidationError(f"sentence {self.id!r} has no tokens")
        for s in self.spans:
            if s.end >= len(self.tokens):
                raise SpanError(f"sentence {self.id!r}: span ({s.start}, {s.end}, {s.label}) "
                                f"exceeds length {len(self.tokens)}")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class MrcExample:
    sentence_id: str
    entity_type: EntityType
    query_tokens: tuple[str, ...]
    context_tokens: tuple[str, ...]
    answers: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        for s, e in self.answers:
            if not 0 <= s <= e < len(self.context_tokens):
                raise SpanError(f"answer ({s}, {e}) invalid for context of length {len(self.context_tokens)}")

    @property
    def n(self) -> int:
        return len(self.context_tokens)


@dataclass(frozen=True)
class LabelTensors:
    y_start: np.ndarray
    y_end: np.ndarray
    y_match: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    @property
    def n(self) -> int:
        return len(self.y_start)

    @property
    def starts(self) -> set[int]:
        return set(np.flatnonzero(self.y_start).tolist())

    @property
    def ends(self) -> set[int]:
        return set(np.flatnonzero(self.y_end).tolist())


def _dedupe(spans: Iterable[EntitySpan], sentence_id: str) -> list[EntitySpan]:
    seen = set()
    out = []
    for s in spans:
        if s.key in seen:
            log.warning("sentence %s: dropping duplicate span %s", sentence_id, s.key)
            continue
        seen.add(s.key)
        out.append(s)
    return out


def _resolve_tags(labels: Iterable[str], tags: TagSet | None) -> TagSet:
    if tags is not None:
        return tags
    names = sorted(set(labels))
    if not names:
        raise ValidationError("corpus contains no entity labels and no tag set was given")
    return TagSet.from_names(names)


def bio_to_spans(tags: Sequence[str]) -> list[tuple[int, int, str]]:
    """Inclusive (start, end, label) runs; a stray ``I-X`` opens a new entity."""
    spans = []
    start = label = None
    for i, tag in enumerate(list(tags) + ["O"]):
        if tag == "O":
            prefix, name = "O", None
        else:
            prefix, _, name = tag.partition("-")
        if label is not None and not (prefix == "I" and name == label):
            spans.append((start, i - 1, label))
            start = label = None
        if prefix in ("B", "I") and label is None:
            start, label = i, name
    return spans


def read_conll(path: str | Path, tags: TagSet | None = None) -> list[Sentence]:
    """Read a BIO-tagged CoNLL file.

    If ``tags`` is None the tag set is the sorted set of labels in the file.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read file: {exc}", path) from exc

    raw: list[tuple[list[str], list[str]]] = []
    tokens: list[str] = []
    bio: list[str] = []
    for lineno, line in enumerate(lines, 1):
        cols = line.split()
        if not cols:
            if tokens:
                raw.append((tokens, bio))
                tokens, bio = [], []
            continue
        if cols[0] == "-DOCSTART-":
            continue
        tag = cols[-1]
        if len(cols) < 2:
            raise DataFormatError(f"expected token and tag columns, got {line!r}", path, lineno)
        if tag != "O" and not (tag[:2] in ("B-", "I-") and len(tag) > 2):
            raise DataFormatError(f"unknown tag {tag!r} (expected B-, I- or O)", path, lineno)
        tokens.append(cols[0])
        bio.append(tag)
    if tokens:
        raw.append((tokens, bio))

    runs = [bio_to_spans(b) for _, b in raw]
    tags = _resolve_tags((lab for r in runs for *_, lab in r), tags)
    sentences = []
    for k, ((toks, _), r) in enumerate(zip(raw, runs)):
        sid = f"{path.stem}-{k}"
        spans = [EntitySpan(s, e, tags[lab]) for s, e, lab in r]
        sentences.append(Sentence(sid, toks, spans))
    return sentences


def read_span_jsonl(path: str | Path, tags: TagSet | None = None) -> list[Sentence]:
    """Read span JSONL records. Overlapping and nested spans are kept."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read file: {exc}", path) from exc

    records = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            rid, toks, spans = rec["id"], rec["tokens"], rec.get("spans", [])
            parsed = [(int(s["start"]), int(s["end"]), str(s["label"]), s.get("score")) for s in spans]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"malformed record: {exc}", path, lineno) from exc
        records.append((lineno, str(rid), toks, parsed))

    if tags is None:
        tags = _resolve_tags((lab for *_, sp in records for _, _, lab, _ in sp), None)
    sentences = []
    for lineno, rid, toks, parsed in records:
        spans = []
        for start, end, label, score in parsed:
            if label not in tags:
                raise DataFormatError(f"unknown entity type {label!r}; tag set is {tags.names}", path, lineno)
            if start > end:
                raise DataFormatError(f"span start {start} > end {end}", path, lineno)
            if start < 0 or end >= len(toks):
                raise DataFormatError(f"span ({start}, {end}) out of range for {len(toks)} tokens",
                                      path, lineno)
            spans.append(EntitySpan(start, end, tags[label], score))
        try:
            sentences.append(Sentence(rid, toks, _dedupe(spans, rid)))
        except ValidationError as exc:
            raise DataFormatError(str(exc), path, lineno) from exc
    return sentences


def read_corpus(path: str | Path, tags: TagSet | None = None) -> list[Sentence]:
    """Dispatch on extension: ``.jsonl``/``.json`` is span JSONL, anything else CoNLL."""
    if Path(path).suffix in (".jsonl", ".json"):
        return read_span_jsonl(path, tags)
    return read_conll(path, tags)


def sentence_to_record(s: Sentence, with_scores: bool = False) -> dict:
    spans = []
    for sp in sorted(s.spans, key=EntitySpan.sort_key):
        d = {"start": sp.start, "end": sp.end, "label": sp.label}
        if with_scores and sp.score is not None:
            d["score"] = round(float(sp.score), 9)
        spans.append(d)
    return {"id": s.id, "tokens": list(s.tokens), "spans": spans}


def write_span_jsonl(sentences: Iterable[Sentence], path: str | Path, with_scores: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in sentences:
            f.write(json.dumps(sentence_to_record(s, with_scores), ensure_ascii=False) + "\n")


def build_triples(sentences: Sequence[Sentence], tags: TagSet, catalog: QueryCatalog,
                  tokenizer: Tokenizer = whitespace_tokenizer) -> list[MrcExample]:
    """One example per (sentence, type), ordered by sentence then tag index.

    Examples whose type has no span in the sentence are kept as negatives.
    """
    require_valid(catalog, tags)
    queries = {t.name: tuple(tokenizer(lookup_query(catalog, t).text)) for t in tags}
    out = []
    for s in sentences:
        for t in tags:
            answers = sorted({(sp.start, sp.end) for sp in s.spans if sp.entity_type.name == t.name})
            out.append(MrcExample(s.id, t, queries[t.name], s.tokens, tuple(answers)))
    return out


def triple_to_record(ex: MrcExample) -> dict:
    return {"sentence_id": ex.sentence_id, "label": ex.entity_type.name,
            "query": list(ex.query_tokens), "context": list(ex.context_tokens),
            "answers": [list(a) for a in ex.answers]}


def dump_triples(examples: Iterable[MrcExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps(triple_to_record(ex), ensure_ascii=False) + "\n")


def make_label_tensors(example: MrcExample) -> LabelTensors:
    n = example.n
    y_start = np.zeros(n, dtype=np.int64)
    y_end = np.zeros(n, dtype=np.int64)
    for s, e in example.answers:
        y_start[s] = 1
        y_end[e] = 1
    return LabelTensors(y_start, y_end, frozenset(example.answers))


def decode_gold(tensors: LabelTensors) -> list[tuple[int, int]]:
    return sorted(tensors.y_match)
