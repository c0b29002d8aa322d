"""Sentinel-marked synthetic corpus with nested entities.

An entity of type ``A`` is written ``( @a w ... @a )`` and its span covers
everything from the opening parenthesis to the closing one, inclusive.
Outer entities may contain an inner entity of a different type, so the
corpus always exercises overlap. Filler tokens are ``w0`` .. ``w{k-1}``.

With a query that contains ``@a`` (see :func:`sentinel_catalog`) the type
of every entity is readable from the query alone, which is what the
zero-shot and query-ablation experiments rely on.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .data import Sentence
from .model import Vocab
from .queries import QueryCatalog, QueryStrategy, build_position_index_query
from .spans import EntitySpan, EntityType, TagSet, is_nested

DEFAULT_TYPES = ("A", "B", "C")


def sentinel(name: str) -> str:
    return "@" + name.lower()


def sentinel_catalog(names: Sequence[str], strategy: QueryStrategy | str = QueryStrategy.AnnotationGuideline,
                     dataset_id: str = "synthetic") -> QueryCatalog:
    """Catalog whose queries mention each type's sentinel token."""
    strategy = QueryStrategy(strategy)
    if strategy is QueryStrategy.PositionIndex:
        return QueryCatalog.position_index(dataset_id)
    templates = {
        QueryStrategy.AnnotationGuideline: "find spans marked with {s} on both sides",
        QueryStrategy.Keyword: "{s}",
        QueryStrategy.Synonyms: "{s} mention",
        QueryStrategy.KeywordSynonyms: "{s} {s} mention",
        QueryStrategy.RuleTemplate: "which {s} is mentioned in the text",
        QueryStrategy.Wikipedia: "a {s} is a span enclosed by parentheses and the {s} marker",
    }
    return QueryCatalog(dataset_id, strategy, {n: templates[strategy].format(s=sentinel(n)) for n in names})


def synthetic_vocab(types: Sequence[str] = DEFAULT_TYPES, n_filler: int = 40,
                    catalogs: Sequence[QueryCatalog] = (), n_position_words: int = 20) -> Vocab:
    """Every token the generator and the given catalogs can produce.

    Plays the part of a pretrained vocabulary: tokens never seen in training
    keep distinct (randomly initialized) embeddings instead of collapsing
    onto the unknown token.
    """
    tokens = {"(", ")", *(sentinel(t) for t in types), *(f"w{k}" for k in range(n_filler))}
    for strategy in QueryStrategy:
        if strategy is not QueryStrategy.PositionIndex:
            for text in sentinel_catalog(types, strategy).entries.values():
                tokens.update(text.split())
    for k in range(n_position_words):
        tokens.add(build_position_index_query(EntityType(k, "x")).text)
    for cat in catalogs:
        for text in cat.entries.values():
            tokens.update(text.split())
    return Vocab(sorted(tokens))


def _entity(rng, type_name: str, tags: TagSet, inner_choices: list[str], nest_prob: float,
            n_filler: int) -> tuple[list[str], list[tuple[int, int, str]]]:
    """Tokens and relative spans for one (possibly nesting) entity."""
    mark = sentinel(type_name)
    body: list[str] = []
    spans: list[tuple[int, int, str]] = []
    if inner_choices and rng.random() < nest_prob:
        inner = str(rng.choice(inner_choices))
        before = rng.integers(0, 3)
        body += [f"w{rng.integers(n_filler)}" for _ in range(before)]
        inner_toks, inner_spans = _entity(rng, inner, tags, [], 0.0, n_filler)
        offset = 2 + len(body)
        spans += [(s + offset, e + offset, t) for s, e, t in inner_spans]
        body += inner_toks
        body += [f"w{rng.integers(n_filler)}" for _ in range(rng.integers(0, 3))]
    else:
        body += [f"w{rng.integers(n_filler)}" for _ in range(rng.integers(1, 4))]
    toks = ["(", mark, *body, mark, ")"]
    spans.append((0, len(toks) - 1, type_name))
    return toks, spans


def generate_sentence(rng: np.random.Generator, tags: TagSet, sid: str, *, max_entities: int = 3,
                      nest_prob: float = 0.4, n_filler: int = 40, empty_prob: float = 0.1,
                      repeat_types: bool = True) -> Sentence:
    """One sentence of up to ``max_entities`` top-level entities.

    With ``repeat_types`` a type may occur several times at top level, so a
    query can have several answers; an inner entity never shares the type of
    its outer entity.
    """
    names = tags.names
    tokens: list[str] = []
    spans: list[tuple[int, int, str]] = []
    k = 0 if rng.random() < empty_prob else int(rng.integers(1, max_entities + 1))
    if repeat_types:
        chosen = [str(x) for x in rng.choice(names, size=k)]
    else:
        chosen = [str(x) for x in rng.permutation(names)[:k]]
    used = set() if repeat_types else set(chosen)
    for name in chosen:
        tokens += [f"w{rng.integers(n_filler)}" for _ in range(rng.integers(0, 4))]
        inner_choices = [n for n in names if n not in used and n != name]
        toks, rel = _entity(rng, name, tags, inner_choices, nest_prob, n_filler)
        if not repeat_types:
            used.update(t for *_, t in rel)
        spans += [(s + len(tokens), e + len(tokens), t) for s, e, t in rel]
        tokens += toks
    tokens += [f"w{rng.integers(n_filler)}" for _ in range(rng.integers(1, 4))]
    return Sentence(sid, tokens, [EntitySpan(s, e, tags[t]) for s, e, t in spans])


def generate_corpus(n_sentences: int, seed: int, types: Sequence[str] = DEFAULT_TYPES,
                    tags: TagSet | None = None, prefix: str = "syn", **kwargs) -> tuple[list[Sentence], TagSet]:
    """``n_sentences`` sentences over ``types``; ``tags`` may be a superset."""
    tags = tags or TagSet.from_names(types)
    sub = TagSet.from_names(types)
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_sentences):
        s = generate_sentence(rng, sub, f"{prefix}-{k}", **kwargs)
        spans = [EntitySpan(sp.start, sp.end, tags[sp.label]) for sp in s.spans]
        out.append(Sentence(s.id, s.tokens, spans))
    return out, tags


def nested_fraction(sentences: Sequence[Sentence]) -> float:
    """Share of spans that contain, or are contained in, another span."""
    total = nested = 0
    for s in sentences:
        for a in s.spans:
            total += 1
            if any(is_nested(a, b) or is_nested(b, a) for b in s.spans if b is not a):
                nested += 1
    return nested / total if total else 0.0
