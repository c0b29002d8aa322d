"""Natural-language queries for entity types.

Every strategy except ``PositionIndex`` is stored as data in a JSON catalog
file::

    {"dataset_id": "...", "strategy": "Keyword", "entries": {"ORG": "organization"}}

``PositionIndex`` queries are generated from the type's index.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .errors import CatalogError
from .spans import EntityType, TagSet


class QueryStrategy(str, enum.Enum):
    PositionIndex = "PositionIndex"
    Keyword = "Keyword"
    RuleTemplate = "RuleTemplate"
    Wikipedia = "Wikipedia"
    Synonyms = "Synonyms"
    KeywordSynonyms = "KeywordSynonyms"
    AnnotationGuideline = "AnnotationGuideline"

    @classmethod
    def parse(cls, name: str) -> QueryStrategy:
        try:
            return cls(name)
        except ValueError:
            raise CatalogError(
                f"unknown query strategy {name!r}; expected one of {[s.value for s in cls]}"
            ) from None


_CARDINALS = (
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen",
    "eighteen", "nineteen", "twenty",
)


@dataclass(frozen=True)
class Query:
    entity_type: EntityType
    text: str
    strategy: QueryStrategy

    def __post_init__(self):
        if not self.text.strip():
            raise CatalogError(f"empty query text for type {self.entity_type.name}")


@dataclass(frozen=True)
class QueryCatalog:
    dataset_id: str
    strategy: QueryStrategy
    entries: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    @classmethod
    def from_dict(cls, data: dict) -> QueryCatalog:
        if not isinstance(data, dict):
            raise CatalogError("catalog must be a JSON object")
        expected = {"dataset_id", "strategy", "entries"}
        unknown = set(data) - expected
        if unknown:
            raise CatalogError(f"unknown catalog keys: {sorted(unknown)}")
        missing = expected - set(data)
        if missing:
            raise CatalogError(f"catalog missing keys: {sorted(missing)}")
        entries = data["entries"]
        if not isinstance(entries, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in entries.items()
        ):
            raise CatalogError("catalog 'entries' must map type names to query strings")
        if not isinstance(data["dataset_id"], str):
            raise CatalogError("catalog 'dataset_id' must be a string")
        if not isinstance(data["strategy"], str):
            raise CatalogError("catalog 'strategy' must be a string")
        return cls(data["dataset_id"], QueryStrategy.parse(data["strategy"]), entries)

    def to_dict(self) -> dict:
        return {"dataset_id": self.dataset_id, "strategy": self.strategy.value,
                "entries": dict(self.entries)}

    @classmethod
    def position_index(cls, dataset_id: str = "generated") -> QueryCatalog:
        return cls(dataset_id, QueryStrategy.PositionIndex, {})


def load_catalog(path: str | Path) -> QueryCatalog:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise CatalogError(f"cannot read catalog {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CatalogError(f"catalog {path} is not valid JSON: {exc}") from exc
    return QueryCatalog.from_dict(data)


def save_catalog(catalog: QueryCatalog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(catalog.to_dict(), f, ensure_ascii=False, indent=2)
        f.write("\n")


def builtin_catalog(dataset_id: str, strategy: QueryStrategy | str) -> QueryCatalog:
    """Load a catalog shipped with the package (``default`` or ``synthetic``)."""
    strategy = QueryStrategy(strategy)
    if strategy is QueryStrategy.PositionIndex:
        return QueryCatalog.position_index(dataset_id)
    ref = resources.files("mrcner") / "catalogs" / dataset_id / f"{strategy.value}.json"
    if not ref.is_file():
        raise CatalogError(f"no built-in catalog for dataset {dataset_id!r}, strategy {strategy.value}")
    return QueryCatalog.from_dict(json.loads(ref.read_text(encoding="utf-8")))


def build_position_index_query(t: EntityType) -> Query:
    """Cardinal word for ``index + 1`` ("one" for index 0); numerals past twenty."""
    n = t.index + 1
    text = _CARDINALS[n - 1] if n <= len(_CARDINALS) else str(n)
    return Query(t, text, QueryStrategy.PositionIndex)


def lookup_query(catalog: QueryCatalog, t: EntityType) -> Query:
    text = catalog.entries.get(t.name)
    if text is None and catalog.strategy is QueryStrategy.PositionIndex:
        return build_position_index_query(t)
    if text is None:
        raise CatalogError(
            f"catalog incomplete: no {catalog.strategy.value} query for type {t.name!r} "
            f"in dataset {catalog.dataset_id!r}"
        )
    return Query(t, text, catalog.strategy)


def validate_catalog(catalog: QueryCatalog, tags: TagSet) -> list[str]:
    """Diagnostics for every tag lacking a usable query; empty when valid."""
    problems = []
    for t in tags:
        text = catalog.entries.get(t.name)
        if text is None:
            if catalog.strategy is not QueryStrategy.PositionIndex:
                problems.append(f"missing query: {t.name}")
        elif not text.strip():
            problems.append(f"empty query: {t.name}")
    return problems


def require_valid(catalog: QueryCatalog, tags: TagSet) -> None:
    problems = validate_catalog(catalog, tags)
    if problems:
        raise CatalogError("invalid catalog: " + "; ".join(problems))
