"""Evaluation protocols: zero-shot transfer, training-size curves, query ablations."""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .data import Sentence
from .decode import DecodeConfig
from .errors import CatalogError, ConfigError, ValidationError
from .inference import evaluate_model
from .metrics import EvalResult
from .model import MrcModel
from .queries import QueryCatalog, QueryStrategy, validate_catalog
from .spans import TagSet
from .training import TrainConfig, fit


class LabelMapping(dict):
    """Source tag name -> target tag name; partial, but injective."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        targets = list(self.values())
        if len(set(targets)) != len(targets):
            raise ValidationError("label mapping must be injective")


@dataclass
class ZeroShotReport:
    overall: EvalResult
    seen: EvalResult
    unseen: EvalResult
    seen_types: list[str]
    unseen_types: list[str]

    def to_dict(self) -> dict:
        return {"overall": self.overall.to_dict(), "seen": self.seen.to_dict(), "unseen": self.unseen.to_dict(),
                "seen_types": self.seen_types, "unseen_types": self.unseen_types}


def zero_shot_eval(model: MrcModel, target_corpus: Sequence[Sentence], target_tags: TagSet,
                   target_catalog: QueryCatalog, mapping: Mapping[str, str] | None = None,
                   decode: DecodeConfig = DecodeConfig()) -> ZeroShotReport:
    """Score a trained model on another tag set by asking the target queries.

    No retraining happens and scoring is done in the target label space.
    ``mapping`` only decides which target types count as seen.
    """
    mapping = LabelMapping(mapping or {})
    problems = validate_catalog(target_catalog, target_tags)
    if problems:
        raise CatalogError("target catalog incomplete: " + "; ".join(problems))
    cfg = TrainConfig(match_threshold=decode.match_threshold, flat_mode=decode.flat_mode)
    overall = evaluate_model(model, target_corpus, target_tags, target_catalog, cfg)
    seen = [n for n in target_tags.names if n in set(mapping.values())]
    unseen = [n for n in target_tags.names if n not in seen]
    return ZeroShotReport(overall, overall.restrict(seen), overall.restrict(unseen), seen, unseen)


def subsample_training(sentences: Sequence[Sentence], fraction: float, seed: int) -> list[Sentence]:
    """First ceil(fraction * N) sentences of one seeded permutation, in corpus order.

    Smaller fractions therefore give subsets of larger ones.
    """
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"subsample fraction must lie in (0, 1], got {fraction}")
    n = len(sentences)
    k = math.ceil(fraction * n)
    keep = np.sort(np.random.default_rng(seed).permutation(n)[:k])
    return [sentences[i] for i in keep]


def query_ablation_run(train: Sequence[Sentence], test: Sequence[Sentence], tags: TagSet,
                       strategies: Sequence[QueryStrategy | str], config: TrainConfig,
                       catalogs: Mapping[QueryStrategy, QueryCatalog] | Callable[[QueryStrategy], QueryCatalog],
                       seeds: Sequence[int] | None = None) -> list[dict]:
    """Train and evaluate one model per (strategy, seed) under one config.

    Returns one row per run: ``{"strategy", "seed", <EvalResult fields>}``.
    """
    strategies = [QueryStrategy(s) for s in strategies]
    resolved = {}
    for s in strategies:
        if callable(catalogs):
            resolved[s] = catalogs(s)
        elif s in catalogs:
            resolved[s] = catalogs[s]
        elif s is QueryStrategy.PositionIndex:
            resolved[s] = QueryCatalog.position_index()
        else:
            raise CatalogError(f"no catalog for query strategy {s.value}")
    rows = []
    for s in strategies:
        for seed in (seeds if seeds is not None else [config.seed]):
            cfg = config.replace(seed=seed, query_strategy=s.value)
            model, _ = fit(train, tags, resolved[s], cfg)
            result = evaluate_model(model, test, tags, resolved[s], cfg)
            rows.append({"strategy": s.value, "seed": seed, **result.to_dict()})
    return rows


def mean_f1_by_strategy(rows: Sequence[dict]) -> dict[str, float]:
    out: dict[str, list[float]] = {}
    for r in rows:
        out.setdefault(r["strategy"], []).append(r["f1"])
    return {k: float(np.mean(v)) for k, v in out.items()}
