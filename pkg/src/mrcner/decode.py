"""Turn boundary and matching probabilities into typed entity spans."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ValidationError
from .model import ProbOutputs
from .spans import EntitySpan, EntityType, resolve_flat_conflicts, sort_spans


@dataclass(frozen=True)
class DecodeConfig:
    match_threshold: float = 0.5
    flat_mode: bool = False

    def __post_init__(self):
        if not 0.0 <= self.match_threshold <= 1.0:
            raise ValidationError(f"match_threshold must lie in [0, 1], got {self.match_threshold}")


def extract_boundary_indexes(p_start: np.ndarray, p_end: np.ndarray) -> tuple[set[int], set[int]]:
    """Rows whose argmax is class 1. An exact 0.5/0.5 tie is not a boundary."""
    return (set(np.flatnonzero(p_start[:, 1] > p_start[:, 0]).tolist()),
            set(np.flatnonzero(p_end[:, 1] > p_end[:, 0]).tolist()))


def match_and_emit(starts: Iterable[int], ends: Iterable[int], p_match: Mapping[tuple[int, int], float],
                   config: DecodeConfig, entity_type: EntityType) -> list[EntitySpan]:
    """Every candidate (i, j), i <= j, whose match probability beats the threshold.

    A start may pair with several ends and vice versa, so nested spans of one
    type survive.
    """
    out = []
    ends = sorted(set(ends))
    for i in sorted(set(starts)):
        for j in ends:
            if j < i:
                continue
            try:
                p = p_match[(i, j)]
            except KeyError:
                raise ContractError(f"no match probability for candidate pair ({i}, {j})") from None
            if p > config.match_threshold:
                out.append(EntitySpan(i, j, entity_type, float(p)))
    return out


def decode_type(probs: ProbOutputs, config: DecodeConfig, entity_type: EntityType) -> list[EntitySpan]:
    starts, ends = extract_boundary_indexes(probs.p_start, probs.p_end)
    return match_and_emit(starts, ends, probs.p_match, config, entity_type)


def decode_sentence(per_type: Mapping[EntityType, ProbOutputs], config: DecodeConfig) -> list[EntitySpan]:
    """Union of per-type decodes, canonically sorted; flat filtering last, if enabled."""
    spans = []
    for t, probs in per_type.items():
        spans.extend(decode_type(probs, config, t))
    if config.flat_mode:
        return resolve_flat_conflicts(spans)
    return sort_spans(spans)


def brute_force_decode(p_start: np.ndarray, p_end: np.ndarray, p_match: Mapping[tuple[int, int], float],
                       config: DecodeConfig, entity_type: EntityType) -> list[EntitySpan]:
    """Reference decoder: test every (i, j) with i <= j independently.

    ``p_match`` must be defined for all i <= j.
    """
    n = p_start.shape[0]
    out = []
    for i in range(n):
        for j in range(i, n):
            # np.argmax returns the first maximum, so a 0.5/0.5 row is class 0
            is_start = np.argmax(p_start[i]) == 1
            is_end = np.argmax(p_end[j]) == 1
            if is_start and is_end and p_match[(i, j)] > config.match_threshold:
                out.append(EntitySpan(i, j, entity_type, float(p_match[(i, j)])))
    return sort_spans(out)
