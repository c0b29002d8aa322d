import numpy as np
import pytest

from mrcner.decode import (DecodeConfig, brute_force_decode, decode_sentence, extract_boundary_indexes,
                           match_and_emit)
from mrcner.errors import ContractError, ValidationError
from mrcner.model import ProbOutputs
from mrcner.spans import EntitySpan, EntityType

from oracles import brute_force_sentence, random_decode_instance

PER = EntityType(0, "PER")
ORG = EntityType(1, "ORG")


def rows(p1):
    p1 = np.asarray(p1, dtype=float)
    return np.stack([1 - p1, p1], axis=1)


def test_extract_boundary_indexes_excludes_ties():
    starts, ends = extract_boundary_indexes(rows([0.9, 0.5, 0.1, 0.51]), rows([0.5, 0.2, 0.7, 0.6]))
    assert starts == {0, 3} and ends == {2, 3}


def test_match_and_emit_example():
    p = {(1, 2): 0.8, (1, 4): 0.3, (4, 4): 0.9}
    out = match_and_emit({1, 4}, {2, 4}, p, DecodeConfig(0.5), PER)
    assert [s.key for s in out] == [(1, 2, "PER"), (4, 4, "PER")]
    assert [s.score for s in out] == [0.8, 0.9]


def test_match_threshold_is_strict():
    assert match_and_emit({0}, {0}, {(0, 0): 0.5}, DecodeConfig(0.5), PER) == []


def test_missing_pair_probability_is_contract_error():
    with pytest.raises(ContractError):
        match_and_emit({0}, {1}, {}, DecodeConfig(), PER)


def test_single_token_entity():
    probs = ProbOutputs(rows([0.9]), rows([0.8]), {(0, 0): 0.9})
    assert [s.key for s in decode_sentence({PER: probs}, DecodeConfig())] == [(0, 0, "PER")]


def test_nested_spans_of_one_type_survive():
    probs = ProbOutputs(rows([0.9, 0.9, 0.1]), rows([0.1, 0.9, 0.9]),
                        {(0, 1): 0.9, (0, 2): 0.9, (1, 1): 0.1, (1, 2): 0.9})
    keys = [s.key for s in decode_sentence({PER: probs}, DecodeConfig())]
    assert keys == [(0, 1, "PER"), (0, 2, "PER"), (1, 2, "PER")]


def test_flat_mode_drops_lower_scored_overlaps():
    per = ProbOutputs(rows([0.9, 0.1, 0.1]), rows([0.1, 0.9, 0.1]), {(0, 1): 0.7})
    org = ProbOutputs(rows([0.1, 0.9, 0.1]), rows([0.1, 0.1, 0.9]), {(1, 2): 0.8})
    both = {PER: per, ORG: org}
    assert len(decode_sentence(both, DecodeConfig())) == 2
    assert [s.key for s in decode_sentence(both, DecodeConfig(flat_mode=True))] == [(1, 2, "ORG")]


def test_threshold_range_validated():
    with pytest.raises(ValidationError):
        DecodeConfig(1.5)


def test_threshold_one_emits_nothing(rng):
    for _ in range(100):
        per_type, _ = random_decode_instance(rng)
        per_type = {t: ProbOutputs(p.p_start, p.p_end, {k: min(v, 1 - 1e-12) for k, v in p.p_match.items()})
                    for t, p in per_type.items()}
        assert decode_sentence(per_type, DecodeConfig(1.0)) == []


def test_matches_brute_force(rng):
    for _ in range(300):
        per_type, config = random_decode_instance(rng)
        assert decode_sentence(per_type, config) == brute_force_sentence(per_type, config)


def test_output_independent_of_type_order(rng):
    for _ in range(50):
        per_type, config = random_decode_instance(rng)
        reversed_types = dict(reversed(list(per_type.items())))
        assert decode_sentence(per_type, config) == decode_sentence(reversed_types, config)


def test_threshold_monotonicity(rng):
    for _ in range(300):
        per_type, _ = random_decode_instance(rng)
        t1, t2 = sorted(rng.uniform(0, 1, 2))
        low = {s.key for s in decode_sentence(per_type, DecodeConfig(t1))}
        high = {s.key for s in decode_sentence(per_type, DecodeConfig(t2))}
        assert high <= low


def test_brute_force_single_type_example():
    out = brute_force_decode(rows([0.9]), rows([0.9]), {(0, 0): 0.9}, DecodeConfig(), PER)
    assert out == [EntitySpan(0, 0, PER)]
