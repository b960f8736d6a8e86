from __future__ import annotations

import logging

import pytest

from ensemble_logic.model import (
    ApproxOutput,
    ErrorRate,
    Interner,
    ObservationError,
    ObservationSet,
    Ontology,
    OntologyError,
    TargetOutput,
    TruthSet,
    build_ontology,
    predicate_key,
    validate_observations,
)


def test_interner_assigns_dense_ids():
    names = Interner(["city", "animal"])
    assert names.intern("city") == 0
    assert names.intern("river") == 2
    assert names.get("lake") is None
    assert names.lookup(1) == "animal"
    assert len(names) == 3
    assert "river" in names
    assert names.names() == ["city", "animal", "river"]


def test_predicates_sort_by_kind_then_ids():
    preds = [ErrorRate(0, 0), TargetOutput(0, 1), ApproxOutput(1, 0, 0), ApproxOutput(0, 2, 5)]
    assert sorted(preds) == [ApproxOutput(0, 2, 5), ApproxOutput(1, 0, 0), TargetOutput(0, 1), ErrorRate(0, 0)]
    assert [predicate_key(p)[0] for p in sorted(preds)] == [ApproxOutput.KIND, ApproxOutput.KIND, TargetOutput.KIND, ErrorRate.KIND]
    assert ApproxOutput.KIND < TargetOutput.KIND < ErrorRate.KIND
    assert ApproxOutput(0, 0, 0) == ApproxOutput(0, 0, 0)
    assert len({ApproxOutput(0, 0, 0), ApproxOutput(0, 0, 0), TargetOutput(0, 0)}) == 2


def test_build_ontology_expands_me_sets():
    ontology = build_ontology(4, me_sets=[[0, 1, 2]], sub_pairs=[(3, 0)])
    assert ontology.me_pairs == frozenset({(0, 1), (0, 2), (1, 2)})
    assert ontology.is_exclusive(2, 0)
    assert ontology.subsumes(3, 0) and not ontology.subsumes(0, 3)
    assert ontology.exclusive_with(1) == [0, 2]
    assert ontology.children(3) == [0]
    assert ontology.parents(0) == [3]


def test_build_ontology_reports_every_problem():
    with pytest.raises(OntologyError) as excinfo:
        build_ontology(2, me_sets=[[0]], sub_pairs=[(0, 5), (1, 1)])
    message = str(excinfo.value)
    assert "ME set #0" in message
    assert "unknown domain id 5" in message
    assert "self-pair" in message


def test_sub_cycle_and_overlap_warn(caplog):
    with caplog.at_level(logging.WARNING, logger="ensemble_logic.model"):
        ontology = build_ontology(3, me_sets=[[0, 2]], sub_pairs=[(0, 1), (1, 0), (2, 0)])
    assert "Subsumption cycle" in caplog.text
    assert "both mutually exclusive and subsumed" in caplog.text
    assert ontology.subsumes(1, 0)


def test_resized_keeps_constraints():
    ontology = build_ontology(2, me_sets=[[0, 1]])
    grown = ontology.resized(5)
    assert grown.num_domains == 5
    assert grown.me_pairs == ontology.me_pairs
    with pytest.raises(OntologyError):
        grown.resized(3)


def test_violations_count_me_and_sub():
    ontology = Ontology(num_domains=3, me_pairs=frozenset({(0, 1)}), sub_pairs=frozenset({(2, 0)}))
    assert ontology.violations([1, 1, 0]) == 2
    assert ontology.violations([1, 0, 1]) == 0
    assert ontology.violations([0, 0, 0]) == 0


def _obs() -> ObservationSet:
    obs = ObservationSet()
    obs.set(ApproxOutput(0, 0, 1), 0.9)
    obs.set(ApproxOutput(1, 0, 0), 0.2)
    obs.set(ApproxOutput(0, 1, 0), 1.0)
    obs.set(TargetOutput(0, 1), 1.0)
    return obs


def test_observation_set_groups_by_instance():
    groups = [(instance, [p for p, _ in outputs]) for instance, outputs in _obs().by_instance()]
    assert groups == [
        (0, [ApproxOutput(0, 1, 0), ApproxOutput(1, 0, 0)]),
        (1, [ApproxOutput(0, 0, 1)]),
    ]


def test_observation_set_views():
    obs = _obs()
    assert [p for p, _ in obs.approx_items()] == [ApproxOutput(0, 0, 1), ApproxOutput(0, 1, 0), ApproxOutput(1, 0, 0)]
    assert obs.target_items() == [(TargetOutput(0, 1), 1.0)]
    assert obs.domains() == [0, 1]
    flipped = obs.flipped()
    assert flipped[ApproxOutput(0, 0, 1)] == pytest.approx(0.1)
    assert flipped[TargetOutput(0, 1)] == 0.0
    assert obs[ApproxOutput(0, 0, 1)] == 0.9


def test_with_targets_clamps_a_fraction():
    truth = TruthSet({(0, 0): 1, (0, 1): 1, (1, 0): 0, (1, 1): 1})
    clamped = _obs().with_targets(truth, fraction=0.5, seed=3)
    targets = clamped.target_items()
    assert len(targets) in (2, 3)
    for predicate, value in targets:
        assert value == truth[(predicate.domain, predicate.instance)]
    again = _obs().with_targets(truth, fraction=0.5, seed=3)
    assert again.values == clamped.values


def test_truth_set_is_binary():
    truth = TruthSet()
    truth[(0, 0)] = 1
    with pytest.raises(ObservationError):
        truth[(0, 1)] = 2


def test_validate_observations_collects_problems():
    obs = ObservationSet()
    obs.set(ApproxOutput(0, 0, 0), 1.5)
    obs.set(ErrorRate(0, 0), 0.1)
    with pytest.raises(ObservationError) as excinfo:
        validate_observations(obs)
    assert "outside [0, 1]" in str(excinfo.value)
    assert "cannot be observed" in str(excinfo.value)
    validate_observations(_obs())
