from __future__ import annotations

import pytest

from ensemble_logic.baselines import (
    combine_weighted_majority,
    majority_vote,
    majority_vote_error_rates,
    majority_votes,
)
from ensemble_logic.model import ApproxOutput, ObservationSet


def _cell(values, domain=0, instance=0):
    obs = ObservationSet()
    for j, value in enumerate(values):
        obs.set(ApproxOutput(domain, j, instance), value)
    return obs


def test_majority_vote_examples():
    assert majority_vote(_cell([1.0, 1.0, 0.0]), 0, 0) == 1.0
    assert majority_vote(_cell([1.0, 0.0]), 0, 0) == 0.5
    assert majority_vote(_cell([0.6, 0.4, 0.1]), 0, 0) == 0.0
    assert majority_vote(_cell([1.0]), 1, 0) is None


def test_majority_votes_cover_every_cell():
    obs = _cell([1.0, 1.0, 0.0])
    obs.set(ApproxOutput(1, 0, 3), 0.2)
    assert majority_votes(obs) == {(0, 0): 1.0, (1, 3): 0.0}


def test_majority_vote_error_rates_skip_ties():
    obs = ObservationSet()
    for x, outputs in enumerate([(1.0, 1.0, 0.0), (0.0, 0.0, 0.0), (1.0, 0.0, 0.0)]):
        for j, value in enumerate(outputs):
            obs.set(ApproxOutput(0, j, x), value)
    obs.set(ApproxOutput(0, 0, 3), 1.0)
    obs.set(ApproxOutput(0, 1, 3), 0.0)
    rates = majority_vote_error_rates(obs)
    assert rates[(0, 0)] == pytest.approx(1 / 3)
    assert rates[(0, 1)] == 0.0
    assert rates[(0, 2)] == pytest.approx(1 / 3)


def test_weighted_majority_examples():
    obs = _cell([1.0, 0.0, 1.0])
    combined = combine_weighted_majority(obs, {(0, 0): 0.1, (0, 1): 0.1, (0, 2): 0.4})
    assert combined[(0, 0)] == pytest.approx(1.0 / 1.8)

    obs = _cell([0.9, 0.2])
    assert combine_weighted_majority(obs, {(0, 0): 0.0, (0, 1): 0.5})[(0, 0)] == pytest.approx(0.9)
    assert combine_weighted_majority(obs, {(0, 0): 0.2, (0, 1): 0.2})[(0, 0)] == pytest.approx(0.55)
    assert combine_weighted_majority(obs, {(0, 0): 0.7, (0, 1): 0.5})[(0, 0)] == pytest.approx(0.55)
