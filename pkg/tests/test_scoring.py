from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ensemble_logic.model import ApproxOutput, ObservationSet, TruthSet
from ensemble_logic.scoring import (
    MetricError,
    auc_pr,
    empirical_error_rate,
    empirical_error_rates,
    evaluate_estimates,
    mad_error,
    mad_error_rank,
)


def _binary_case():
    obs, truth = ObservationSet(), TruthSet()
    for x in range(10):
        truth[(0, x)] = 1
        obs.set(ApproxOutput(0, 0, x), 0.0 if x < 3 else 1.0)
        obs.set(ApproxOutput(0, 1, x), 1.0)
    return obs, truth


def test_empirical_error_rate_examples():
    obs, truth = _binary_case()
    assert empirical_error_rate(obs, truth, 0, 0) == pytest.approx(0.3)
    assert empirical_error_rate(obs, truth, 0, 1) == 0.0
    assert empirical_error_rate(obs, truth, 1, 0) is None

    soft, labels = ObservationSet(), TruthSet({(0, 0): 1})
    soft.set(ApproxOutput(0, 0, 0), 0.7)
    assert empirical_error_rate(soft, labels, 0, 0) == pytest.approx(0.3)


def test_empirical_error_rates_in_one_pass():
    obs, truth = _binary_case()
    rates = empirical_error_rates(obs, truth)
    assert rates == {(0, 0): pytest.approx(0.3), (0, 1): 0.0}


def test_mad_error_rank_examples():
    assert mad_error_rank([0.1, 0.2, 0.3], [0.15, 0.25, 0.35]) == 0.0
    assert mad_error_rank([0.1, 0.2], [0.2, 0.1]) == 2.0
    assert mad_error_rank([0.1, 0.1, 0.3], [0.2, 0.1, 0.3]) == pytest.approx(1.0)


def test_mad_error_examples():
    assert mad_error([0.1, 0.2], [0.1, 0.2]) == 0.0
    assert mad_error([0.2], [0.5]) == pytest.approx(0.3)
    assert mad_error([0.1, 0.4], [0.2, 0.2]) == pytest.approx(0.15)


def test_metric_inputs_must_match():
    with pytest.raises(MetricError):
        mad_error([0.1], [0.1, 0.2])
    with pytest.raises(MetricError):
        mad_error_rank([], [])
    with pytest.raises(MetricError):
        auc_pr([0.1, 0.2], [1])


def test_auc_pr_examples():
    assert auc_pr([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auc_pr([0.5, 0.5], [0, 1], ids=[0, 1]) == pytest.approx(0.5)
    assert auc_pr([0.5, 0.5], [1, 0], ids=[0, 1]) == pytest.approx(1.0)
    assert auc_pr([0.9, 0.8, 0.7, 0.1], [0, 0, 0, 1]) == pytest.approx(0.25)
    assert auc_pr([0.3, 0.4], [0, 0]) is None


hundredths = st.integers(min_value=0, max_value=100).map(lambda k: k / 100)


@given(st.lists(st.tuples(hundredths, st.integers(0, 1)), min_size=1, max_size=30))
def test_auc_pr_is_invariant_under_monotone_maps(pairs):
    scores = [s for s, _ in pairs]
    labels = [y for _, y in pairs]
    base = auc_pr(scores, labels)
    mapped = auc_pr([s * s + s for s in scores], labels)
    if base is None:
        assert mapped is None
    else:
        assert mapped == pytest.approx(base)
        assert 0.0 <= base <= 1.0


@given(st.lists(st.tuples(hundredths, hundredths), min_size=1, max_size=20), st.integers(-50, 50).map(lambda k: k / 100))
def test_mad_error_rank_ignores_shifts(pairs, shift):
    est = [a for a, _ in pairs]
    ref = [b for _, b in pairs]
    assert mad_error_rank([a + shift for a in est], [b + shift for b in ref]) == pytest.approx(mad_error_rank(est, ref))
    assert mad_error_rank(est, ref) >= 0.0


def test_evaluate_estimates_reports_per_domain_and_average():
    obs, truth = _binary_case()
    for x in range(4):
        truth[(1, x)] = x % 2
        obs.set(ApproxOutput(1, 0, x), float(x % 2))
    sample = empirical_error_rates(obs, truth)
    soft = {(0, x): 1.0 for x in range(10)}
    soft.update({(1, x): float(x % 2) for x in range(4)})
    report = evaluate_estimates(obs, truth, sample, soft)
    assert report.mad_error == 0.0
    assert report.mad_error_rank == 0.0
    assert report.per_domain[0].classifiers == 2
    assert report.per_domain[1].auc_target == 1.0
    exported = report.to_dict(["city", "animal"])
    assert set(exported["per_domain"]) == {"city", "animal"}
    assert exported["average"]["mad_error_sum"] == 0.0


def test_evaluate_estimates_averages_defined_domains_only():
    obs, truth = ObservationSet(), TruthSet({(0, 0): 1, (1, 0): 0})
    obs.set(ApproxOutput(0, 0, 0), 1.0)
    obs.set(ApproxOutput(1, 0, 0), 0.0)
    report = evaluate_estimates(obs, truth, {(0, 0): 0.2, (1, 0): 0.0}, {(0, 0): 0.9, (1, 0): 0.1})
    assert report.per_domain[1].auc_target is None
    assert report.auc_target == 1.0
    assert report.mad_error == pytest.approx(0.1)
