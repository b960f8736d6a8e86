from __future__ import annotations

import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from .model import EnsembleLogicError, ObservationSet, TruthSet


class MetricError(EnsembleLogicError, ValueError):
    """Raised when metric inputs are inconsistent."""


def _soft_mismatch(value: float, label: int) -> float:
    return value * (label != 1) + (1.0 - value) * (label != 0)


def empirical_error_rate(obs: ObservationSet, truth: TruthSet, domain: int, classifier: int) -> Optional[float]:
    """Mean soft disagreement of one classifier with the labels in one domain."""
    mismatches = [
        _soft_mismatch(value, truth[(domain, predicate.instance)])
        for predicate, value in obs.approx_items()
        if predicate.domain == domain and predicate.classifier == classifier and (domain, predicate.instance) in truth
    ]
    if not mismatches:
        return None
    return sum(mismatches) / len(mismatches)


def empirical_error_rates(obs: ObservationSet, truth: Mapping[Tuple[int, int], int]) -> Dict[Tuple[int, int], float]:
    """empirical_error_rate for every (domain, classifier) with labeled support, in one pass."""
    totals: Dict[Tuple[int, int], List[float]] = defaultdict(lambda: [0.0, 0.0])
    for predicate, value in obs.approx_items():
        label = truth.get((predicate.domain, predicate.instance))
        if label is None:
            continue
        acc = totals[(predicate.domain, predicate.classifier)]
        acc[0] += _soft_mismatch(value, label)
        acc[1] += 1.0
    return {key: mismatch / count for key, (mismatch, count) in sorted(totals.items())}


def _check_sizes(estimated: Sequence[float], sample: Sequence[float]) -> None:
    if len(estimated) != len(sample):
        raise MetricError(f"Vectors differ in size: {len(estimated)} vs {len(sample)}")
    if len(estimated) == 0:
        raise MetricError("Metrics need at least one classifier")


def mad_error_rank(estimated: Sequence[float], sample: Sequence[float]) -> float:
    """ℓ1 distance between the fractional rank vectors of the two error-rate vectors."""
    _check_sizes(estimated, sample)
    return float(np.abs(rankdata(estimated, method="average") - rankdata(sample, method="average")).sum())


def mad_error(estimated: Sequence[float], sample: Sequence[float]) -> float:
    _check_sizes(estimated, sample)
    return float(np.mean(np.abs(np.asarray(estimated, dtype=float) - np.asarray(sample, dtype=float))))


def auc_pr(scores: Sequence[float], truth: Sequence[int], ids: Optional[Sequence[int]] = None) -> Optional[float]:
    """Average precision; ties in score are broken by ascending id.

    Returns None when `truth` holds no positive.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(truth, dtype=int)
    if len(scores) != len(labels):
        raise MetricError(f"scores and truth differ in size: {len(scores)} vs {len(labels)}")
    positives = int(labels.sum())
    if positives == 0:
        return None
    ids = np.arange(len(scores)) if ids is None else np.asarray(ids)
    order = np.lexsort((ids, -scores))
    hits = labels[order]
    precision = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return float(precision[hits == 1].sum() / positives)


@dataclass
class DomainMetrics:
    classifiers: int
    instances: int
    mad_error_rank: Optional[float] = None
    mad_error: Optional[float] = None
    mad_error_sum: Optional[float] = None
    auc_target: Optional[float] = None


def _mean(values: List[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return statistics.fmean(present) if present else None


@dataclass
class MetricsReport:
    per_domain: Dict[int, DomainMetrics]
    mad_error_rank: Optional[float] = field(init=False)
    mad_error: Optional[float] = field(init=False)
    mad_error_sum: Optional[float] = field(init=False)
    auc_target: Optional[float] = field(init=False)

    def __post_init__(self) -> None:
        # Unweighted mean over the domains where each metric is defined.
        metrics = list(self.per_domain.values())
        self.mad_error_rank = _mean([m.mad_error_rank for m in metrics])
        self.mad_error = _mean([m.mad_error for m in metrics])
        self.mad_error_sum = _mean([m.mad_error_sum for m in metrics])
        self.auc_target = _mean([m.auc_target for m in metrics])

    def to_dict(self, domain_names: Optional[Sequence[str]] = None) -> Dict[str, object]:
        def name(d: int) -> str:
            return domain_names[d] if domain_names is not None else str(d)

        return {
            "average": {
                "mad_error_rank": self.mad_error_rank,
                "mad_error": self.mad_error,
                "mad_error_sum": self.mad_error_sum,
                "auc_target": self.auc_target,
            },
            "per_domain": {name(d): vars(m).copy() for d, m in sorted(self.per_domain.items())},
        }


def evaluate_estimates(
    obs: ObservationSet,
    truth: TruthSet,
    error_rates: Mapping[Tuple[int, int], float],
    target_soft: Mapping[Tuple[int, int], float],
) -> MetricsReport:
    """Score estimated error rates against sample error rates and targets against labels."""
    sample = empirical_error_rates(obs, truth)
    domains = sorted({d for d, _ in error_rates} | {d for d, _ in target_soft})
    per_domain: Dict[int, DomainMetrics] = {}
    for d in domains:
        keys = sorted(key for key in error_rates if key[0] == d and key in sample)
        cells = sorted(key for key in target_soft if key[0] == d and key in truth)
        metrics = DomainMetrics(classifiers=len(keys), instances=len(cells))
        if keys:
            est = [error_rates[key] for key in keys]
            ref = [sample[key] for key in keys]
            metrics.mad_error_rank = mad_error_rank(est, ref)
            metrics.mad_error = mad_error(est, ref)
            metrics.mad_error_sum = metrics.mad_error * len(keys)
        if cells:
            metrics.auc_target = auc_pr(
                [target_soft[key] for key in cells],
                [truth[key] for key in cells],
                ids=[key[1] for key in cells],
            )
        if keys or cells:
            per_domain[d] = metrics
    return MetricsReport(per_domain=per_domain)
