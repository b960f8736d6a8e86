from __future__ import annotations

from collections import defaultdict
from typing import Dict, List, Mapping, Optional, Tuple

from .model import ObservationSet, TruthSet
from .scoring import empirical_error_rates


def _outputs_by_cell(obs: ObservationSet) -> Dict[Tuple[int, int], List[Tuple[int, float]]]:
    cells: Dict[Tuple[int, int], List[Tuple[int, float]]] = defaultdict(list)
    for predicate, value in obs.approx_items():
        cells[(predicate.domain, predicate.instance)].append((predicate.classifier, value))
    return cells


def _vote(values: List[float]) -> float:
    positive = sum(1 for v in values if v >= 0.5)
    fraction = positive / len(values)
    if fraction == 0.5:
        return 0.5
    return 1.0 if fraction > 0.5 else 0.0


def majority_vote(obs: ObservationSet, domain: int, instance: int) -> Optional[float]:
    """Most common thresholded output for (domain, instance); 0.5 on an exact tie."""
    values = [
        value
        for predicate, value in obs.approx_items()
        if predicate.domain == domain and predicate.instance == instance
    ]
    if not values:
        return None
    return _vote(values)


def majority_votes(obs: ObservationSet) -> Dict[Tuple[int, int], float]:
    return {cell: _vote([v for _, v in outputs]) for cell, outputs in sorted(_outputs_by_cell(obs).items())}


def majority_vote_error_rates(obs: ObservationSet) -> Dict[Tuple[int, int], float]:
    """Error rates measured against majority-vote labels (tied cells are skipped)."""
    pseudo_truth = TruthSet(vocab=obs.vocab)
    for cell, vote in majority_votes(obs).items():
        if vote != 0.5:
            pseudo_truth[cell] = int(vote)
    return empirical_error_rates(obs, pseudo_truth)


def combine_weighted_majority(
    obs: ObservationSet,
    error_rates: Mapping[Tuple[int, int], float],
) -> Dict[Tuple[int, int], float]:
    """Average outputs per (domain, instance) weighted by max(1 - 2e, 0)."""
    combined: Dict[Tuple[int, int], float] = {}
    for (domain, instance), outputs in sorted(_outputs_by_cell(obs).items()):
        weights = [max(1.0 - 2.0 * error_rates[(domain, classifier)], 0.0) for classifier, _ in outputs]
        total = sum(weights)
        if total > 0.0:
            combined[(domain, instance)] = sum(w * v for w, (_, v) in zip(weights, outputs)) / total
        else:
            combined[(domain, instance)] = sum(v for _, v in outputs) / len(outputs)
    return combined
