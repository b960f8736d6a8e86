"""Synthetic benchmarks: ontology-consistent labels read by noisy classifiers."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Set

import numpy as np

from .config import SynthSpec
from .model import ApproxOutput, EnsembleLogicError, ObservationSet, Ontology, TruthSet, Vocabulary

logger = logging.getLogger(__name__)

MAX_EMPTY_BATCHES = 200


class SynthError(EnsembleLogicError):
    """Raised when a generator spec cannot be realised."""


@dataclass
class SynthResult:
    observations: ObservationSet
    truth: TruthSet
    error_rates: np.ndarray


def _upward_closure(ontology: Ontology, domains: List[int]) -> Set[int]:
    closure: Set[int] = set()
    frontier = list(domains)
    while frontier:
        d = frontier.pop()
        if d in closure:
            continue
        closure.add(d)
        frontier.extend(ontology.parents(d))
    return closure


def sample_labels(ontology: Ontology, spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample `num_instances` label vectors that break no ME/SUB constraint."""
    D = ontology.num_domains
    forced = sorted(_upward_closure(ontology, spec.forced_positive))
    if any(not 0 <= d < D for d in forced):
        raise SynthError(f"Forced domains {spec.forced_positive} fall outside the {D} domains")
    clash = sorted(pair for pair in ontology.me_pairs if pair[0] in forced and pair[1] in forced)
    if clash:
        raise SynthError(f"Forced domains {spec.forced_positive} imply mutually exclusive pairs {clash}")

    me = np.array(sorted(ontology.me_pairs), dtype=np.int64).reshape(-1, 2)
    sub = np.array(sorted(ontology.sub_pairs), dtype=np.int64).reshape(-1, 2)
    accepted: List[np.ndarray] = []
    remaining = spec.num_instances
    empty_batches = 0
    while remaining > 0:
        batch = rng.random((max(256, 2 * remaining), D)) < spec.positive_rate
        batch[:, forced] = True
        bad = np.zeros(len(batch), dtype=bool)
        if len(me):
            bad |= (batch[:, me[:, 0]] & batch[:, me[:, 1]]).any(axis=1)
        if len(sub):
            bad |= (batch[:, sub[:, 1]] & ~batch[:, sub[:, 0]]).any(axis=1)
        good = batch[~bad][:remaining]
        if len(good) == 0:
            empty_batches += 1
            if empty_batches >= MAX_EMPTY_BATCHES:
                raise SynthError("Could not sample any constraint-consistent label vector; lower positive_rate")
            continue
        accepted.append(good)
        remaining -= len(good)
    if not accepted:
        return np.zeros((0, D), dtype=np.int64)
    return np.concatenate(accepted).astype(np.int64)


def generate(spec: SynthSpec, ontology: Optional[Ontology] = None, vocab: Optional[Vocabulary] = None) -> SynthResult:
    """Sample labels, then classifier outputs flipped with the per-(domain, classifier) error rates."""
    vocab = vocab or Vocabulary()
    ontology = ontology or Ontology(num_domains=spec.num_domains)
    if ontology.num_domains > spec.num_domains:
        raise SynthError(f"Ontology names {ontology.num_domains} domains but the spec asks for {spec.num_domains}")
    ontology = ontology.resized(spec.num_domains)
    D, J, N = spec.num_domains, spec.num_classifiers, spec.num_instances
    for d in range(len(vocab.domains), D):
        vocab.domains.intern(f"domain{d}")
    for j in range(J):
        vocab.classifiers.intern(f"clf{j}")
    width = max(6, len(str(max(N - 1, 0))))
    for i in range(N):
        vocab.instances.intern(f"x{i:0{width}d}")

    rng = np.random.default_rng(spec.seed)
    if spec.error_rates is not None:
        rates = np.asarray(spec.error_rates, dtype=float)
    else:
        low, high = spec.error_range
        rates = rng.uniform(low, high, size=(D, J))

    labels = sample_labels(ontology, spec, rng)
    broken = [i for i, row in enumerate(labels) if ontology.violations(row)]
    if broken:
        raise SynthError(f"{len(broken)} sampled label vectors break the ontology (first: instance {broken[0]})")
    flips = rng.random((N, D, J)) < rates[None, :, :]
    outputs = (labels[:, :, None].astype(bool) ^ flips).astype(float)
    if spec.soft:
        noise = rng.random((N, D, J))
        outputs = np.round(outputs - (2.0 * outputs - 1.0) * 0.5 * noise, 6)
    keep = rng.random((N, D, J)) < spec.density
    if spec.density == 0.0 or not keep.any():
        logger.warning("Observation density %.3g retained no classifier outputs", spec.density)

    observations = ObservationSet(vocab=vocab)
    for i, d, j in zip(*np.nonzero(keep)):
        observations.set(ApproxOutput(int(d), int(j), int(i)), float(outputs[i, d, j]))
    truth = TruthSet(vocab=vocab)
    for i in range(N):
        for d in range(D):
            truth[(d, i)] = int(labels[i, d])
    return SynthResult(observations=observations, truth=truth, error_rates=rates)
