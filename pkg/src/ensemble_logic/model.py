from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)


class EnsembleLogicError(Exception):
    """Base class for every error raised by the toolkit."""


class OntologyError(EnsembleLogicError):
    """Raised when ME/SUB constraints reference invalid domains."""


class ObservationError(EnsembleLogicError):
    """Raised when an observation set breaks its invariants."""


class Interner:
    """Bijective map between user-facing names and dense integer ids."""

    def __init__(self, names: Iterable[str] = ()) -> None:
        self._ids: Dict[str, int] = {}
        self._names: List[str] = []
        for name in names:
            self.intern(name)

    def intern(self, name: str) -> int:
        idx = self._ids.get(name)
        if idx is None:
            idx = len(self._names)
            self._ids[name] = idx
            self._names.append(name)
        return idx

    def get(self, name: str) -> Optional[int]:
        return self._ids.get(name)

    def lookup(self, idx: int) -> str:
        return self._names[idx]

    def names(self) -> List[str]:
        return list(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: object) -> bool:
        return name in self._ids


@dataclass
class Vocabulary:
    domains: Interner = field(default_factory=Interner)
    classifiers: Interner = field(default_factory=Interner)
    instances: Interner = field(default_factory=Interner)


@total_ordering
class _Predicate:
    __slots__ = ()
    KIND = -1

    def key(self) -> Tuple[int, int, int, int]:
        raise NotImplementedError

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, _Predicate):
            return NotImplemented
        return self.key() < other.key()


@dataclass(frozen=True, slots=True, eq=True)
class ApproxOutput(_Predicate):
    """Output of classifier `classifier` for `instance` in `domain`."""

    domain: int
    classifier: int
    instance: int
    KIND = 0

    def key(self) -> Tuple[int, int, int, int]:
        return (self.KIND, self.domain, self.classifier, self.instance)


@dataclass(frozen=True, slots=True, eq=True)
class TargetOutput(_Predicate):
    """True (unknown) label of `instance` in `domain`."""

    domain: int
    instance: int
    KIND = 1

    def key(self) -> Tuple[int, int, int, int]:
        return (self.KIND, self.domain, -1, self.instance)


@dataclass(frozen=True, slots=True, eq=True)
class ErrorRate(_Predicate):
    """Error rate of `classifier` in `domain`, shared by all instances."""

    domain: int
    classifier: int
    KIND = 2

    def key(self) -> Tuple[int, int, int, int]:
        return (self.KIND, self.domain, self.classifier, -1)


GroundPredicate = Union[ApproxOutput, TargetOutput, ErrorRate]


def predicate_key(predicate: GroundPredicate) -> Tuple[int, int, int, int]:
    return predicate.key()


@dataclass(frozen=True)
class Ontology:
    """Mutual-exclusion and subsumption constraints over `num_domains` domains.

    `me_pairs` holds canonical (low, high) pairs. `sub_pairs` holds ordered
    (parent, child) pairs: the parent subsumes the child.
    """

    num_domains: int
    me_pairs: frozenset = frozenset()
    sub_pairs: frozenset = frozenset()

    def is_exclusive(self, d1: int, d2: int) -> bool:
        return (min(d1, d2), max(d1, d2)) in self.me_pairs

    def subsumes(self, parent: int, child: int) -> bool:
        return (parent, child) in self.sub_pairs

    def exclusive_with(self, domain: int) -> List[int]:
        others = [b if a == domain else a for a, b in self.me_pairs if domain in (a, b)]
        return sorted(others)

    def children(self, domain: int) -> List[int]:
        return sorted(child for parent, child in self.sub_pairs if parent == domain)

    def parents(self, domain: int) -> List[int]:
        return sorted(parent for parent, child in self.sub_pairs if child == domain)

    def resized(self, num_domains: int) -> "Ontology":
        if num_domains < self.num_domains:
            raise OntologyError(f"Cannot shrink ontology from {self.num_domains} to {num_domains} domains")
        return Ontology(num_domains=num_domains, me_pairs=self.me_pairs, sub_pairs=self.sub_pairs)

    def violations(self, labels: Sequence[int]) -> int:
        """Count ME and SUB constraints broken by a binary label vector."""
        broken = sum(1 for a, b in self.me_pairs if labels[a] and labels[b])
        broken += sum(1 for parent, child in self.sub_pairs if labels[child] and not labels[parent])
        return broken


def _sub_cycle(sub_pairs: Iterable[Tuple[int, int]]) -> Optional[List[int]]:
    graph: Dict[int, List[int]] = {}
    for parent, child in sorted(sub_pairs):
        graph.setdefault(parent, []).append(child)
    state: Dict[int, int] = {}
    stack: List[int] = []

    def visit(node: int) -> Optional[List[int]]:
        state[node] = 1
        stack.append(node)
        for nxt in graph.get(node, []):
            if state.get(nxt) == 1:
                return stack[stack.index(nxt):] + [nxt]
            if nxt not in state:
                found = visit(nxt)
                if found:
                    return found
        stack.pop()
        state[node] = 2
        return None

    for node in sorted(graph):
        if node not in state:
            found = visit(node)
            if found:
                return found
    return None


def build_ontology(
    num_domains: int,
    me_sets: Sequence[Iterable[int]] = (),
    sub_pairs: Sequence[Tuple[int, int]] = (),
) -> Ontology:
    """Expand ME sets pairwise and validate every referenced domain id."""
    problems: List[str] = []
    me: set = set()
    for set_idx, me_set in enumerate(me_sets):
        members = list(me_set)
        distinct = sorted(set(members))
        if len(distinct) < 2:
            problems.append(f"ME set #{set_idx} needs at least 2 distinct domains, got {members}")
            continue
        for d in distinct:
            if not 0 <= d < num_domains:
                problems.append(f"ME set #{set_idx} references unknown domain id {d}")
        if len(distinct) != len(members):
            logger.debug("ME set #%d lists a domain more than once: %s", set_idx, members)
        for a, b in itertools.combinations(distinct, 2):
            me.add((a, b))
    sub: set = set()
    for parent, child in sub_pairs:
        if parent == child:
            problems.append(f"SUB pair ({parent}, {child}) is a self-pair")
            continue
        for d in (parent, child):
            if not 0 <= d < num_domains:
                problems.append(f"SUB pair ({parent}, {child}) references unknown domain id {d}")
        sub.add((parent, child))
    if problems:
        raise OntologyError("; ".join(problems))

    cycle = _sub_cycle(sub)
    if cycle:
        logger.warning("Subsumption cycle between domains %s", " -> ".join(map(str, cycle)))
    overlap = sorted(pair for pair in sub if (min(pair), max(pair)) in me)
    if overlap:
        logger.warning("Domain pairs are both mutually exclusive and subsumed: %s", overlap)
    return Ontology(num_domains=num_domains, me_pairs=frozenset(me), sub_pairs=frozenset(sub))


class ObservationSet:
    """Observed soft truth values: approximation outputs and optional labels."""

    def __init__(
        self,
        values: Optional[Dict[GroundPredicate, float]] = None,
        vocab: Optional[Vocabulary] = None,
    ) -> None:
        self.values: Dict[GroundPredicate, float] = dict(values or {})
        self.vocab = vocab or Vocabulary()

    def __len__(self) -> int:
        return len(self.values)

    def __contains__(self, predicate: object) -> bool:
        return predicate in self.values

    def __getitem__(self, predicate: GroundPredicate) -> float:
        return self.values[predicate]

    def __iter__(self) -> Iterator[GroundPredicate]:
        return iter(self.values)

    def get(self, predicate: GroundPredicate, default: Optional[float] = None) -> Optional[float]:
        return self.values.get(predicate, default)

    def set(self, predicate: GroundPredicate, value: float) -> None:
        self.values[predicate] = value

    def approx_items(self) -> List[Tuple[ApproxOutput, float]]:
        items = [(p, v) for p, v in self.values.items() if isinstance(p, ApproxOutput)]
        items.sort(key=lambda item: item[0].key())
        return items

    def target_items(self) -> List[Tuple[TargetOutput, float]]:
        items = [(p, v) for p, v in self.values.items() if isinstance(p, TargetOutput)]
        items.sort(key=lambda item: item[0].key())
        return items

    def domains(self) -> List[int]:
        return sorted({p.domain for p in self.values})

    def by_instance(self) -> Iterator[Tuple[int, List[Tuple[ApproxOutput, float]]]]:
        """Yield approximation outputs grouped by instance, in instance order."""
        approx = [(p, v) for p, v in self.values.items() if isinstance(p, ApproxOutput)]
        approx.sort(key=lambda item: (item[0].instance, item[0].domain, item[0].classifier))
        for instance, group in itertools.groupby(approx, key=lambda item: item[0].instance):
            yield instance, list(group)

    def flipped(self) -> "ObservationSet":
        """Every value replaced by its complement (labels included)."""
        return ObservationSet({p: 1.0 - v for p, v in self.values.items()}, vocab=self.vocab)

    def with_targets(self, truth: Dict[Tuple[int, int], int], fraction: float, seed: int = 0) -> "ObservationSet":
        """Copy with a random `fraction` of the known labels clamped as observed targets."""
        keys = sorted(truth)
        rng = np.random.default_rng(seed)
        count = int(round(fraction * len(keys)))
        chosen = rng.choice(len(keys), size=count, replace=False) if count else []
        values = dict(self.values)
        for idx in sorted(int(i) for i in chosen):
            domain, instance = keys[idx]
            values[TargetOutput(domain, instance)] = float(truth[keys[idx]])
        return ObservationSet(values, vocab=self.vocab)


class TruthSet(dict):
    """Binary ground-truth labels keyed by (domain, instance)."""

    def __init__(self, labels: Optional[Dict[Tuple[int, int], int]] = None, vocab: Optional[Vocabulary] = None) -> None:
        super().__init__()
        self.vocab = vocab or Vocabulary()
        for key, value in (labels or {}).items():
            self[key] = value

    def __setitem__(self, key: Tuple[int, int], value: int) -> None:
        if value not in (0, 1):
            raise ObservationError(f"Label for {key} must be 0 or 1, got {value}")
        super().__setitem__(key, int(value))


def validate_observations(obs: ObservationSet) -> None:
    """Raise ObservationError listing every out-of-range value or forbidden key."""
    problems: List[str] = []
    for predicate in sorted(obs.values, key=predicate_key):
        value = obs.values[predicate]
        if isinstance(predicate, ErrorRate):
            problems.append(f"{predicate} is an error rate and cannot be observed")
            continue
        if not isinstance(predicate, (ApproxOutput, TargetOutput)):
            problems.append(f"{predicate!r} is not a ground predicate")
            continue
        if not 0.0 <= value <= 1.0:
            problems.append(f"{predicate} has value {value} outside [0, 1]")
    if problems:
        raise ObservationError("; ".join(problems))
