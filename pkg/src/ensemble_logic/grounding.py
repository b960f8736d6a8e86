from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Set, Tuple

from .config import RuleWeights
from .logic import ENSEMBLE_TEMPLATES, PRIOR_TEMPLATES, LinearHinge, RuleTemplate, compile_hinge
from .model import (
    ApproxOutput,
    EnsembleLogicError,
    ErrorRate,
    GroundPredicate,
    ObservationSet,
    Ontology,
    TargetOutput,
)

logger = logging.getLogger(__name__)

DEFAULT_RULE_CAP = 1_000_000


class GroundingError(EnsembleLogicError):
    """Raised when a grounding request cannot be satisfied."""


class GroundRule(NamedTuple):
    template: RuleTemplate
    binding: Tuple[GroundPredicate, ...]


@dataclass
class GroundProblem:
    """The compiled MPE problem: latent variables, observed values and hinges.

    `rules[i]` is the ground rule that `hinges[i]` was compiled from.
    """

    latent: List[GroundPredicate] = field(default_factory=list)
    index: Dict[GroundPredicate, int] = field(default_factory=dict)
    observed: Dict[GroundPredicate, float] = field(default_factory=dict)
    rules: List[GroundRule] = field(default_factory=list)
    hinges: List[LinearHinge] = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.latent)

    @property
    def n(self) -> int:
        return len(self.observed)

    @property
    def k(self) -> int:
        return len(self.hinges)

    def is_empty(self) -> bool:
        return not self.hinges

    def objective(self, y: Sequence[float]) -> float:
        return sum(h.weighted(y) for h in self.hinges)

    def rule_keys(self) -> FrozenSet[GroundRule]:
        return frozenset(self.rules)

    def template_counts(self) -> Dict[RuleTemplate, int]:
        return dict(Counter(rule.template for rule in self.rules))


class _Builder:
    """Accumulates predicates and deduplicated hinges in a deterministic order."""

    def __init__(self, obs: ObservationSet, weights: RuleWeights) -> None:
        self.obs = obs
        self.weights = weights
        self.problem = GroundProblem()
        self._seen: Set[GroundRule] = set()

    def predicate(self, predicate: GroundPredicate) -> None:
        problem = self.problem
        if predicate in problem.index or predicate in problem.observed:
            return
        value = self.obs.get(predicate)
        if value is not None and not isinstance(predicate, ErrorRate):
            problem.observed[predicate] = value
            return
        problem.index[predicate] = len(problem.latent)
        problem.latent.append(predicate)

    def rule(self, template: RuleTemplate, binding: Tuple[GroundPredicate, ...], guard: float = 1.0) -> None:
        key = GroundRule(template, binding)
        if key in self._seen:
            return
        self._seen.add(key)
        if template is RuleTemplate.ERROR_PRIOR:
            weight = self.weights.error_prior_weight
        elif template.is_prior:
            weight = self.weights.prior_weight
        else:
            weight = self.weights.rule_weight
        hinge = compile_hinge(
            template,
            binding,
            self.problem.observed,
            self.problem.index,
            weight=weight,
            exponent=self.weights.exponent,
            guard=guard,
        )
        self.problem.rules.append(key)
        self.problem.hinges.append(hinge)

    def forget_rules(self) -> None:
        # Every rule mentions a target of the current instance, so keys never repeat across instances.
        self._seen.clear()


def ground(obs: ObservationSet, ontology: Ontology, weights: Optional[RuleWeights] = None) -> GroundProblem:
    """Emit only the predicates and rules whose approximation output is observed.

    Observations are streamed instance by instance. Labeled targets present in
    `obs` are clamped (placed with the observed values) instead of becoming
    latent variables.
    """
    weights = weights or RuleWeights()
    builder = _Builder(obs, weights)
    exclusive = {d: ontology.exclusive_with(d) for d in range(ontology.num_domains)}
    children = {d: ontology.children(d) for d in range(ontology.num_domains)}

    for instance, group in obs.by_instance():
        for approx, _ in group:
            d, j = approx.domain, approx.classifier
            if d >= ontology.num_domains:
                raise GroundingError(f"Observation {approx} uses domain {d} outside the ontology ({ontology.num_domains} domains)")
            error = ErrorRate(d, j)
            target = TargetOutput(d, instance)
            builder.predicate(approx)
            builder.predicate(error)
            builder.predicate(target)
            for template in ENSEMBLE_TEMPLATES:
                builder.rule(template, (approx, error, target))
            for template in PRIOR_TEMPLATES:
                builder.rule(template, (approx, target))
            builder.rule(RuleTemplate.ERROR_PRIOR, (approx, error))
            for other in exclusive[d]:
                other_target = TargetOutput(other, instance)
                builder.predicate(other_target)
                builder.rule(RuleTemplate.MUTUAL_EXCLUSION, (approx, error, other_target))
            for child in children[d]:
                child_target = TargetOutput(child, instance)
                builder.predicate(child_target)
                builder.rule(RuleTemplate.SUBSUMPTION, (approx, error, child_target))
        builder.forget_rules()

    problem = builder.problem
    logger.debug(
        "Grounded %d latent / %d observed predicates into %d hinges (%s)",
        problem.m,
        problem.n,
        problem.k,
        {t.value: c for t, c in sorted(problem.template_counts().items(), key=lambda item: item[0].value)},
    )
    return problem


def naive_ground(
    obs: ObservationSet,
    ontology: Ontology,
    weights: Optional[RuleWeights] = None,
    max_rules: int = DEFAULT_RULE_CAP,
) -> GroundProblem:
    """Ground every template over the full domain × classifier × instance universe.

    Unobserved approximation outputs become latent variables, and the
    constraint templates are grounded over every ordered domain pair with the
    ME/SUB guard set to its truth value. Intended for small inputs only.
    """
    weights = weights or RuleWeights()
    domains = list(range(ontology.num_domains))
    classifiers = sorted({p.classifier for p, _ in obs.approx_items()})
    instances = sorted({p.instance for p in obs.values if isinstance(p, (ApproxOutput, TargetOutput))})
    per_cell = len(domains) * len(classifiers) * len(instances)
    expected = per_cell * (len(ENSEMBLE_TEMPLATES) + len(PRIOR_TEMPLATES) + 1) + 2 * per_cell * max(len(domains) - 1, 0)
    if expected > max_rules:
        raise GroundingError(f"Naive grounding would create {expected} rules (cap {max_rules})")

    builder = _Builder(obs, weights)
    for d in domains:
        for j in classifiers:
            builder.predicate(ErrorRate(d, j))
    for d in domains:
        for x in instances:
            builder.predicate(TargetOutput(d, x))
    for d in domains:
        for j in classifiers:
            for x in instances:
                builder.predicate(ApproxOutput(d, j, x))

    for d in domains:
        for j in classifiers:
            error = ErrorRate(d, j)
            for x in instances:
                approx = ApproxOutput(d, j, x)
                target = TargetOutput(d, x)
                for template in ENSEMBLE_TEMPLATES:
                    builder.rule(template, (approx, error, target))
                for template in PRIOR_TEMPLATES:
                    builder.rule(template, (approx, target))
                builder.rule(RuleTemplate.ERROR_PRIOR, (approx, error))
                for other in domains:
                    if other == d:
                        continue
                    other_target = TargetOutput(other, x)
                    builder.rule(
                        RuleTemplate.MUTUAL_EXCLUSION,
                        (approx, error, other_target),
                        guard=1.0 if ontology.is_exclusive(d, other) else 0.0,
                    )
                    builder.rule(
                        RuleTemplate.SUBSUMPTION,
                        (approx, error, other_target),
                        guard=1.0 if ontology.subsumes(d, other) else 0.0,
                    )
    return builder.problem


def prune(problem: GroundProblem) -> GroundProblem:
    """Drop constant-zero hinges and rules bound to unobserved approximation outputs, then re-index.

    The binding is checked rather than the hinge terms: the error prior names
    its output without reading it.
    """
    keep: List[int] = []
    for i, hinge in enumerate(problem.hinges):
        if hinge.is_constant_zero():
            continue
        if any(isinstance(p, ApproxOutput) and p in problem.index for p in problem.rules[i].binding):
            continue
        keep.append(i)

    used = sorted({idx for i in keep for idx, _ in problem.hinges[i].terms})
    remap = {old: new for new, old in enumerate(used)}
    pruned = GroundProblem(
        latent=[problem.latent[old] for old in used],
        observed=dict(problem.observed),
    )
    pruned.index = {p: i for i, p in enumerate(pruned.latent)}
    for i in keep:
        hinge = problem.hinges[i]
        pruned.rules.append(problem.rules[i])
        pruned.hinges.append(
            LinearHinge(
                terms=tuple((remap[idx], coeff) for idx, coeff in hinge.terms),
                constant=hinge.constant,
                weight=hinge.weight,
                exponent=hinge.exponent,
            )
        )
    return pruned
