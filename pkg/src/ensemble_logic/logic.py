"""Łukasiewicz operators, rule templates and their compilation to linear hinges."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .model import EnsembleLogicError, GroundPredicate


class RuleError(EnsembleLogicError):
    """Raised when a rule cannot be evaluated or compiled."""


def luk_and(p, q):
    return np.maximum(p + q - 1.0, 0.0)


def luk_or(p, q):
    return np.minimum(p + q, 1.0)


def luk_not(p):
    return 1.0 - p


def luk_implies(p, q):
    return np.minimum(1.0 - p + q, 1.0)


def distance_to_satisfiability(bodies: Sequence[float], heads: Sequence[float]) -> float:
    """Distance of B1 ∧ … ∧ Bs → H1 ∨ … ∨ Ht from being satisfied."""
    if len(bodies) == 0:
        raise RuleError("A rule needs at least one body literal")
    value = float(sum(bodies)) - float(sum(heads)) + 1.0 - len(bodies)
    return min(max(value, 0.0), 1.0)


class RuleTemplate(enum.Enum):
    ENSEMBLE_POS_CORRECT = "ensemble_pos_correct"
    ENSEMBLE_NEG_CORRECT = "ensemble_neg_correct"
    ENSEMBLE_POS_ERROR = "ensemble_pos_error"
    ENSEMBLE_NEG_ERROR = "ensemble_neg_error"
    PRIOR_POS = "prior_pos"
    PRIOR_NEG = "prior_neg"
    ERROR_PRIOR = "error_prior"
    MUTUAL_EXCLUSION = "mutual_exclusion"
    SUBSUMPTION = "subsumption"

    @property
    def form(self) -> "RuleForm":
        return RULE_FORMS[self]

    @property
    def arity(self) -> int:
        return RULE_FORMS[self].arity

    @property
    def is_prior(self) -> bool:
        return self in (RuleTemplate.PRIOR_POS, RuleTemplate.PRIOR_NEG)


ENSEMBLE_TEMPLATES = (
    RuleTemplate.ENSEMBLE_POS_CORRECT,
    RuleTemplate.ENSEMBLE_NEG_CORRECT,
    RuleTemplate.ENSEMBLE_POS_ERROR,
    RuleTemplate.ENSEMBLE_NEG_ERROR,
)
PRIOR_TEMPLATES = (RuleTemplate.PRIOR_POS, RuleTemplate.PRIOR_NEG)


class Literal(NamedTuple):
    role: int
    negated: bool = False


@dataclass(frozen=True)
class RuleForm:
    """Body → head structure of a template over the roles of its binding.

    Ensemble bindings are (approx, error, target); prior bindings are
    (approx, target); the error prior binds (approx, error). Constraint
    bindings are (approx, error, other target) and carry one guard (the
    ME/SUB predicate) as an extra body literal.
    """

    arity: int
    body: Tuple[Literal, ...]
    head: Tuple[Literal, ...]
    guards: int = 0


RULE_FORMS: Dict[RuleTemplate, RuleForm] = {
    # f̂ ∧ ¬e → f
    RuleTemplate.ENSEMBLE_POS_CORRECT: RuleForm(3, (Literal(0), Literal(1, True)), (Literal(2),)),
    # ¬f̂ ∧ ¬e → ¬f
    RuleTemplate.ENSEMBLE_NEG_CORRECT: RuleForm(3, (Literal(0, True), Literal(1, True)), (Literal(2, True),)),
    # f̂ ∧ e → ¬f
    RuleTemplate.ENSEMBLE_POS_ERROR: RuleForm(3, (Literal(0), Literal(1)), (Literal(2, True),)),
    # ¬f̂ ∧ e → f
    RuleTemplate.ENSEMBLE_NEG_ERROR: RuleForm(3, (Literal(0, True), Literal(1)), (Literal(2),)),
    # f̂ → f
    RuleTemplate.PRIOR_POS: RuleForm(2, (Literal(0),), (Literal(1),)),
    # ¬f̂ → ¬f
    RuleTemplate.PRIOR_NEG: RuleForm(2, (Literal(0, True),), (Literal(1, True),)),
    # e → ⊥ (the output only anchors the rule to an observation)
    RuleTemplate.ERROR_PRIOR: RuleForm(2, (Literal(1),), ()),
    # ME(d1, d2) ∧ f̂[d1] ∧ f[d2] → e[d1]
    RuleTemplate.MUTUAL_EXCLUSION: RuleForm(3, (Literal(0), Literal(2)), (Literal(1),), guards=1),
    # SUB(d1, d2) ∧ ¬f̂[d1] ∧ f[d2] → e[d1]
    RuleTemplate.SUBSUMPTION: RuleForm(3, (Literal(0, True), Literal(2)), (Literal(1),), guards=1),
}


def _literal_value(value: float, negated: bool) -> float:
    return 1.0 - value if negated else value


def rule_distance(template: RuleTemplate, values: Sequence[float], guard: float = 1.0) -> float:
    """Distance to satisfiability of a ground rule given its predicate values."""
    form = template.form
    if len(values) != form.arity:
        raise RuleError(f"{template.value} expects {form.arity} values, got {len(values)}")
    bodies = [guard] * form.guards + [_literal_value(values[lit.role], lit.negated) for lit in form.body]
    heads = [_literal_value(values[lit.role], lit.negated) for lit in form.head]
    return distance_to_satisfiability(bodies, heads)


@dataclass(frozen=True, slots=True)
class LinearHinge:
    """λ · max(Σ coeff·Y[idx] + constant, 0)^p over latent variables."""

    terms: Tuple[Tuple[int, float], ...]
    constant: float
    weight: float = 1.0
    exponent: int = 1

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise RuleError(f"Hinge weight must be non-negative, got {self.weight}")
        if self.exponent not in (1, 2):
            raise RuleError(f"Hinge exponent must be 1 or 2, got {self.exponent}")
        indices = [idx for idx, _ in self.terms]
        if len(set(indices)) != len(indices):
            raise RuleError(f"Duplicate variable index in hinge terms {self.terms}")

    def linear(self, y: Sequence[float]) -> float:
        return sum(coeff * y[idx] for idx, coeff in self.terms) + self.constant

    def potential(self, y: Sequence[float]) -> float:
        return max(self.linear(y), 0.0) ** self.exponent

    def weighted(self, y: Sequence[float]) -> float:
        return self.weight * self.potential(y)

    def is_constant_zero(self) -> bool:
        """True when the hinge is 0 for every assignment in [0,1]^m."""
        upper = self.constant + sum(coeff for _, coeff in self.terms if coeff > 0)
        return upper <= 0.0


def compile_hinge(
    template: RuleTemplate,
    binding: Sequence[GroundPredicate],
    obs: Mapping[GroundPredicate, float],
    var_index: Mapping[GroundPredicate, int],
    weight: float = 1.0,
    exponent: int = 1,
    guard: float = 1.0,
) -> LinearHinge:
    """Turn one ground rule into its linear hinge.

    Observed predicates fold into the constant, latent ones become terms;
    negated literals enter as (1 - v) and head literals with a minus sign.
    """
    form = template.form
    if len(binding) != form.arity:
        raise RuleError(f"{template.value} expects {form.arity} predicates, got {len(binding)}")
    constant = 1.0 - (len(form.body) + form.guards) + guard * form.guards
    coeffs: Dict[int, float] = {}

    def add(literal: Literal, sign: float) -> None:
        nonlocal constant
        predicate = binding[literal.role]
        value: Optional[float] = obs.get(predicate)
        if value is not None:
            constant += sign * _literal_value(value, literal.negated)
            return
        idx = var_index.get(predicate)
        if idx is None:
            raise RuleError(f"{predicate} in {template.value} is neither observed nor latent")
        if literal.negated:
            constant += sign
            coeffs[idx] = coeffs.get(idx, 0.0) - sign
        else:
            coeffs[idx] = coeffs.get(idx, 0.0) + sign

    for literal in form.body:
        add(literal, 1.0)
    for literal in form.head:
        add(literal, -1.0)
    terms = tuple(sorted((idx, coeff) for idx, coeff in coeffs.items() if coeff != 0.0))
    return LinearHinge(terms=terms, constant=constant, weight=weight, exponent=exponent)
