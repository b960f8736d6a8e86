from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .admm import SolverDiagnostics, solve
from .config import RunConfig
from .grounding import ground
from .model import ErrorRate, ObservationError, ObservationSet, Ontology, TargetOutput, validate_observations

logger = logging.getLogger(__name__)


@dataclass
class Estimates:
    """Inferred error rates per (domain, classifier) and targets per (domain, instance)."""

    error_rates: Dict[Tuple[int, int], float]
    target_soft: Dict[Tuple[int, int], float]
    target_hard: Dict[Tuple[int, int], int]
    diagnostics: SolverDiagnostics
    threshold: float = 0.5
    objective: float = 0.0
    problem_size: Dict[str, int] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.diagnostics.converged


def estimate(obs: ObservationSet, ontology: Ontology, config: Optional[RunConfig] = None) -> Estimates:
    """Ground the ensemble and constraint rules over `obs` and read off the MPE state."""
    config = config or RunConfig()
    if not any(True for _ in obs.approx_items()):
        raise ObservationError("No approximation outputs were observed")
    validate_observations(obs)
    needed = max(obs.domains()) + 1
    if needed > ontology.num_domains:
        ontology = ontology.resized(needed)

    problem = ground(obs, ontology, config.rules)
    logger.info("Grounded problem: %d latent, %d observed, %d hinges", problem.m, problem.n, problem.k)
    result = solve(problem, config.solver)
    diagnostics = result.diagnostics
    logger.info(
        "ADMM %s after %d iterations, objective %.6g",
        "converged" if diagnostics.converged else "stopped",
        diagnostics.iterations,
        result.objective,
    )

    error_rates: Dict[Tuple[int, int], float] = {}
    target_soft: Dict[Tuple[int, int], float] = {}
    for predicate, idx in problem.index.items():
        value = float(result.y[idx])
        if isinstance(predicate, ErrorRate):
            error_rates[(predicate.domain, predicate.classifier)] = value
        elif isinstance(predicate, TargetOutput):
            target_soft[(predicate.domain, predicate.instance)] = value
    for predicate, value in obs.target_items():
        target_soft[(predicate.domain, predicate.instance)] = value

    target_hard = {key: int(value >= config.threshold) for key, value in target_soft.items()}
    return Estimates(
        error_rates=dict(sorted(error_rates.items())),
        target_soft=dict(sorted(target_soft.items())),
        target_hard=dict(sorted(target_hard.items())),
        diagnostics=diagnostics,
        threshold=config.threshold,
        objective=result.objective,
        problem_size={"latent": problem.m, "observed": problem.n, "hinges": problem.k},
    )
