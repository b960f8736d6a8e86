"""Consensus ADMM for hinge-loss MPE problems, full and stochastic.

Every hinge is a subproblem with its own copies of the latent variables it
touches. Copies live in flat arrays grouped by hinge so that one iteration
solves all (or the sampled) subproblems in a single vectorized pass.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .config import SolverSettings
from .grounding import GroundProblem
from .logic import LinearHinge
from .model import EnsembleLogicError

logger = logging.getLogger(__name__)

IDLE_VALUE = 0.5


class SolverError(EnsembleLogicError):
    """Raised when solver settings do not fit the problem."""


@dataclass
class HingeLayout:
    num_vars: int
    copy_var: np.ndarray
    copy_coef: np.ndarray
    copy_hinge: np.ndarray
    hinge_ptr: np.ndarray
    constant: np.ndarray
    weight: np.ndarray
    exponent: np.ndarray
    norm_sq: np.ndarray
    var_count: np.ndarray

    @classmethod
    def from_hinges(cls, hinges: Sequence[LinearHinge], num_vars: int) -> "HingeLayout":
        k = len(hinges)
        lengths = np.fromiter((len(h.terms) for h in hinges), dtype=np.int64, count=k)
        hinge_ptr = np.zeros(k + 1, dtype=np.int64)
        np.cumsum(lengths, out=hinge_ptr[1:])
        total = int(hinge_ptr[-1])
        copy_var = np.fromiter((idx for h in hinges for idx, _ in h.terms), dtype=np.int64, count=total)
        copy_coef = np.fromiter((coeff for h in hinges for _, coeff in h.terms), dtype=np.float64, count=total)
        copy_hinge = np.repeat(np.arange(k, dtype=np.int64), lengths)
        if total and (copy_var.min() < 0 or copy_var.max() >= num_vars):
            raise SolverError(f"Hinge references a variable outside [0, {num_vars})")
        return cls(
            num_vars=num_vars,
            copy_var=copy_var,
            copy_coef=copy_coef,
            copy_hinge=copy_hinge,
            hinge_ptr=hinge_ptr,
            constant=np.fromiter((h.constant for h in hinges), dtype=np.float64, count=k),
            weight=np.fromiter((h.weight for h in hinges), dtype=np.float64, count=k),
            exponent=np.fromiter((h.exponent for h in hinges), dtype=np.int64, count=k),
            norm_sq=np.bincount(copy_hinge, weights=copy_coef**2, minlength=k),
            var_count=np.bincount(copy_var, minlength=num_vars).astype(np.float64),
        )

    @property
    def num_hinges(self) -> int:
        return len(self.constant)

    @property
    def num_copies(self) -> int:
        return len(self.copy_var)

    def linear(self, y: np.ndarray) -> np.ndarray:
        return np.bincount(self.copy_hinge, weights=self.copy_coef * y[self.copy_var], minlength=self.num_hinges) + self.constant

    def objective(self, y: np.ndarray) -> float:
        active = np.maximum(self.linear(y), 0.0)
        active = np.where(self.exponent == 2, active * active, active)
        return float(np.dot(self.weight, active))

    def copies_of(self, hinges: np.ndarray) -> np.ndarray:
        starts = self.hinge_ptr[hinges]
        lengths = self.hinge_ptr[hinges + 1] - starts
        offsets = np.arange(int(lengths.sum())) - np.repeat(np.cumsum(lengths) - lengths, lengths)
        return np.repeat(starts, lengths) + offsets


@dataclass
class ConsensusState:
    layout: HingeLayout
    consensus: np.ndarray
    copies: np.ndarray
    multipliers: np.ndarray
    rho: float

    @classmethod
    def initial(cls, layout: HingeLayout, settings: SolverSettings, rng: np.random.Generator) -> "ConsensusState":
        consensus = rng.uniform(0.0, 1.0, layout.num_vars)
        consensus[layout.var_count == 0] = IDLE_VALUE
        if settings.random_multipliers:
            multipliers = rng.uniform(-1.0, 1.0, layout.num_copies)
            copies = rng.uniform(0.0, 1.0, layout.num_copies)
        else:
            multipliers = np.zeros(layout.num_copies)
            copies = consensus[layout.copy_var].copy()
        return cls(layout=layout, consensus=consensus, copies=copies, multipliers=multipliers, rho=settings.rho)

    def disagreement(self) -> np.ndarray:
        return self.copies - self.consensus[self.layout.copy_var]

    def hinge_distances(self) -> np.ndarray:
        """‖y_j − Y_𝒢(j,:)‖₂ for every hinge."""
        diff = self.disagreement()
        return np.sqrt(np.bincount(self.layout.copy_hinge, weights=diff * diff, minlength=self.layout.num_hinges))


def subproblem_solve(hinge: LinearHinge, z: Sequence[float], rho: float) -> np.ndarray:
    """argmin_y λ·max(a·y + b, 0)^p + (ρ/2)‖y − z‖² for a single hinge."""
    if rho <= 0:
        raise SolverError(f"rho must be positive, got {rho}")
    z = np.asarray(z, dtype=np.float64)
    a = np.array([coeff for _, coeff in hinge.terms], dtype=np.float64)
    b = hinge.constant
    norm_sq = float(a @ a)
    if norm_sq == 0.0:
        return z.copy()
    az = float(a @ z) + b
    if hinge.exponent == 2:
        if az <= 0.0:
            return z.copy()
        active = az / (1.0 + 2.0 * hinge.weight * norm_sq / rho)
        return z - (2.0 * hinge.weight * active / rho) * a
    step = hinge.weight / rho
    candidate = z - step * a
    if float(a @ candidate) + b >= 0.0:
        return candidate
    if az <= 0.0:
        return z.copy()
    return z - (az / norm_sq) * a


def _prox_batch(layout: HingeLayout, hinges: np.ndarray, copies: np.ndarray, z: np.ndarray, rho: float) -> np.ndarray:
    """Vectorized subproblem_solve over `hinges` whose copies are `copies` (same order)."""
    lengths = layout.hinge_ptr[hinges + 1] - layout.hinge_ptr[hinges]
    local = np.repeat(np.arange(len(hinges)), lengths)
    coef = layout.copy_coef[copies]
    az = np.bincount(local, weights=coef * z, minlength=len(hinges)) + layout.constant[hinges]
    weight = layout.weight[hinges]
    norm_sq = layout.norm_sq[hinges]
    safe_norm = np.where(norm_sq > 0.0, norm_sq, 1.0)

    linear_shift = np.where(
        az - (weight / rho) * norm_sq >= 0.0,
        weight / rho,
        np.where(az <= 0.0, 0.0, az / safe_norm),
    )
    squared_shift = np.where(az > 0.0, 2.0 * weight * az / (rho + 2.0 * weight * norm_sq), 0.0)
    shift = np.where(layout.exponent[hinges] == 2, squared_shift, linear_shift)
    shift = np.where(norm_sq > 0.0, shift, 0.0)
    return z - shift[local] * coef


def consensus_update(
    state: ConsensusState, variables: Optional[np.ndarray] = None, sums: Optional[np.ndarray] = None
) -> ConsensusState:
    """Average copies plus scaled multipliers per variable and project onto [0, 1].

    When `variables` is given only those entries are rewritten; the average
    still runs over all of their copies. `sums` holds the per-variable totals
    of copies + α/ρ when the caller already keeps them.
    """
    layout = state.layout
    if sums is None:
        sums = np.bincount(layout.copy_var, weights=state.copies + state.multipliers / state.rho, minlength=layout.num_vars)
    if variables is None:
        counts = np.where(layout.var_count > 0, layout.var_count, 1.0)
        averaged = np.clip(sums / counts, 0.0, 1.0)
        averaged[layout.var_count == 0] = IDLE_VALUE
        state.consensus = averaged
    else:
        state.consensus[variables] = np.clip(sums[variables] / layout.var_count[variables], 0.0, 1.0)
    return state


def sample_subproblems(
    state: ConsensusState,
    k: int,
    floor: float,
    rng: np.random.Generator,
    distances: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Draw `k` distinct hinges with probability ∝ copy distance + floor (sorted).

    `distances` are per-hinge distances kept by the caller; they are
    recomputed from the state when omitted.
    """
    layout = state.layout
    lengths = np.diff(layout.hinge_ptr)
    candidates = np.flatnonzero(lengths > 0)
    if k >= len(candidates):
        return candidates
    if distances is None:
        distances = state.hinge_distances()
    weights = distances[candidates] + floor
    positive = np.flatnonzero(weights > 0.0)
    if len(positive) == 0:
        chosen = rng.choice(len(candidates), size=k, replace=False)
    elif len(positive) < k:
        rest = np.flatnonzero(weights <= 0.0)
        chosen = np.concatenate([positive, rng.choice(rest, size=k - len(positive), replace=False)])
    else:
        chosen = rng.choice(len(candidates), size=k, replace=False, p=weights / weights.sum())
    return np.sort(candidates[chosen])


@dataclass
class SolverDiagnostics:
    mode: str
    iterations: int = 0
    converged: bool = False
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    subproblem_residual: float = 0.0
    subproblem_solves: int = 0
    idle_variables: int = 0
    trace_iterations: List[int] = field(default_factory=list)
    objective_trace: List[float] = field(default_factory=list)
    primal_trace: List[float] = field(default_factory=list)
    dual_trace: List[float] = field(default_factory=list)

    def record(self, iteration: int, objective: float, primal: float, dual: float) -> None:
        self.trace_iterations.append(iteration)
        self.objective_trace.append(objective)
        self.primal_trace.append(primal)
        self.dual_trace.append(dual)
        self.primal_residual = primal
        self.dual_residual = dual

    def to_dict(self) -> Dict[str, object]:
        return {
            "mode": self.mode,
            "iterations": self.iterations,
            "converged": self.converged,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "subproblem_residual": self.subproblem_residual,
            "subproblem_solves": self.subproblem_solves,
            "idle_variables": self.idle_variables,
            "trace": [
                {"iteration": it, "objective": obj, "primal_residual": pri, "dual_residual": dua}
                for it, obj, pri, dua in zip(self.trace_iterations, self.objective_trace, self.primal_trace, self.dual_trace)
            ],
        }


@dataclass
class SolverResult:
    y: np.ndarray
    objective: float
    diagnostics: SolverDiagnostics


def solve(problem: GroundProblem, settings: Optional[SolverSettings] = None) -> SolverResult:
    settings = settings or SolverSettings()
    layout = HingeLayout.from_hinges(problem.hinges, problem.m)
    return solve_layout(layout, settings)


class _Thresholds:
    """Stopping tolerances: primal over stacked copies, dual over per-variable multiplier sums."""

    def __init__(self, layout: HingeLayout, settings: SolverSettings) -> None:
        self.layout = layout
        self.eps_abs = settings.eps_abs
        self.eps_rel = settings.eps_rel
        self.sqrt_copies = math.sqrt(layout.num_copies)
        self.sqrt_vars = math.sqrt(layout.num_vars)

    def primal(self, state: ConsensusState) -> float:
        scale = max(float(np.linalg.norm(state.copies)), float(np.linalg.norm(state.consensus[self.layout.copy_var])))
        return self.sqrt_copies * self.eps_abs + self.eps_rel * scale

    def dual(self, state: ConsensusState) -> float:
        summed = np.bincount(self.layout.copy_var, weights=state.multipliers, minlength=self.layout.num_vars)
        return self.sqrt_vars * self.eps_abs + self.eps_rel * float(np.linalg.norm(summed))


def _step(state: ConsensusState, hinges: np.ndarray, copies: np.ndarray) -> None:
    layout, rho = state.layout, state.rho
    target = state.consensus[layout.copy_var[copies]]
    state.multipliers[copies] += rho * (state.copies[copies] - target)
    z = target - state.multipliers[copies] / rho
    state.copies[copies] = _prox_batch(layout, hinges, copies, z, rho)


def _run_full(state: ConsensusState, settings: SolverSettings, diagnostics: SolverDiagnostics) -> np.ndarray:
    layout, rho = state.layout, state.rho
    thresholds = _Thresholds(layout, settings)
    hinges = np.flatnonzero(np.diff(layout.hinge_ptr) > 0)
    copies = np.arange(layout.num_copies)
    best_y, best_objective = state.consensus.copy(), layout.objective(state.consensus)
    for iteration in range(1, settings.max_iterations + 1):
        _step(state, hinges, copies)
        diagnostics.subproblem_solves += len(hinges)
        previous = state.consensus.copy()
        consensus_update(state)

        primal = float(np.linalg.norm(state.disagreement()))
        dual = rho * float(np.linalg.norm(state.consensus - previous))
        objective = layout.objective(state.consensus)
        diagnostics.iterations = iteration
        diagnostics.record(iteration, objective, primal, dual)
        if objective < best_objective:
            best_objective, best_y = objective, state.consensus.copy()
        if primal <= thresholds.primal(state) and dual <= thresholds.dual(state):
            diagnostics.converged = True
            return state.consensus
    return best_y


def _run_stochastic(
    state: ConsensusState, settings: SolverSettings, diagnostics: SolverDiagnostics, rng: np.random.Generator
) -> np.ndarray:
    """Sampled ADMM whose iterations touch only the sampled copies.

    Per-variable sums of copies + α/ρ and per-hinge distances are updated
    only for the sampled hinges. Once per sweep (enough iterations to cover
    every hinge once on average) the sums and distances are rebuilt, the
    objective is recorded and convergence is tested over all hinges: the
    primal residual, the consensus change since the previous sweep, and the
    gap between every copy and a fresh subproblem solve at its current target.
    """
    layout, rho = state.layout, state.rho
    k = settings.stochastic_k
    thresholds = _Thresholds(layout, settings)
    all_hinges = np.flatnonzero(np.diff(layout.hinge_ptr) > 0)
    all_copies = np.arange(layout.num_copies)
    sweep = math.ceil(len(all_hinges) / k)
    sums = np.bincount(layout.copy_var, weights=state.copies + state.multipliers / rho, minlength=layout.num_vars)
    distances = state.hinge_distances()
    checkpoint = state.consensus.copy()
    best_y, best_objective = state.consensus.copy(), layout.objective(state.consensus)

    for iteration in range(1, settings.max_iterations + 1):
        hinges = sample_subproblems(state, k, settings.distance_floor, rng, distances=distances)
        copies = layout.copies_of(hinges)
        var = layout.copy_var[copies]
        np.subtract.at(sums, var, state.copies[copies] + state.multipliers[copies] / rho)
        _step(state, hinges, copies)
        np.add.at(sums, var, state.copies[copies] + state.multipliers[copies] / rho)
        consensus_update(state, np.unique(var), sums)
        local = np.repeat(np.arange(len(hinges)), layout.hinge_ptr[hinges + 1] - layout.hinge_ptr[hinges])
        gap = state.copies[copies] - state.consensus[var]
        distances[hinges] = np.sqrt(np.bincount(local, weights=gap * gap, minlength=len(hinges)))
        diagnostics.subproblem_solves += len(hinges)
        diagnostics.iterations = iteration
        if iteration % sweep and iteration < settings.max_iterations:
            continue

        sums = np.bincount(layout.copy_var, weights=state.copies + state.multipliers / rho, minlength=layout.num_vars)
        distances = state.hinge_distances()
        primal = float(np.linalg.norm(distances))
        dual = rho * float(np.linalg.norm(state.consensus - checkpoint))
        z = state.consensus[layout.copy_var] - state.multipliers / rho
        fresh = _prox_batch(layout, all_hinges, all_copies, z, rho)
        diagnostics.subproblem_residual = float(np.linalg.norm(fresh - state.copies))
        objective = layout.objective(state.consensus)
        diagnostics.record(iteration, objective, primal, dual)
        checkpoint = state.consensus.copy()
        if objective < best_objective:
            best_objective, best_y = objective, state.consensus.copy()
        eps_primal = thresholds.primal(state)
        if primal <= eps_primal and dual <= thresholds.dual(state) and diagnostics.subproblem_residual <= eps_primal:
            diagnostics.converged = True
            return state.consensus
    return best_y


def solve_layout(layout: HingeLayout, settings: SolverSettings) -> SolverResult:
    rng = np.random.default_rng(settings.seed)
    diagnostics = SolverDiagnostics(mode=settings.mode)
    idle = layout.var_count == 0
    diagnostics.idle_variables = int(idle.sum())
    if diagnostics.idle_variables and layout.num_copies:
        logger.warning("%d latent variables appear in no hinge; fixed at %.1f", diagnostics.idle_variables, IDLE_VALUE)

    stochastic_k = settings.stochastic_k
    if stochastic_k is not None and stochastic_k > layout.num_hinges:
        raise SolverError(f"stochastic K={stochastic_k} exceeds the number of hinges ({layout.num_hinges})")

    state = ConsensusState.initial(layout, settings, rng)
    if layout.num_copies == 0:
        diagnostics.converged = True
        return SolverResult(y=state.consensus, objective=layout.objective(state.consensus), diagnostics=diagnostics)

    candidates = int(np.count_nonzero(np.diff(layout.hinge_ptr)))
    if stochastic_k is None or stochastic_k >= candidates:
        y = _run_full(state, settings, diagnostics)
    else:
        y = _run_stochastic(state, settings, diagnostics, rng)

    if not diagnostics.converged:
        logger.warning(
            "ADMM did not converge in %d iterations (primal %.3g, dual %.3g); returning best iterate",
            diagnostics.iterations,
            diagnostics.primal_residual,
            diagnostics.dual_residual,
        )
    return SolverResult(y=y, objective=layout.objective(y), diagnostics=diagnostics)
