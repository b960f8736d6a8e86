#!/usr/bin/env python
"""Statistical acceptance experiments on synthetic benchmarks.

Runs the multi-seed checks that are too slow or too noisy for the unit suite
and writes a JSON summary next to a rich table on stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import pathlib
import statistics
import sys
import time
from typing import Callable, Dict, List

ROOT = pathlib.Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

import numpy as np
from rich.console import Console
from rich.table import Table

from ensemble_logic.admm import HingeLayout, solve_layout
from ensemble_logic.baselines import majority_vote_error_rates
from ensemble_logic.config import RuleWeights, RunConfig, SolverSettings, SynthSpec
from ensemble_logic.estimator import estimate
from ensemble_logic.formats import parse_constraints
from ensemble_logic.grounding import ground
from ensemble_logic.logs import configure_logging
from ensemble_logic.model import ApproxOutput, ObservationSet, Ontology, build_ontology
from ensemble_logic.scoring import empirical_error_rates, mad_error
from ensemble_logic.synth import generate

logger = logging.getLogger("ensemble_logic.acceptance")

SEEDS = [0, 1, 2, 3, 4]

# Squared hinges with strong priors; the default linear profile settles at e = f = 0.5 on dense ensembles.
RECOVERY_RULES = RuleWeights(prior_weight=1.0, error_prior_weight=0.5, exponent=2)
REFERENCE_SOLVER = SolverSettings(eps_abs=1e-8, eps_rel=1e-7, max_iterations=100_000)


def _nell7() -> Ontology:
    return build_ontology(7, me_sets=[list(range(7))])


def _recovery_spec(instances: int, seed: int) -> SynthSpec:
    return SynthSpec(num_domains=7, num_classifiers=6, num_instances=instances, error_range=(0.05, 0.4), seed=seed)


def _mad_against_sample(obs: ObservationSet, truth, error_rates: Dict) -> float:
    sample = empirical_error_rates(obs, truth)
    keys = sorted(key for key in sample if key in error_rates)
    return mad_error([error_rates[key] for key in keys], [sample[key] for key in keys])


def _recovery_runs(instances: int, config: RunConfig) -> List[dict]:
    rows: List[dict] = []
    for seed in SEEDS:
        result = generate(_recovery_spec(instances, seed), _nell7())
        estimates = estimate(result.observations, _nell7(), config)
        rows.append(
            {
                "seed": seed,
                "mad_error": _mad_against_sample(result.observations, result.truth, estimates.error_rates),
                "majority_vote_mad_error": _mad_against_sample(
                    result.observations, result.truth, majority_vote_error_rates(result.observations)
                ),
                "converged": estimates.converged,
            }
        )
    return rows


def _recovered(rows: List[dict]) -> bool:
    return all(r["mad_error"] <= 0.10 and r["mad_error"] < r["majority_vote_mad_error"] for r in rows)


def check_recovery(instances: int) -> dict:
    """Error-rate recovery under the default rules and under RECOVERY_RULES; the latter decides the verdict."""
    default_rows = _recovery_runs(instances, RunConfig())
    profile_rows = _recovery_runs(instances, RunConfig(rules=RECOVERY_RULES))
    return {
        "check": "synthetic_recovery",
        "passed": _recovered(profile_rows),
        "default_rules_passed": _recovered(default_rows),
        "default_mean_mad_error": statistics.fmean(r["mad_error"] for r in default_rows),
        "profile_mean_mad_error": statistics.fmean(r["mad_error"] for r in profile_rows),
        "runs": profile_rows,
        "default_runs": default_rows,
    }


def check_semi_supervised(instances: int) -> dict:
    rows: List[dict] = []
    for seed in SEEDS:
        result = generate(_recovery_spec(instances, seed), _nell7())
        unsupervised = estimate(result.observations, _nell7())
        clamped = estimate(result.observations.with_targets(result.truth, 0.1, seed=seed), _nell7())
        rows.append(
            {
                "seed": seed,
                "unsupervised_mad_error": _mad_against_sample(result.observations, result.truth, unsupervised.error_rates),
                "clamped_mad_error": _mad_against_sample(result.observations, result.truth, clamped.error_rates),
            }
        )
    unsupervised_mean = statistics.fmean(r["unsupervised_mad_error"] for r in rows)
    clamped_mean = statistics.fmean(r["clamped_mad_error"] for r in rows)
    return {
        "check": "semi_supervised",
        "passed": clamped_mean <= unsupervised_mean,
        "unsupervised_mean": unsupervised_mean,
        "clamped_mean": clamped_mean,
        "runs": rows,
    }


def _solves_to_gap(iterations: List[int], trace: List[float], per_iteration: float, reference: float, gap: float) -> float | None:
    bound = reference + gap * max(abs(reference), 1e-12)
    for iteration, objective in zip(iterations, trace):
        if objective <= bound:
            return iteration * per_iteration
    return None


def check_stochastic(instances: int) -> dict:
    result = generate(SynthSpec(num_domains=7, num_classifiers=6, num_instances=instances, seed=0), _nell7())
    problem = ground(result.observations, _nell7())
    layout = HingeLayout.from_hinges(problem.hinges, problem.m)
    k = max(1, layout.num_hinges // 10)

    reference = solve_layout(layout, REFERENCE_SOLVER).objective
    started = time.perf_counter()
    full = solve_layout(layout, SolverSettings())
    full_seconds = time.perf_counter() - started
    started = time.perf_counter()
    sampled = solve_layout(layout, SolverSettings(stochastic_k=k))
    sampled_seconds = time.perf_counter() - started

    scale = max(abs(reference), 1e-12)
    full_gap = abs(full.objective - reference) / scale
    relative = abs(sampled.objective - reference) / scale
    full_per_iteration = full.diagnostics.subproblem_solves / max(full.diagnostics.iterations, 1)
    full_solves = _solves_to_gap(
        full.diagnostics.trace_iterations, full.diagnostics.objective_trace, full_per_iteration, reference, 0.05
    )
    sampled_solves = _solves_to_gap(
        sampled.diagnostics.trace_iterations, sampled.diagnostics.objective_trace, k, reference, 0.05
    )
    passed = relative <= 0.01 and sampled_solves is not None and full_solves is not None and sampled_solves < full_solves
    return {
        "check": "stochastic_vs_full",
        "passed": passed,
        "hinges": layout.num_hinges,
        "k": k,
        "reference_objective": reference,
        "full_objective": full.objective,
        "stochastic_objective": sampled.objective,
        "full_relative_gap": full_gap,
        "relative_gap": relative,
        "full_solves_to_5pct": full_solves,
        "stochastic_solves_to_5pct": sampled_solves,
        "full_seconds": full_seconds,
        "stochastic_seconds": sampled_seconds,
    }


def _paired_outputs(rng: np.random.Generator, violating: bool) -> ObservationSet:
    obs = ObservationSet()
    for x in range(50):
        positive = int(rng.integers(0, 2))
        clash = violating and rng.random() < 0.3
        for j in range(3):
            for d in range(2):
                label = 1 if clash else int(d == positive)
                obs.set(ApproxOutput(d, j, x), float(label))
    return obs


def check_constraint_signal() -> dict:
    ontology = build_ontology(2, me_sets=[[0, 1]])
    rows: List[dict] = []
    for seed in SEEDS:
        consistent = estimate(_paired_outputs(np.random.default_rng(seed), False), ontology)
        violating = estimate(_paired_outputs(np.random.default_rng(seed), True), ontology)
        rows.append(
            {
                "seed": seed,
                "consistent_error_mass": sum(consistent.error_rates.values()),
                "violating_error_mass": sum(violating.error_rates.values()),
            }
        )
    passed = all(r["violating_error_mass"] > r["consistent_error_mass"] for r in rows)
    return {"check": "constraint_signal", "passed": passed, "runs": rows}


def check_scale(outputs: int) -> dict:
    ontology = parse_constraints(ROOT / "sample_data" / "nell11.constraints")
    instances = -(-outputs // (11 * 3))
    result = generate(SynthSpec(num_domains=11, num_classifiers=3, num_instances=instances, seed=0), ontology)
    started = time.perf_counter()
    estimates = estimate(result.observations, ontology)
    seconds = time.perf_counter() - started
    return {
        "check": "scale_smoke",
        "passed": seconds < 300.0,
        "observed_outputs": len(result.observations),
        "hinges": estimates.problem_size["hinges"],
        "iterations": estimates.diagnostics.iterations,
        "converged": estimates.converged,
        "seconds": seconds,
    }


def _render(results: List[dict], console: Console) -> None:
    table = Table(title="Acceptance checks")
    table.add_column("check")
    table.add_column("status")
    table.add_column("details")
    for result in results:
        details = {k: v for k, v in result.items() if k not in ("check", "passed", "runs")}
        status = "[green]pass[/green]" if result["passed"] else "[red]fail[/red]"
        table.add_row(result["check"], status, json.dumps(details, default=float)[:120])
    console.print(table)


def main() -> None:
    parser = argparse.ArgumentParser(description="Run the statistical acceptance experiments.")
    parser.add_argument(
        "--check",
        action="append",
        choices=["recovery", "semi", "stochastic", "constraint", "scale"],
        help="Checks to run (repeatable; default: all)",
    )
    parser.add_argument("--instances", type=int, default=5000, help="Instances for the recovery and semi-supervised benchmarks")
    parser.add_argument("--stochastic-instances", type=int, default=2000, help="Instances for the stochastic-vs-full benchmark")
    parser.add_argument("--scale-outputs", type=int, default=100_000, help="Observed outputs for the scale smoke test")
    parser.add_argument("--out", type=pathlib.Path, default=ROOT / "results" / "acceptance.json", help="JSON summary path")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    args = parser.parse_args()

    configure_logging(args.verbose)
    checks: Dict[str, Callable[[], dict]] = {
        "recovery": lambda: check_recovery(args.instances),
        "semi": lambda: check_semi_supervised(args.instances),
        "stochastic": lambda: check_stochastic(args.stochastic_instances),
        "constraint": check_constraint_signal,
        "scale": lambda: check_scale(args.scale_outputs),
    }
    selected = args.check or list(checks)
    results = []
    for name in selected:
        logger.info("Running %s", name)
        results.append(checks[name]())

    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(results, indent=2, default=float) + "\n", encoding="utf-8")
    _render(results, Console())
    if not all(r["passed"] for r in results):
        raise SystemExit(f"Acceptance checks failed; see {args.out}")
    print(f"[acceptance] ok -> {args.out}")


if __name__ == "__main__":
    main()
