from __future__ import annotations

import json
import logging
import pathlib
from typing import Dict, Optional

import typer
from pydantic import ValidationError
from rich import print
from rich.markup import escape

from .artifacts import write_metadata
from .baselines import combine_weighted_majority, majority_vote_error_rates, majority_votes
from .config import RunConfig, SynthSpec
from .estimator import estimate
from .formats import (
    parse_constraints,
    parse_labels,
    parse_predictions,
    read_error_rates,
    read_targets,
    write_constraints,
    write_error_rates,
    write_labels,
    write_predictions,
)
from .logs import configure_logging
from .model import EnsembleLogicError, Ontology, TargetOutput, Vocabulary
from .scoring import evaluate_estimates
from .synth import generate
from .workspace import RunDirectory, run_paths

app = typer.Typer(add_completion=False, help="Ensemble error-rate estimation with logic constraints")

logger = logging.getLogger(__name__)

EXIT_INPUT_ERROR = 2
EXIT_NOT_CONVERGED = 3

INPUT_ERRORS = (EnsembleLogicError, ValidationError, OSError)


def _fail(message: str, exc: Exception) -> None:
    print(f"[red]{message}[/red]: {escape(str(exc))}")
    raise typer.Exit(EXIT_INPUT_ERROR)


def _load_config(path: Optional[pathlib.Path]) -> RunConfig:
    return RunConfig.load(path) if path else RunConfig()


def _coverage(hits: int, total: int) -> float:
    return 100.0 * hits / total if total else 0.0


@app.command("estimate")
def cmd_estimate(
    predictions: pathlib.Path = typer.Option(..., help="instance<TAB>domain<TAB>classifier<TAB>value file"),
    out: pathlib.Path = typer.Option(..., help="Directory for error_rates.tsv, targets.tsv and diagnostics"),
    constraints: Optional[pathlib.Path] = typer.Option(None, help="ME/SUB constraint file"),
    labels: Optional[pathlib.Path] = typer.Option(None, help="Known labels clamped as observed targets"),
    config: Optional[pathlib.Path] = typer.Option(None, help="YAML RunConfig; flags below override it"),
    prior_weight: Optional[float] = typer.Option(None, help="Weight κ of the prior rules"),
    error_prior_weight: Optional[float] = typer.Option(None, help="Weight κₑ of the error-rate prior"),
    rho: Optional[float] = typer.Option(None, help="ADMM penalty ρ"),
    eps_abs: Optional[float] = typer.Option(None, help="Absolute convergence tolerance"),
    eps_rel: Optional[float] = typer.Option(None, help="Relative convergence tolerance"),
    max_iters: Optional[int] = typer.Option(None, min=1, help="Iteration limit"),
    stochastic: Optional[int] = typer.Option(None, min=1, help="Sample K subproblems per iteration"),
    seed: Optional[int] = typer.Option(None, help="Solver seed"),
    threshold: Optional[float] = typer.Option(None, help="Soft value at which the hard label becomes 1"),
    squared: bool = typer.Option(False, help="Use squared hinges (p=2)"),
    verbose: bool = typer.Option(False, help="Debug logging"),
) -> None:
    """Estimate classifier error rates and fused targets from unlabeled predictions."""
    configure_logging(verbose)
    try:
        cfg = _load_config(config).with_overrides(
            **{
                "rules.prior_weight": prior_weight,
                "rules.error_prior_weight": error_prior_weight,
                "rules.exponent": 2 if squared else None,
                "solver.rho": rho,
                "solver.eps_abs": eps_abs,
                "solver.eps_rel": eps_rel,
                "solver.max_iterations": max_iters,
                "solver.stochastic_k": stochastic,
                "solver.seed": seed,
                "threshold": threshold,
            }
        )
        vocab = Vocabulary()
        ontology = parse_constraints(constraints, vocab) if constraints else Ontology(num_domains=0)
        obs = parse_predictions(predictions, vocab)
        if labels:
            for (domain, instance), label in parse_labels(labels, vocab).items():
                obs.set(TargetOutput(domain, instance), float(label))
        estimates = estimate(obs, ontology, cfg)
        paths = RunDirectory(out).write_estimates(estimates, vocab, cfg)
        write_metadata(
            paths.metadata,
            inputs={"predictions": predictions, "constraints": constraints, "labels": labels},
            config=cfg,
            converged=estimates.converged,
        )
    except INPUT_ERRORS as exc:
        _fail("Estimation failed", exc)

    print("[green]Resolved config:[/green]")
    typer.echo(cfg.to_yaml())
    if not estimates.converged:
        print(
            f"[yellow]Not converged[/yellow] after {estimates.diagnostics.iterations} iterations; "
            f"best iterate written to {paths.root}"
        )
        raise typer.Exit(EXIT_NOT_CONVERGED)
    print(f"[green]Estimates written to[/green] {paths.root}")


@app.command("evaluate")
def cmd_evaluate(
    estimates: pathlib.Path = typer.Option(..., help="Output directory of the estimate command"),
    predictions: pathlib.Path = typer.Option(..., help="Predictions the estimates were computed from"),
    truth: pathlib.Path = typer.Option(..., help="instance<TAB>domain<TAB>{0|1} file"),
    out: pathlib.Path = typer.Option(..., help="JSON report path"),
    verbose: bool = typer.Option(False, help="Debug logging"),
) -> None:
    """Score estimates against ground truth, next to the majority-vote baselines."""
    configure_logging(verbose)
    try:
        vocab = Vocabulary()
        obs = parse_predictions(predictions, vocab)
        labels = parse_labels(truth, vocab)
        paths = run_paths(estimates)
        error_rates = read_error_rates(paths.error_rates, vocab)
        target_soft, _ = read_targets(paths.targets, vocab)
    except INPUT_ERRORS as exc:
        _fail("Evaluation failed", exc)

    covered = sum(1 for key in target_soft if key in labels)
    coverage = _coverage(covered, len(target_soft))
    report: Dict[str, object] = {
        "coverage": {
            "labeled_targets": covered,
            "estimated_targets": len(target_soft),
            "percent": coverage,
        }
    }
    domain_names = vocab.domains.names()
    if covered:
        report["estimates"] = evaluate_estimates(obs, labels, error_rates, target_soft).to_dict(domain_names)
        report["majority_vote"] = evaluate_estimates(
            obs, labels, majority_vote_error_rates(obs), majority_votes(obs)
        ).to_dict(domain_names)
        observed = {(p.domain, p.classifier) for p, _ in obs.approx_items()}
        if observed <= error_rates.keys():
            report["weighted_majority_vote"] = evaluate_estimates(
                obs, labels, error_rates, combine_weighted_majority(obs, error_rates)
            ).to_dict(domain_names)
        else:
            logger.warning("Skipping weighted majority vote: %d classifier/domain pairs lack an estimate", len(observed - error_rates.keys()))

    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if not covered:
        print(f"[red]No estimated target has a truth label[/red] (coverage 0%); report: {out}")
        raise typer.Exit(EXIT_INPUT_ERROR)
    average = report["estimates"]["average"]
    print(
        f"[green]Evaluation complete[/green] (coverage {coverage:.1f}%): "
        f"mad_error={average['mad_error']}, mad_error_rank={average['mad_error_rank']}, auc_target={average['auc_target']}"
    )
    print(f"[green]Report:[/green] {out}")


@app.command("synth")
def cmd_synth(
    out: pathlib.Path = typer.Option(..., help="Directory for predictions.tsv, labels.tsv and companions"),
    domains: int = typer.Option(..., min=1, help="Number of domains"),
    classifiers: int = typer.Option(..., min=1, help="Number of classifiers"),
    instances: int = typer.Option(..., min=0, help="Number of instances"),
    error_low: float = typer.Option(0.05, help="Lower bound of the true error rates"),
    error_high: float = typer.Option(0.4, help="Upper bound of the true error rates"),
    constraints: Optional[pathlib.Path] = typer.Option(None, help="ME/SUB constraint file the labels must satisfy"),
    density: float = typer.Option(1.0, help="Probability that each output is kept"),
    positive_rate: float = typer.Option(0.2, help="Per-domain label rate before constraint rejection"),
    seed: int = typer.Option(0, help="Generator seed"),
    soft: bool = typer.Option(False, help="Emit soft outputs instead of 0/1"),
    verbose: bool = typer.Option(False, help="Debug logging"),
) -> None:
    """Write a synthetic benchmark: noisy classifier outputs over constraint-consistent labels."""
    configure_logging(verbose)
    try:
        vocab = Vocabulary()
        ontology = parse_constraints(constraints, vocab) if constraints else Ontology(num_domains=domains)
        spec = SynthSpec(
            num_domains=domains,
            num_classifiers=classifiers,
            num_instances=instances,
            error_range=(error_low, error_high),
            soft=soft,
            density=density,
            positive_rate=positive_rate,
            seed=seed,
        )
        result = generate(spec, ontology, vocab)
        out.mkdir(parents=True, exist_ok=True)
        write_predictions(result.observations, out / "predictions.tsv")
        write_labels(result.truth, out / "labels.tsv")
        write_constraints(ontology.resized(domains), vocab, out / "constraints.tsv")
        rates = {(d, j): float(result.error_rates[d, j]) for d in range(domains) for j in range(classifiers)}
        write_error_rates(rates, vocab, out / "true_error_rates.tsv")
    except INPUT_ERRORS as exc:
        _fail("Generation failed", exc)
    print(f"[green]Synthetic benchmark written to[/green] {out} ({len(result.observations)} outputs)")


if __name__ == "__main__":
    app()
