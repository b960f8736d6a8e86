from __future__ import annotations

import json
import pathlib
from dataclasses import dataclass

from .config import RunConfig
from .estimator import Estimates
from .formats import write_error_rates, write_targets
from .model import Vocabulary


@dataclass
class RunPaths:
    root: pathlib.Path
    error_rates: pathlib.Path
    targets: pathlib.Path
    diagnostics: pathlib.Path
    config: pathlib.Path
    metadata: pathlib.Path


def run_paths(root: pathlib.Path) -> RunPaths:
    return RunPaths(
        root=root,
        error_rates=root / "error_rates.tsv",
        targets=root / "targets.tsv",
        diagnostics=root / "diagnostics.json",
        config=root / "config.yaml",
        metadata=root / "metadata.json",
    )


class RunDirectory:
    """Output directory of one estimate run."""

    def __init__(self, root: pathlib.Path):
        self.paths = run_paths(root)

    def create(self) -> RunPaths:
        self.paths.root.mkdir(parents=True, exist_ok=True)
        return self.paths

    @staticmethod
    def write_json(target: pathlib.Path, payload: dict) -> pathlib.Path:
        target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return target

    def write_estimates(self, estimates: Estimates, vocab: Vocabulary, config: RunConfig) -> RunPaths:
        paths = self.create()
        write_error_rates(estimates.error_rates, vocab, paths.error_rates)
        write_targets(estimates.target_soft, estimates.target_hard, vocab, paths.targets)
        diagnostics = estimates.diagnostics.to_dict()
        diagnostics["objective"] = estimates.objective
        diagnostics["problem_size"] = dict(estimates.problem_size)
        self.write_json(paths.diagnostics, diagnostics)
        config.dump(paths.config)
        return paths
