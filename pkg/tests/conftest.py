from __future__ import annotations

import pathlib
from typing import Callable, List, Sequence, Tuple

import numpy as np
import pytest
from scipy.optimize import linprog

from ensemble_logic.config import RunConfig, SolverSettings
from ensemble_logic.logic import LinearHinge

SAMPLE_DATA = pathlib.Path(__file__).resolve().parents[1] / "sample_data"


def lp_minimum(hinges: Sequence[LinearHinge], num_vars: int) -> Tuple[float, np.ndarray]:
    """Exact minimum of Σ λ max(a·y + b, 0) over [0, 1]^m (linear hinges only)."""
    assert all(h.exponent == 1 for h in hinges)
    k = len(hinges)
    if k == 0:
        return 0.0, np.full(num_vars, 0.5)
    cost = np.concatenate([np.zeros(num_vars), [h.weight for h in hinges]])
    a_ub = np.zeros((k, num_vars + k))
    b_ub = np.zeros(k)
    for j, hinge in enumerate(hinges):
        for idx, coeff in hinge.terms:
            a_ub[j, idx] = coeff
        a_ub[j, num_vars + j] = -1.0
        b_ub[j] = -hinge.constant
    bounds = [(0.0, 1.0)] * num_vars + [(0.0, None)] * k
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return float(res.fun), res.x[:num_vars]


def random_hinges(rng: np.random.Generator, num_vars: int, count: int, exponent: int = 1) -> List[LinearHinge]:
    hinges: List[LinearHinge] = []
    for _ in range(count):
        size = int(rng.integers(1, min(3, num_vars) + 1))
        idx = sorted(int(i) for i in rng.choice(num_vars, size=size, replace=False))
        coeffs = rng.choice([-1.0, 1.0], size=size)
        hinges.append(
            LinearHinge(
                terms=tuple(zip(idx, coeffs.tolist())),
                constant=float(rng.uniform(-1.0, 1.0)),
                weight=float(rng.uniform(0.1, 2.0)),
                exponent=exponent,
            )
        )
    return hinges


@pytest.fixture
def lp_oracle() -> Callable[[Sequence[LinearHinge], int], Tuple[float, np.ndarray]]:
    return lp_minimum


@pytest.fixture
def hinge_factory() -> Callable[..., List[LinearHinge]]:
    return random_hinges


@pytest.fixture
def tight_config() -> RunConfig:
    return RunConfig(solver=SolverSettings(eps_abs=1e-7, eps_rel=1e-6, max_iterations=50_000))


@pytest.fixture
def sample_data() -> pathlib.Path:
    return SAMPLE_DATA
