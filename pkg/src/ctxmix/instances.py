"""Built-in problem instances used by the CLI, the verify command and the tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import GridSpec, auto_lambda_range, omega_grid
from .models import ContextModelSet, Distribution, SampleSpace, make_distribution


@dataclass(frozen=True, eq=False)
class Instance:
    models: ContextModelSet
    target: Distribution
    name: str = "custom"


def instance_e1() -> Instance:
    """Two models on a binary alphabet, the second uniform (so its weight is irrelevant)."""
    models = ContextModelSet.from_probs([0, 1], [[0.9, 0.1], [0.5, 0.5]])
    target = make_distribution(models.space, [0.8, 0.2])
    return Instance(models, target, "E1")


def instance_e1_grid(lambda_count: int = 3, padding: float = 0.0, omega_count: int = 3) -> GridSpec:
    e1 = instance_e1()
    omegas = omega_grid(2, omega_count)
    return GridSpec(omegas, auto_lambda_range(e1.models, omegas, lambda_count, padding))


def instance_downsized() -> Instance:
    """One context on a binary alphabet: the smallest non-trivial grand-space instance."""
    models = ContextModelSet.from_probs([0, 1], [[0.9, 0.1]])
    target = make_distribution(models.space, [0.8, 0.2])
    return Instance(models, target, "E1-downsized")


def random_instance(rng: np.random.Generator, symbols: int, contexts: int,
                    concentration: float = 1.0, floor: float = 1e-3) -> Instance:
    """Dirichlet-drawn models and target, floored away from zero."""
    space = SampleSpace(tuple(range(symbols)))

    def draw():
        p = rng.dirichlet(np.full(symbols, concentration)) + floor
        return make_distribution(space, p, normalize=True)

    models = ContextModelSet(space, tuple(draw() for _ in range(contexts)))
    return Instance(models, draw(), "random")
