import numpy as np
import pytest

from rankcast.errors import ValidationError
from rankcast.ga import POPULATION, ConfigBounds, ga_optimize


def test_single_point_space_returns_that_point():
    bounds = ConfigBounds(
        hidden_units=(7, 7),
        learning_rate=(0.01, 0.01),
        epochs=(120, 120),
        context_decay=(0.3, 0.3),
    )
    calls = []

    def fitness(genes):
        calls.append(genes)
        return 1.0

    config = ga_optimize(None, bounds, budget=POPULATION, seed=0, fitness=fitness)
    assert (config.hidden_units, config.learning_rate, config.epochs, config.context_decay) == (
        7, 0.01, 120, 0.3,
    )
    assert len(calls) == 1  # identical genes are cached, not re-evaluated


def test_budget_never_exceeded():
    bounds = ConfigBounds()
    count = 0

    def fitness(genes):
        nonlocal count
        count += 1
        return float(np.sum(np.abs(genes[:2])))

    ga_optimize(None, bounds, budget=40, seed=1, fitness=fitness)
    assert count <= 40


def test_budget_below_population_errors():
    with pytest.raises(ValidationError):
        ga_optimize(None, ConfigBounds(), budget=POPULATION - 1, seed=0, fitness=lambda g: 0.0)


def test_best_ever_not_worse_than_any_evaluated():
    bounds = ConfigBounds()
    seen = {}

    def fitness(genes):
        value = (genes[0] - 11) ** 2 + genes[3]
        seen[genes] = value
        return value

    config = ga_optimize(None, bounds, budget=120, seed=5, fitness=fitness)
    best = (config.hidden_units, config.learning_rate, config.epochs, config.context_decay)
    assert seen[best] <= min(seen.values())


def test_unimodal_fitness_found_within_one_unit():
    # fitness rigged to a parabola in hidden width; everything else is inert
    bounds = ConfigBounds(
        learning_rate=(0.01, 0.01), epochs=(100, 100), context_decay=(0.5, 0.5)
    )
    hits = 0
    for seed in range(50):
        config = ga_optimize(
            None, bounds, budget=64, seed=seed,
            fitness=lambda genes: (genes[0] - 9) ** 2,
        )
        hits += abs(config.hidden_units - 9) <= 1
    assert hits >= 45  # >= 90% of runs
