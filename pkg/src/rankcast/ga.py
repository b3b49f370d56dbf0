"""Genetic search over network hyperparameters.

Generational GA with tournament selection (size 3), uniform crossover
(per-gene swap probability 0.5), per-gene mutation rate 0.1 and elitism of
one. The search space is deliberately tiny: hidden width, learning rate,
epoch cap and context decay. Fitness defaults to the validation loss of a
freshly trained ensemble on a fixed ten-quarter window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .features import build_feature_matrix
from .network import AnnConfig, TRAIN_QUARTERS, ann_train
from .panel import QuarterlyPanel

POPULATION = 16
DEFAULT_GENERATIONS = 10
TOURNAMENT = 3
CROSSOVER_RATE = 0.5
MUTATION_RATE = 0.1


@dataclass
class ConfigBounds:
    hidden_units: tuple[int, int] = (2, 16)
    learning_rate: tuple[float, float] = (1e-4, 1e-1)
    epochs: tuple[int, int] = (50, 400)
    context_decay: tuple[float, float] = (0.0, 0.9)

    def __post_init__(self):
        for name in ("hidden_units", "learning_rate", "epochs", "context_decay"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValidationError(f"{name} bounds reversed: {lo} > {hi}")


Genes = tuple[int, float, int, float]  # hidden, lr, epochs, decay


def _sample(bounds: ConfigBounds, rng) -> Genes:
    h = int(rng.integers(bounds.hidden_units[0], bounds.hidden_units[1] + 1))
    lo, hi = bounds.learning_rate
    lr = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    ep = int(rng.integers(bounds.epochs[0], bounds.epochs[1] + 1))
    dc = float(rng.uniform(bounds.context_decay[0], bounds.context_decay[1]))
    return h, lr, ep, dc


def _mutate(genes: Genes, bounds: ConfigBounds, rng) -> Genes:
    fresh = _sample(bounds, rng)
    return tuple(f if rng.random() < MUTATION_RATE else g for g, f in zip(genes, fresh))


def _crossover(a: Genes, b: Genes, rng) -> Genes:
    return tuple(y if rng.random() < CROSSOVER_RATE else x for x, y in zip(a, b))


def _to_config(genes: Genes, seed: int) -> AnnConfig:
    h, lr, ep, dc = genes
    return AnnConfig(
        hidden_units=h, learning_rate=lr, epochs=ep, context_decay=dc,
        init_count=1, seed=seed,
    )


def ga_optimize(
    panel: QuarterlyPanel,
    search_space: ConfigBounds,
    budget: int,
    seed: int,
    target_quarter: str | None = None,
    fitness=None,
) -> AnnConfig:
    """Return the best configuration found within `budget` fitness evaluations.

    The default fitness trains a one-member ensemble on the ten quarters
    preceding target_quarter (the last panel quarter when omitted) and reads
    its validation loss; a custom callable (genes -> loss) may replace it.
    Repeated gene tuples reuse their cached score without spending budget.
    """
    if budget < POPULATION:
        raise ValidationError(f"budget {budget} smaller than population {POPULATION}")

    if fitness is None:
        if panel is None:
            raise ValidationError("panel required when using the default fitness")
        target = target_quarter or panel.quarters[-1]
        t = panel.quarter_pos(target)
        if t < TRAIN_QUARTERS + 1:
            raise ValidationError(f"{target}: not enough history for a training window")
        mats = [
            build_feature_matrix(panel, panel.quarters[q], with_targets=True,
                                 allow_partial_history=True)
            for q in range(t - TRAIN_QUARTERS, t)
        ]

        def fitness(genes: Genes) -> float:
            return ann_train(mats, _to_config(genes, seed)).val_loss

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6A]))
    cache: dict[Genes, float] = {}
    evaluations = 0

    def score(genes: Genes) -> float:
        nonlocal evaluations
        if genes not in cache:
            if evaluations >= budget:
                return np.inf  # budget exhausted: unseen candidates are not scored
            cache[genes] = float(fitness(genes))
            evaluations += 1
        return cache[genes]

    population = [_sample(search_space, rng) for _ in range(POPULATION)]
    best_genes, best_fit = None, np.inf
    generations = min(DEFAULT_GENERATIONS, max(0, (budget - POPULATION) // max(POPULATION - 1, 1)))

    for gen in range(generations + 1):
        fits = [score(g) for g in population]
        for g, f in zip(population, fits):
            if f < best_fit:
                best_genes, best_fit = g, f
        if gen == generations or evaluations >= budget:
            break

        def pick():
            contenders = rng.integers(0, POPULATION, size=TOURNAMENT)
            return population[min(contenders, key=lambda i: fits[i])]

        nxt = [best_genes]  # elitism of one
        while len(nxt) < POPULATION:
            child = _crossover(pick(), pick(), rng)
            nxt.append(_mutate(child, search_space, rng))
        population = nxt

    if best_genes is None:
        raise ValidationError("no configuration evaluated within budget")
    return _to_config(best_genes, seed)
