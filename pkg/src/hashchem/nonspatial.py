"""Well-mixed multiset model: a population of multisets under pairwise competition.

Each iteration runs ``floor(n0 / 2)`` pairwise matches (``n0`` frozen at the
start of the iteration), then a mutation sweep over the survivors.

The functions in this module are the readable reference path and accept any
object exposing ``uniform()`` and ``below(n)``. Full-length runs go through a
compiled kernel (``_nskernel``) that consumes the same random draws in the
same order and therefore emits identical event streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

from .core import (
    Multiset,
    Population,
    ReplicationEvent,
    SimConfig,
    StepSummary,
    validate_config,
)
from .fitness import FitnessCache
from .rng import RngStream


class Draws(Protocol):
    def uniform(self) -> float: ...

    def below(self, n: int) -> int: ...


@dataclass(frozen=True)
class MatchOutcome:
    winner_index: int
    loser_index: int
    winner_fitness: float
    loser_fitness: float
    loser_died: bool
    offspring: Multiset | None = None
    offspring_fitness: float | None = None


@dataclass
class MutationStats:
    """Counters for measuring mutation rates; optional argument to mutate_multiset."""

    invocations: int = 0
    elements: int = 0
    point_changes: int = 0
    swaps: int = 0
    deletions: int = 0
    duplications: int = 0
    removals: int = 0


def death_probability(loser_fitness: float, n: int, n_max: int) -> float:
    """Chance that the loser of a match is removed, clamped to [0, 1]."""
    if n >= n_max:
        return 1.0
    p = 1.0 - loser_fitness * (1.0 - n / n_max)
    return min(1.0, max(0.0, p))


def init_population(cfg: SimConfig, rng: Draws) -> Population:
    pop = Population(limit=cfg.hard_bound)
    for _ in range(cfg.init_count):
        pop.append(Multiset((rng.below(cfg.S_max) + 1,)))
    return pop


def mutate_multiset(
    ms: Multiset, cfg: SimConfig, rng: Draws, stats: MutationStats | None = None
) -> Multiset | None:
    """Point changes then optional duplication; ``None`` means the result is empty."""
    out = []
    swaps = deletions = 0
    for e in ms.elements:
        if rng.uniform() < cfg.point_change_prob:
            if rng.uniform() < cfg.swap_fraction:
                out.append(rng.below(cfg.S_max) + 1)
                swaps += 1
            else:
                deletions += 1
        else:
            out.append(e)
    duplicated = rng.uniform() < cfg.duplication_prob
    if duplicated:
        out = out + out
    if stats is not None:
        stats.invocations += 1
        stats.elements += len(ms.elements)
        stats.point_changes += swaps + deletions
        stats.swaps += swaps
        stats.deletions += deletions
        stats.duplications += duplicated
        stats.removals += not out
    if not out:
        return None
    out.sort()
    return Multiset(tuple(out))


def competition_step(
    pop: Population, cfg: SimConfig, rng: Draws, cache: FitnessCache | None = None
) -> MatchOutcome:
    n = len(pop)
    if n < 2:
        raise ValueError(f"competition needs at least 2 multisets, population has {n}")
    if cache is None:
        cache = FitnessCache(cfg.m)
    i = rng.below(n)
    j = rng.below(n - 1)
    if j >= i:
        j += 1
    num_i = cache.numerator(pop[i])
    num_j = cache.numerator(pop[j])
    if num_i > num_j:
        w, l, num_w, num_l = i, j, num_i, num_j
    elif num_j > num_i:
        w, l, num_w, num_l = j, i, num_j, num_i
    elif rng.uniform() < 0.5:
        w, l, num_w, num_l = i, j, num_i, num_j
    else:
        w, l, num_w, num_l = j, i, num_j, num_i

    child: Multiset | None = pop[w]
    if cfg.mutate_on_replicate:
        child = mutate_multiset(child, cfg, rng)
    child_fitness = None
    if child is not None:
        pop.append(child)
        child_fitness = cache(child)

    loser_fitness = num_l / cfg.m
    died = rng.uniform() < death_probability(loser_fitness, len(pop), cfg.n_max)
    if died:
        pop.remove(l)
    return MatchOutcome(w, l, num_w / cfg.m, loser_fitness, died, child, child_fitness)


def iterate(
    pop: Population,
    t: int,
    cfg: SimConfig,
    rng: Draws,
    sink=None,
    cache: FitnessCache | None = None,
    run_id: int = 0,
) -> StepSummary:
    if cache is None:
        cache = FitnessCache(cfg.m)
    matches = len(pop) // 2
    births = deaths = 0
    for _ in range(matches):
        outcome = competition_step(pop, cfg, rng, cache)
        if outcome.offspring is not None:
            births += 1
            if sink is not None:
                sink.event(
                    ReplicationEvent(
                        run_id, t, outcome.offspring.elements, outcome.offspring_fitness
                    )
                )
        deaths += outcome.loser_died

    # descending order: a swap-removal only ever pulls in an already visited member
    mutated = 0
    for i in range(len(pop) - 1, -1, -1):
        if rng.uniform() < cfg.mutation_rate:
            mutated += 1
            result = mutate_multiset(pop[i], cfg, rng)
            if result is None:
                pop.remove(i)
            else:
                pop[i] = result

    summary = StepSummary(t, len(pop), matches, births, deaths, mutated)
    if sink is not None:
        sink.summary(summary)
    return summary


@dataclass
class ReferenceRun:
    """Step-by-step handle on a reference run (used by tests and small demos)."""

    cfg: SimConfig
    run_index: int = 0
    rng: RngStream = field(init=False)
    pop: Population = field(init=False)
    cache: FitnessCache = field(init=False)
    t: int = 0

    def __post_init__(self):
        validate_config(self.cfg)
        self.rng = RngStream(self.cfg.seed, self.run_index)
        self.pop = init_population(self.cfg, self.rng)
        self.cache = FitnessCache(self.cfg.m)

    def step(self, sink=None) -> StepSummary:
        self.t += 1
        return iterate(self.pop, self.t, self.cfg, self.rng, sink, self.cache, self.run_index)


def run(
    cfg: SimConfig, run_index: int = 0, sink=None, backend: str = "compiled"
) -> list[StepSummary]:
    """Run ``cfg.iterations`` iterations, streaming events and summaries to ``sink``.

    ``backend`` is ``"compiled"`` (numba kernel) or ``"python"`` (reference).
    Both produce identical output for the same configuration.
    """
    validate_config(cfg)
    if backend == "python":
        handle = ReferenceRun(cfg, run_index)
        return [handle.step(sink) for _ in range(cfg.iterations)]
    if backend != "compiled":
        raise ValueError(f"unknown backend {backend!r}")
    from ._nskernel import run_compiled

    return run_compiled(cfg, run_index, sink)
