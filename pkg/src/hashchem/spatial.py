"""Spatial particle model, kept as a behavioural and performance baseline.

Particles live in the unit square with cut-off (clamped) boundaries. Each
iteration:

1. every particle moves by a Gaussian step of width ``move_sigma``;
2. for each particle position recorded after the move, the live particles
   within ``neighbor_radius`` form ``N``; a random subset ``s`` of random size
   ``k`` in ``1..|N|`` is drawn and, with probability ``1/k``, evaluated:
   with probability ``1 - f`` all of ``s`` is deleted, otherwise with
   probability ``f (1 - |N|/d_max)`` a jittered copy of ``s`` is added
   (one uniform draw partitions the two outcomes);
3. each particle is re-typed with probability ``point_mutation_prob``;
4. the particle order is shuffled.

Neighbour search uses a uniform bucket grid whose cells are at least one
radius wide, so a query scans the 3x3 block around the query cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .core import SimConfig, StepSummary, validate_config
from .eventlog import ContentStore, EventBatch
from .fitness import numerator_elements
from .rng import RngStream, below, normal, uniform

NONE, DEATH, REPLICATION = 0, 1, 2


@dataclass
class SpatialConfig(SimConfig):
    d_max: int = 100
    neighbor_radius: float = 0.05
    move_sigma: float = 0.01
    point_mutation_prob: float = 0.001
    m_spatial: int = 100_000


@dataclass(frozen=True)
class Particle:
    ptype: int
    x: float
    y: float


# grid ----------------------------------------------------------------------


@njit(cache=True)
def grid_cells(radius):
    nc = int(1.0 / radius)
    return nc if nc >= 1 else 1


@njit(cache=True)
def _cell(v, nc):
    c = int(v * nc)
    if c >= nc:
        c = nc - 1
    elif c < 0:
        c = 0
    return c


@njit(cache=True)
def grid_push(i, x, y, nc, head, nxt):
    c = _cell(y, nc) * nc + _cell(x, nc)
    nxt[i] = head[c]
    head[c] = i


@njit(cache=True)
def grid_build(xs, ys, alive, n, nc, head, nxt):
    head[:] = -1
    for i in range(n):
        if alive[i]:
            grid_push(i, xs[i], ys[i], nc, head, nxt)


@njit(cache=True)
def grid_query(qx, qy, radius, xs, ys, alive, nc, head, nxt, out):
    """Write indices of live particles within ``radius`` (inclusive) into ``out``."""
    r2 = radius * radius
    cx = _cell(qx, nc)
    cy = _cell(qy, nc)
    count = 0
    for gy in range(max(cy - 1, 0), min(cy + 2, nc)):
        for gx in range(max(cx - 1, 0), min(cx + 2, nc)):
            j = head[gy * nc + gx]
            while j >= 0:
                if alive[j]:
                    dx = xs[j] - qx
                    dy = ys[j] - qy
                    if dx * dx + dy * dy <= r2:
                        out[count] = j
                        count += 1
                j = nxt[j]
    return count


@njit(cache=True)
def all_neighbor_counts(xs, ys, radius):
    """Neighbour count of every particle (self included), via the grid."""
    n = xs.shape[0]
    nc = grid_cells(radius)
    head = np.empty(nc * nc, dtype=np.int64)
    nxt = np.empty(n, dtype=np.int64)
    alive = np.ones(n, dtype=np.bool_)
    grid_build(xs, ys, alive, n, nc, head, nxt)
    out = np.empty(n, dtype=np.int64)
    counts = np.empty(n, dtype=np.int64)
    for i in range(n):
        counts[i] = grid_query(xs[i], ys[i], radius, xs, ys, alive, nc, head, nxt, out)
    return counts


# group decision ------------------------------------------------------------


@njit(cache=True)
def evaluation_fires(k, u):
    return u < 1.0 / k


@njit(cache=True)
def group_outcome(f, n_neighbors, d_max, u):
    """Fate of an evaluated group from one uniform draw ``u``.

    ``[0, 1-f)`` is death; the next ``max(0, f (1 - |N|/d_max))`` is replication.
    """
    p_death = 1.0 - f
    if u < p_death:
        return DEATH
    if u < p_death + f * (1.0 - n_neighbors / d_max):
        return REPLICATION
    return NONE


# kernel --------------------------------------------------------------------


@njit(cache=True)
def _clamp01(v):
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


@njit(cache=True)
def move_kernel(xs, ys, n, sigma, s):
    for i in range(n):
        xs[i] = _clamp01(xs[i] + sigma * normal(s))
        ys[i] = _clamp01(ys[i] + sigma * normal(s))


@njit(cache=True)
def _grow(a, need):
    if need <= a.shape[0]:
        return a
    out = np.empty(max(need, 2 * a.shape[0]), dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True)
def _sort_small(a, k):
    for i in range(1, k):
        v = a[i]
        j = i - 1
        while j >= 0 and a[j] > v:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = v


@njit(cache=True)
def spatial_step_kernel(types_in, xs_in, ys_in, n, s, S_max, d_max, radius, sigma, pmut, m):
    cap = 2 * n + 64
    types = np.empty(cap, dtype=np.int32)
    xs = np.empty(cap, dtype=np.float64)
    ys = np.empty(cap, dtype=np.float64)
    alive = np.ones(cap, dtype=np.bool_)
    types[:n] = types_in[:n]
    xs[:n] = xs_in[:n]
    ys[:n] = ys_in[:n]

    move_kernel(xs, ys, n, sigma, s)

    fx = xs[:n].copy()
    fy = ys[:n].copy()
    nc = grid_cells(radius)
    head = np.empty(nc * nc, dtype=np.int64)
    nxt = np.empty(cap, dtype=np.int64)
    grid_build(xs, ys, alive, n, nc, head, nxt)
    nbuf = np.empty(cap, dtype=np.int64)
    tmp = np.empty(cap, dtype=np.int32)

    ev_pool = np.empty(1024, dtype=np.int32)
    ev_off = np.empty(64, dtype=np.int64)
    ev_len = np.empty(64, dtype=np.int32)
    ev_num = np.empty(64, dtype=np.int64)
    n_ev = 0
    ev_used = 0

    size = n
    evaluated = 0
    births = 0
    deaths = 0
    added = 0
    removed = 0
    for focal in range(n):
        cnt = grid_query(fx[focal], fy[focal], radius, xs, ys, alive, nc, head, nxt, nbuf)
        if cnt == 0:
            continue
        k = below(s, cnt) + 1
        for q in range(k):
            r = q + below(s, cnt - q)
            tmpi = nbuf[q]
            nbuf[q] = nbuf[r]
            nbuf[r] = tmpi
        if not evaluation_fires(k, uniform(s)):
            continue
        evaluated += 1
        for q in range(k):
            tmp[q] = types[nbuf[q]]
        _sort_small(tmp, k)
        num = numerator_elements(tmp, 0, k, m)
        f = num / m
        outcome = group_outcome(f, cnt, d_max, uniform(s))
        if outcome == DEATH:
            for q in range(k):
                alive[nbuf[q]] = False
            deaths += 1
            removed += k
        elif outcome == REPLICATION:
            if size + k > types.shape[0]:
                need = size + k
                types = _grow(types, need)
                xs = _grow(xs, need)
                ys = _grow(ys, need)
                alive = _grow(alive, need)
                nxt = _grow(nxt, need)
                nbuf = _grow(nbuf, need)
                tmp = _grow(tmp, need)
            for q in range(k):
                src = nbuf[q]
                types[size] = types[src]
                xs[size] = _clamp01(xs[src] + sigma * normal(s))
                ys[size] = _clamp01(ys[src] + sigma * normal(s))
                alive[size] = True
                grid_push(size, xs[size], ys[size], nc, head, nxt)
                size += 1
            births += 1
            added += k
            ev_pool = _grow(ev_pool, ev_used + k)
            if n_ev + 1 > ev_off.shape[0]:
                ev_off = _grow(ev_off, n_ev + 1)
                ev_len = _grow(ev_len, n_ev + 1)
                ev_num = _grow(ev_num, n_ev + 1)
            for q in range(k):
                ev_pool[ev_used + q] = tmp[q]
            ev_off[n_ev] = ev_used
            ev_len[n_ev] = k
            ev_num[n_ev] = num
            ev_used += k
            n_ev += 1

    live = 0
    for i in range(size):
        if alive[i]:
            types[live] = types[i]
            xs[live] = xs[i]
            ys[live] = ys[i]
            live += 1

    mutated = 0
    for i in range(live):
        if uniform(s) < pmut:
            types[i] = below(s, S_max) + 1
            mutated += 1

    for i in range(live - 1, 0, -1):
        j = below(s, i + 1)
        tt = types[i]
        types[i] = types[j]
        types[j] = tt
        tx = xs[i]
        xs[i] = xs[j]
        xs[j] = tx
        ty = ys[i]
        ys[i] = ys[j]
        ys[j] = ty

    counts = np.array([evaluated, births, deaths, mutated, added, removed], dtype=np.int64)
    return (
        types[:live].copy(), xs[:live].copy(), ys[:live].copy(), counts,
        ev_pool, ev_off[:n_ev].copy(), ev_len[:n_ev].copy(), ev_num[:n_ev].copy(),
    )


# Python surface ------------------------------------------------------------


class ParticleSystem:
    """Particle state as parallel arrays (type, x, y)."""

    def __init__(self, types, xs, ys):
        self.types = np.ascontiguousarray(types, dtype=np.int32)
        self.xs = np.ascontiguousarray(xs, dtype=np.float64)
        self.ys = np.ascontiguousarray(ys, dtype=np.float64)
        self.last_counts: dict[str, int] = {}

    @classmethod
    def from_particles(cls, particles: Sequence[Particle]) -> "ParticleSystem":
        return cls(
            [p.ptype for p in particles], [p.x for p in particles], [p.y for p in particles]
        )

    @property
    def n(self) -> int:
        return len(self.types)

    def __len__(self) -> int:
        return len(self.types)

    def particles(self) -> list[Particle]:
        return [
            Particle(int(t), float(x), float(y))
            for t, x, y in zip(self.types, self.xs, self.ys)
        ]


def _as_system(particles) -> ParticleSystem:
    if isinstance(particles, ParticleSystem):
        return particles
    return ParticleSystem.from_particles(list(particles))


def init_particles(cfg: SpatialConfig, rng: RngStream) -> ParticleSystem:
    types, xs, ys = [], [], []
    for _ in range(cfg.init_count):
        types.append(rng.below(cfg.S_max) + 1)
        xs.append(rng.uniform())
        ys.append(rng.uniform())
    return ParticleSystem(types, xs, ys)


def move_particles(particles, cfg: SpatialConfig, rng: RngStream) -> ParticleSystem:
    """Gaussian jitter of every coordinate, clamped to the unit square (returns a copy)."""
    system = _as_system(particles)
    xs = system.xs.copy()
    ys = system.ys.copy()
    move_kernel(xs, ys, len(xs), cfg.move_sigma, rng.state)
    return ParticleSystem(system.types.copy(), xs, ys)


def neighbors(p, particles, radius: float) -> list[int]:
    """Indices of particles within ``radius`` of ``p`` (a Particle or an index)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    system = _as_system(particles)
    if isinstance(p, Particle):
        qx, qy = p.x, p.y
    else:
        qx, qy = float(system.xs[p]), float(system.ys[p])
    n = system.n
    nc = grid_cells(radius)
    head = np.empty(nc * nc, dtype=np.int64)
    nxt = np.empty(max(n, 1), dtype=np.int64)
    alive = np.ones(max(n, 1), dtype=np.bool_)
    grid_build(system.xs, system.ys, alive, n, nc, head, nxt)
    out = np.empty(max(n, 1), dtype=np.int64)
    count = grid_query(qx, qy, radius, system.xs, system.ys, alive, nc, head, nxt, out)
    return sorted(out[:count].tolist())


def spatial_iteration(system: ParticleSystem, t: int, cfg: SpatialConfig, rng: RngStream,
                      sink=None, run_id: int = 0) -> StepSummary:
    """Advance ``system`` in place by one iteration."""
    types, xs, ys, counts, ev_pool, ev_off, ev_len, ev_num = spatial_step_kernel(
        system.types, system.xs, system.ys, system.n, rng.state,
        cfg.S_max, cfg.d_max, cfg.neighbor_radius, cfg.move_sigma,
        cfg.point_mutation_prob, cfg.m_spatial,
    )
    system.types, system.xs, system.ys = types, xs, ys
    evaluated, births, deaths, mutated, added, removed = (int(c) for c in counts)
    system.last_counts = {
        "evaluated": evaluated, "births": births, "deaths": deaths,
        "mutated": mutated, "added": added, "removed": removed,
    }
    summary = StepSummary(t, system.n, evaluated, births, deaths, mutated)
    if sink is not None:
        if births:
            store = ContentStore(ev_pool, ev_off, ev_len, ev_num, cfg.m_spatial, generation=t)
            sink.batch(EventBatch(run_id, t, np.arange(births, dtype=np.int64), store))
        sink.summary(summary)
    return summary


def validate_spatial(cfg: SpatialConfig) -> SpatialConfig:
    return validate_config(cfg)


def run_spatial(cfg: SpatialConfig, run_index: int = 0, sink=None) -> list[StepSummary]:
    """Full run; stops early when every particle is gone (last summary has n = 0)."""
    validate_spatial(cfg)
    rng = RngStream(cfg.seed, run_index)
    system = init_particles(cfg, rng)
    summaries = []
    for t in range(1, cfg.iterations + 1):
        summary = spatial_iteration(system, t, cfg, rng, sink, run_index)
        summaries.append(summary)
        if summary.extinct:
            break
    return summaries
