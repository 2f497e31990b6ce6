"""Compiled non-spatial engine.

Mirrors ``nonspatial.iterate`` draw for draw. Multiset contents live in a
shared pool; population slots hold content ids, so a replication is a single
integer copy and fitness is computed once per new content.

A step is resumable: before any draw that may create new content the kernel
checks capacity and, if short, saves its progress and returns ``_GROW`` so
the Python driver can enlarge the arrays and call again.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .core import PopulationOverflow, SimConfig, StepSummary
from .eventlog import ContentStore, EventBatch
from .fitness import numerator_elements
from .rng import RngStream, below, uniform

_DONE = 0
_GROW = 1
_OVERFLOW = 2

# progress slots
P_PHASE = 0  # 0 = matches, 1 = mutation sweep, 2 = finished
P_MATCH = 1  # matches completed
P_SWEEP = 2  # next sweep index (descending)
P_BIRTHS = 3
P_DEATHS = 4
P_MUTATED = 5
P_NEV = 6
P_N = 7
P_POOL = 8  # pool ints in use
P_CONTENTS = 9  # content ids in use
P_MAXLEN = 10  # upper bound on any live content length
P_MATCHES = 11  # matches for this step
_P_SIZE = 12


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
def _mutate(cid, pool, c_off, c_len, c_num, prog, s, tmp, S_max, pcp, swapf, dup, m):
    off = c_off[cid]
    ln = c_len[cid]
    k = 0
    for q in range(ln):
        e = pool[off + q]
        if uniform(s) < pcp:
            if uniform(s) < swapf:
                tmp[k] = below(s, S_max) + 1
                k += 1
        else:
            tmp[k] = e
            k += 1
    if uniform(s) < dup:
        for q in range(k):
            tmp[k + q] = tmp[q]
        k *= 2
    if k == 0:
        return -1
    _sort_small(tmp, k)
    new = prog[P_CONTENTS]
    start = prog[P_POOL]
    for q in range(k):
        pool[start + q] = tmp[q]
    c_off[new] = start
    c_len[new] = k
    c_num[new] = numerator_elements(pool, start, k, m)
    prog[P_CONTENTS] = new + 1
    prog[P_POOL] = start + k
    if k > prog[P_MAXLEN]:
        prog[P_MAXLEN] = k
    return new


@njit(cache=True)
def _room(pool, c_off, tmp, prog):
    need = 2 * prog[P_MAXLEN]
    return (
        prog[P_POOL] + need <= pool.shape[0]
        and prog[P_CONTENTS] + 1 <= c_off.shape[0]
        and need <= tmp.shape[0]
    )


@njit(cache=True)
def step_kernel(
    pop, pool, c_off, c_len, c_num, prog, s, tmp, ev_ids,
    S_max, n_max, hard, m, mutation_rate, pcp, swapf, dup, mor,
):
    n = prog[P_N]
    if prog[P_PHASE] == 0:
        matches = prog[P_MATCHES]
        while prog[P_MATCH] < matches:
            if mor and not _room(pool, c_off, tmp, prog):
                prog[P_N] = n
                return _GROW
            i = below(s, n)
            j = below(s, n - 1)
            if j >= i:
                j += 1
            ni = c_num[pop[i]]
            nj = c_num[pop[j]]
            if ni > nj:
                w = i
                l = j
                nl = nj
            elif nj > ni:
                w = j
                l = i
                nl = ni
            elif uniform(s) < 0.5:
                w = i
                l = j
                nl = nj
            else:
                w = j
                l = i
                nl = ni
            child = pop[w]
            if mor:
                child = _mutate(child, pool, c_off, c_len, c_num, prog, s, tmp, S_max, pcp, swapf, dup, m)
            if child >= 0:
                if n >= hard:
                    prog[P_N] = n
                    return _OVERFLOW
                pop[n] = child
                n += 1
                prog[P_BIRTHS] += 1
                ev_ids[prog[P_NEV]] = child
                prog[P_NEV] += 1
            fl = nl / m
            if n >= n_max:
                p = 1.0
            else:
                p = 1.0 - fl * (1.0 - n / n_max)
                if p > 1.0:
                    p = 1.0
                elif p < 0.0:
                    p = 0.0
            if uniform(s) < p:
                n -= 1
                pop[l] = pop[n]
                prog[P_DEATHS] += 1
            prog[P_MATCH] += 1
        prog[P_PHASE] = 1
        prog[P_SWEEP] = n - 1

    if prog[P_PHASE] == 1:
        while prog[P_SWEEP] >= 0:
            i = prog[P_SWEEP]
            if not _room(pool, c_off, tmp, prog):
                prog[P_N] = n
                return _GROW
            if uniform(s) < mutation_rate:
                prog[P_MUTATED] += 1
                c = _mutate(pop[i], pool, c_off, c_len, c_num, prog, s, tmp, S_max, pcp, swapf, dup, m)
                if c < 0:
                    n -= 1
                    pop[i] = pop[n]
                else:
                    pop[i] = c
            prog[P_SWEEP] = i - 1
        prog[P_PHASE] = 2
    prog[P_N] = n
    return _DONE


@njit(cache=True)
def compact_kernel(pop, n, pool, c_off, c_len, c_num, n_contents):
    """Renumber live contents densely and drop dead ones."""
    new_id = np.full(n_contents, -1, dtype=np.int64)
    new_pool = np.empty_like(pool)
    new_off = np.empty_like(c_off)
    new_len = np.empty_like(c_len)
    new_num = np.empty_like(c_num)
    count = 0
    used = 0
    maxlen = 1
    for i in range(n):
        c = pop[i]
        if new_id[c] < 0:
            new_id[c] = count
            ln = c_len[c]
            o = c_off[c]
            for q in range(ln):
                new_pool[used + q] = pool[o + q]
            new_off[count] = used
            new_len[count] = ln
            new_num[count] = c_num[c]
            used += ln
            if ln > maxlen:
                maxlen = ln
            count += 1
        pop[i] = new_id[c]
    return new_pool, new_off, new_len, new_num, count, used, maxlen


def _grown(arr: np.ndarray, need: int) -> np.ndarray:
    if need <= arr.shape[0]:
        return arr
    size = max(need, 2 * arr.shape[0])
    out = np.empty(size, dtype=arr.dtype)
    out[: arr.shape[0]] = arr
    return out


class CompiledPopulation:
    """Driver-side state of one compiled run."""

    def __init__(self, cfg: SimConfig, rng: RngStream):
        self.cfg = cfg
        self.rng = rng
        hard = cfg.hard_bound
        self.pop = np.empty(hard + 1, dtype=np.int64)
        self.pool = np.empty(1 << 16, dtype=np.int32)
        self.c_off = np.empty(1 << 14, dtype=np.int64)
        self.c_len = np.empty(1 << 14, dtype=np.int32)
        self.c_num = np.empty(1 << 14, dtype=np.int64)
        self.tmp = np.empty(64, dtype=np.int32)
        self.prog = np.zeros(_P_SIZE, dtype=np.int64)
        self.generation = 0
        self.prog[P_MAXLEN] = 1
        for i in range(cfg.init_count):
            self.pool[i] = rng.below(cfg.S_max) + 1
            self.c_off[i] = i
            self.c_len[i] = 1
            self.c_num[i] = numerator_elements(self.pool, i, 1, cfg.m)
            self.pop[i] = i
        self.prog[P_POOL] = cfg.init_count
        self.prog[P_CONTENTS] = cfg.init_count
        self.prog[P_N] = cfg.init_count

    @property
    def n(self) -> int:
        return int(self.prog[P_N])

    def store(self) -> ContentStore:
        return ContentStore(self.pool, self.c_off, self.c_len, self.c_num, self.cfg.m, self.generation)

    def members(self) -> list[tuple[int, ...]]:
        store = self.store()
        return [store.elements(c) for c in self.pop[: self.n].tolist()]

    def _grow(self) -> None:
        prog = self.prog
        need = 2 * int(prog[P_MAXLEN])
        self.pool = _grown(self.pool, int(prog[P_POOL]) + need + 1024)
        ncap = int(prog[P_CONTENTS]) + 1024
        self.c_off = _grown(self.c_off, ncap)
        self.c_len = _grown(self.c_len, ncap)
        self.c_num = _grown(self.c_num, ncap)
        self.tmp = _grown(self.tmp, need + 16)

    def step(self) -> tuple[int, int, int, int, np.ndarray]:
        cfg = self.cfg
        prog = self.prog
        n0 = int(prog[P_N])
        matches = n0 // 2
        for k in (P_PHASE, P_MATCH, P_BIRTHS, P_DEATHS, P_MUTATED, P_NEV):
            prog[k] = 0
        prog[P_MATCHES] = matches
        ev_ids = np.empty(matches, dtype=np.int64)
        while True:
            status = step_kernel(
                self.pop, self.pool, self.c_off, self.c_len, self.c_num, prog,
                self.rng.state, self.tmp, ev_ids,
                cfg.S_max, cfg.n_max, cfg.hard_bound, cfg.m, cfg.mutation_rate,
                cfg.point_change_prob, cfg.swap_fraction, cfg.duplication_prob,
                cfg.mutate_on_replicate,
            )
            if status == _DONE:
                break
            if status == _OVERFLOW:
                raise PopulationOverflow(
                    f"population exceeds hard bound {cfg.hard_bound}"
                )
            self._grow()
        return matches, int(prog[P_BIRTHS]), int(prog[P_DEATHS]), int(prog[P_MUTATED]), ev_ids[: prog[P_NEV]]

    def maybe_compact(self) -> None:
        n = self.n
        contents = int(self.prog[P_CONTENTS])
        if contents < 4 * n + 4096:
            return
        pool, off, lens, nums, count, used, maxlen = compact_kernel(
            self.pop, n, self.pool, self.c_off, self.c_len, self.c_num, contents
        )
        self.pool, self.c_off, self.c_len, self.c_num = pool, off, lens, nums
        self.prog[P_CONTENTS] = count
        self.prog[P_POOL] = used
        self.prog[P_MAXLEN] = maxlen
        self.generation += 1


def run_compiled(cfg: SimConfig, run_index: int, sink) -> list[StepSummary]:
    rng = RngStream(cfg.seed, run_index)
    state = CompiledPopulation(cfg, rng)
    summaries = []
    for t in range(1, cfg.iterations + 1):
        matches, births, deaths, mutated, ids = state.step()
        summary = StepSummary(t, state.n, matches, births, deaths, mutated)
        if sink is not None:
            if len(ids):
                sink.batch(EventBatch(run_index, t, ids, state.store()))
            sink.summary(summary)
        summaries.append(summary)
        state.maybe_compact()
    return summaries
