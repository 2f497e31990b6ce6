"""Acceptance criteria, each run at its stated tolerance.

Every test records a single PASS/FAIL line (shown in the terminal summary).
Criteria 5 to 8 share one set of 20 default non-spatial runs: seed 1,
run indices 0..19, which is what ``hashchem batch --runs 20 --seed 1``
produces. The protocol is fixed up front and is not tuned to the outcome.
"""

import math
import time

import numpy as np
import pytest

from hashchem.analysis import RunAccumulator, compare_models, cross_run_mean, fit_growth, neglog_array
from hashchem.bench import benchmark
from hashchem.cli import main
from hashchem.core import Multiset, SimConfig, canonicalize
from hashchem.fitness import fitness, numerator_elements
from hashchem.nonspatial import MutationStats, mutate_multiset, run
from hashchem.rng import RngStream
from hashchem.spatial import (
    DEATH,
    NONE,
    REPLICATION,
    ParticleSystem,
    all_neighbor_counts,
    evaluation_fires,
    group_outcome,
    neighbors,
)

from oracles import fitness_oracle

pytestmark = pytest.mark.slow

RUNS = 20
SEED = 1
FIT_RANGE = (100, 2000)


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.fixture(scope="module")
def default_runs():
    cfg = SimConfig(seed=SEED)
    series = []
    extinct = []
    for r in range(RUNS):
        acc = RunAccumulator(r)
        summaries = run(cfg, r, acc)
        extinct.append(summaries[-1].extinct)
        series.append(acc.result(cfg.iterations))
    return series, extinct


def test_c01_determinism(tmp_path, criterion):
    small = ["--iterations", "100"]
    for sub in ("a", "b"):
        assert main(["run", "--seed", "1", *small, "--out", str(tmp_path / sub)]) == 0
    same_run = _files(tmp_path / "a") == _files(tmp_path / "b")
    batch = ["batch", "--runs", "8", "--seed", "1", "--iterations", "40", "--n-max", "2000"]
    assert main([*batch, "--jobs", "1", "--out", str(tmp_path / "j1")]) == 0
    assert main([*batch, "--jobs", "8", "--out", str(tmp_path / "j8")]) == 0
    j1, j8 = _files(tmp_path / "j1"), _files(tmp_path / "j8")
    same_batch = j1 == j8 and len(j1) == 8
    ok = criterion(1, "determinism of run and batch", same_run and same_batch,
                   f"run identical={same_run}, jobs 1 vs 8 identical={same_batch}")
    assert ok


def test_c02_fitness_oracle(criterion):
    rng = RngStream(2, 0)
    m = 100_000_000
    mismatches = 0
    for _ in range(1000):
        elements = [rng.below(1000) + 1 for _ in range(rng.below(30) + 1)]
        ms = canonicalize(elements)
        expected = fitness_oracle(elements, m)
        buf = np.array(ms.elements, dtype=np.int32)
        if fitness(ms, m) != expected or numerator_elements(buf, 0, len(buf), m) / m != expected:
            mismatches += 1
    ok = criterion(2, "engine fitness equals straight-line FNV-1a oracle", mismatches == 0,
                   f"{mismatches} mismatches in 1000")
    assert ok


def test_c03_mutation_statistics(criterion):
    cfg = SimConfig()
    rng = RngStream(3, 0)
    stats = MutationStats()
    pool = [Multiset(tuple(sorted(rng.below(1000) + 1 for _ in range(10)))) for _ in range(1000)]
    for i in range(1_000_000):
        mutate_multiset(pool[i % 1000], cfg, rng, stats)
    point = stats.point_changes / stats.elements
    swap = stats.swaps / stats.point_changes
    dup = stats.duplications / stats.invocations
    ok = (abs(point - 0.20) <= 0.005 and abs(swap - 0.80) <= 0.01 and abs(dup - 0.20) <= 0.005)
    criterion(3, "mutation rates over 1e6 invocations", ok,
              f"point={point:.5f} swap share={swap:.5f} dup={dup:.5f}")
    assert ok


def test_c04_curve_fitter_exactness(criterion):
    t = np.arange(1, 2001, dtype=float)
    results = []
    for model, a, b in (("unbounded", 1.60238, -6.30145), ("bounded", 57.1218, 12.7686)):
        x = np.log(t) if model == "unbounded" else -1.0 / np.log(np.maximum(t, 2.0))
        fit = fit_growth(a * x + b, FIT_RANGE, model)
        results.append((abs(fit.a - a), abs(fit.b - b), fit.r_squared))
    ok = all(da < 1e-9 and db < 1e-9 and abs(r2 - 1.0) < 1e-12 for da, db, r2 in results)
    detail = "; ".join(f"|da|={da:.1e} |db|={db:.1e} R2={r2:.15f}" for da, db, r2 in results)
    criterion(4, "synthetic growth curves recovered", ok, detail)
    assert ok


def test_c05_carrying_capacity(default_runs, criterion):
    series, extinct = default_runs
    first10 = series[:10]
    pops = np.array([s.population[199:2000] for s in first10])
    mean_pop = float(pops.mean())
    no_extinction = not any(extinct[:10])
    ok = 8000 <= mean_pop <= 10500 and no_extinction
    criterion(5, "population settles near carrying capacity", ok,
              f"mean population t=200..2000 over 10 runs={mean_pop:.1f}, extinct={sum(extinct[:10])}")
    assert ok


def test_c06_fitness_convergence(default_runs, criterion):
    series, _ = default_runs
    mean = neglog_array(cross_run_mean(series, "max_fitness").mean)
    at50, at100, at2000 = mean[49], mean[99], mean[1999]
    ok = at50 >= 2.5 and at2000 > at100
    criterion(6, "max fitness converges and keeps improving", ok,
              f"-log10(1-f): t=50 {at50:.3f}, t=100 {at100:.3f}, t=2000 {at2000:.3f}, runs={len(series)}")
    assert ok


def test_c07_higher_order_takeover(default_runs, criterion):
    series, _ = default_runs
    mean = cross_run_mean(series, "replicated_individuals").mean
    lowest = float(np.min(mean[99:]))
    ok = lowest > 5000
    criterion(7, "replicated individuals exceed 5000 from t=100", ok, f"minimum for t>=100 = {lowest:.1f}")
    assert ok


def test_c08_unbounded_growth_verdict(default_runs, criterion):
    series, _ = default_runs
    parts, ok = [], True
    for key in ("max_size", "mean_size"):
        cmp = compare_models(cross_run_mean(series, key).mean, FIT_RANGE)
        slope = cmp.unbounded.a
        good = cmp.unbounded.aic < cmp.bounded.aic and 0.5 <= slope <= 4.0
        ok &= good
        parts.append(
            f"{key}: AIC unbounded {cmp.unbounded.aic:.1f} vs bounded {cmp.bounded.aic:.1f}, a={slope:.4f}"
        )
    criterion(8, "unbounded growth preferred with slope in [0.5, 4.0]", ok, "; ".join(parts))
    assert ok


def test_c09_spatial_baseline(criterion):
    rng = np.random.default_rng(9)
    grid_ok = True
    for _ in range(200):
        n = int(rng.integers(1, 2001))
        r = float(rng.uniform(0.01, 0.2))
        xs, ys = rng.uniform(size=n), rng.uniform(size=n)
        counts = all_neighbor_counts(xs, ys, r)
        d2 = (xs[:, None] - xs[None, :]) ** 2 + (ys[:, None] - ys[None, :]) ** 2
        grid_ok &= bool(np.array_equal(counts, (d2 <= r * r).sum(axis=1)))
        i = int(rng.integers(0, n))
        grid_ok &= neighbors(i, ParticleSystem(np.ones(n), xs, ys), r) == np.nonzero(d2[i] <= r * r)[0].tolist()
    f, n, d = 0.6, 30, 100
    p_death, p_rep = 1 - f, f * (1 - n / d)
    formula_ok = (
        evaluation_fires(4, 0.2499) and not evaluation_fires(4, 0.25)
        and group_outcome(f, n, d, p_death - 1e-9) == DEATH
        and group_outcome(f, n, d, p_death + 1e-9) == REPLICATION
        and group_outcome(f, n, d, p_death + p_rep - 1e-9) == REPLICATION
        and group_outcome(f, n, d, p_death + p_rep + 1e-9) == NONE
        and all(group_outcome(0.99, dn, d, u) != REPLICATION
                for dn in (100, 101, 500) for u in np.linspace(0, 0.999, 50))
    )
    ok = grid_ok and formula_ok
    criterion(9, "spatial grid search and group probabilities", ok,
              f"grid==brute on 200 instances: {grid_ok}; fixed-draw formulas: {formula_ok}")
    assert ok


def test_c10_benchmark_methodology(criterion):
    start = time.perf_counter()
    report = benchmark(RUNS, seed=SEED, iterations=2000)
    elapsed = time.perf_counter() - start
    sp, ns = report.stats["spatial"], report.stats["nonspatial"]
    ok = (
        len(sp.times) + len(sp.extinct_runs) == RUNS
        and len(ns.times) == RUNS and not ns.extinct_runs
        and report.iterations == 2000
        and (report.speedup is not None or not sp.times)
    )
    speed = "n/a" if report.speedup is None else f"{report.speedup:.2f}x"
    criterion(10, "benchmark reports both models with extinction exclusions", ok,
              f"spatial timed={len(sp.times)} excluded={len(sp.extinct_runs)}; nonspatial timed={len(ns.times)} "
              f"extinct={len(ns.extinct_runs)}; speed-up {speed}; harness {elapsed:.0f}s")
    assert ok


def test_c11_negative_variant_exploratory(default_runs, criterion):
    series, _ = default_runs
    base = fit_growth(cross_run_mean(series, "mean_size").mean, FIT_RANGE).a
    cfg = SimConfig(seed=SEED, mutate_on_replicate=True)
    variant = []
    for r in range(10):
        acc = RunAccumulator(r)
        run(cfg, r, acc)
        variant.append(acc.result(cfg.iterations))
    slope = fit_growth(cross_run_mean(variant, "mean_size").mean, FIT_RANGE).a
    ratio = slope / base if base else math.nan
    # exploratory: the outcome is recorded but does not gate the suite
    criterion(11, "mutate-on-replicate slope below half of default (exploratory)", ratio < 0.5,
              f"variant a={slope:.4f}, default a={base:.4f}, ratio={ratio:.3f}")
