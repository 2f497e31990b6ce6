"""Per-step statistics, cross-run averaging and growth-model fitting.

Series produced here are aligned on time steps ``t = 1..T``; index ``i``
holds step ``t = i + 1`` and undefined entries (steps with no replication)
are NaN.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import ReplicationEvent, StepSummary
from .eventlog import EventBatch, Sink

MODELS = ("bounded", "unbounded")


@dataclass(frozen=True)
class StepAggregate:
    t: int
    max_fitness: float | None
    mean_fitness: float | None
    replicated_individuals: int
    max_size: float | None
    mean_size: float | None
    event_count: int

    @property
    def empty(self) -> bool:
        return self.event_count == 0


def _empty_step(t: int) -> StepAggregate:
    return StepAggregate(t, None, None, 0, None, None, 0)


def _check_sorted(events: Sequence[ReplicationEvent]) -> None:
    for a, b in zip(events, events[1:]):
        if b.t < a.t:
            raise ValueError(f"events not sorted by t ({a.t} then {b.t})")


def aggregate_run(events: Iterable[ReplicationEvent], t_max: int | None = None) -> list[StepAggregate]:
    """One StepAggregate per step ``1..T``; steps without events are empty."""
    events = list(events)
    _check_sorted(events)
    last = events[-1].t if events else 0
    t_max = last if t_max is None else max(t_max, last)
    by_t: dict[int, list[ReplicationEvent]] = {}
    for ev in events:
        by_t.setdefault(ev.t, []).append(ev)
    out = []
    for t in range(1, t_max + 1):
        group = by_t.get(t)
        if not group:
            out.append(_empty_step(t))
            continue
        sizes = [len(ev.multiset) for ev in group]
        fits = [ev.fitness for ev in group]
        out.append(
            StepAggregate(
                t,
                max(fits),
                sum(fits) / len(fits),
                sum(sizes),
                float(max(sizes)),
                sum(sizes) / len(sizes),
                len(group),
            )
        )
    return out


def cumulative_unique_individual_types(events: Iterable[ReplicationEvent], t_max: int | None = None) -> list[int]:
    events = list(events)
    _check_sorted(events)
    return _cumulative(events, t_max, lambda ev: ev.multiset)


def cumulative_unique_multiset_types(events: Iterable[ReplicationEvent], t_max: int | None = None) -> list[int]:
    events = list(events)
    _check_sorted(events)
    return _cumulative(events, t_max, lambda ev: (ev.multiset,))


def _cumulative(events, t_max, keys) -> list[int]:
    last = events[-1].t if events else 0
    t_max = last if t_max is None else max(t_max, last)
    seen: set = set()
    counts = []
    k = 0
    for t in range(1, t_max + 1):
        while k < len(events) and events[k].t == t:
            seen.update(keys(events[k]))
            k += 1
        counts.append(len(seen))
    return counts


def neglog_transform(f: float) -> float:
    """``-log10(1 - f)``: number of leading nines in the fitness."""
    if not 0.0 <= f < 1.0:
        raise ValueError(f"fitness {f} outside [0, 1)")
    return -math.log10(1.0 - f)


def neglog_array(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    finite = values[~np.isnan(values)]
    if np.any((finite < 0.0) | (finite >= 1.0)):
        raise ValueError("fitness values must lie in [0, 1)")
    with np.errstate(invalid="ignore"):
        return -np.log10(1.0 - values)


SERIES_FIELDS = (
    "max_fitness",
    "mean_fitness",
    "replicated_individuals",
    "max_size",
    "mean_size",
    "event_count",
    "population",
    "unique_individual_types",
    "unique_multiset_types",
)


@dataclass
class RunSeries:
    """Column-oriented per-step statistics of one run."""

    run_id: int
    max_fitness: np.ndarray
    mean_fitness: np.ndarray
    replicated_individuals: np.ndarray
    max_size: np.ndarray
    mean_size: np.ndarray
    event_count: np.ndarray
    population: np.ndarray
    unique_individual_types: np.ndarray
    unique_multiset_types: np.ndarray

    @property
    def length(self) -> int:
        return len(self.event_count)

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, self.length + 1)

    def aggregates(self) -> list[StepAggregate]:
        out = []
        for i in range(self.length):
            if self.event_count[i] == 0:
                out.append(_empty_step(i + 1))
            else:
                out.append(
                    StepAggregate(
                        i + 1,
                        float(self.max_fitness[i]),
                        float(self.mean_fitness[i]),
                        int(self.replicated_individuals[i]),
                        float(self.max_size[i]),
                        float(self.mean_size[i]),
                        int(self.event_count[i]),
                    )
                )
        return out


class RunAccumulator(Sink):
    """Sink that reduces a run's event stream to a RunSeries on the fly.

    Works with both per-event delivery (reference engine, log replay) and
    batched delivery from the compiled kernels.
    """

    def __init__(self, run_id: int = 0):
        self.run_id = run_id
        self._rows: dict[int, list] = {}
        self._population: dict[int, int] = {}
        self._types: set[int] = set()
        self._multisets: set[tuple[int, ...]] = set()
        self._known_ids: set[int] = set()
        self._generation = -1
        self._cur_t = 0
        self._cur: list = []

    # per-event path --------------------------------------------------
    def event(self, ev: ReplicationEvent) -> None:
        if ev.t != self._cur_t:
            self._flush()
            if ev.t < self._cur_t:
                raise ValueError(f"events not sorted by t ({self._cur_t} then {ev.t})")
            self._cur_t = ev.t
        self._cur.append((len(ev.multiset), ev.fitness))
        if ev.multiset not in self._multisets:
            self._multisets.add(ev.multiset)
            self._types.update(ev.multiset)

    def _flush(self) -> None:
        if not self._cur:
            return
        sizes = [s for s, _ in self._cur]
        fits = [f for _, f in self._cur]
        self._store_row(
            self._cur_t, max(fits), math.fsum(fits) / len(fits), sum(sizes), max(sizes),
            sum(sizes) / len(sizes), len(sizes),
        )
        self._cur = []

    def _store_row(self, t, max_f, mean_f, total, max_s, mean_s, count) -> None:
        self._rows[t] = [max_f, mean_f, total, max_s, mean_s, count,
                         len(self._types), len(self._multisets)]

    # batched path ----------------------------------------------------
    def batch(self, b: EventBatch) -> None:
        self._flush()
        if len(b) == 0:
            return
        store = b.store
        if store.generation != self._generation:
            self._known_ids.clear()
            self._generation = store.generation
        ids = b.ids
        for c in np.unique(ids).tolist():
            if c not in self._known_ids:
                self._known_ids.add(c)
                ms = store.elements(c)
                if ms not in self._multisets:
                    self._multisets.add(ms)
                    self._types.update(ms)
        sizes = store.lens[ids].astype(np.int64)
        fits = store.nums[ids] / store.m
        total = int(sizes.sum())
        self._cur_t = b.t
        self._store_row(
            b.t, float(fits.max()), math.fsum(fits.tolist()) / len(fits), total,
            int(sizes.max()), total / len(sizes), len(sizes),
        )

    def summary(self, s: StepSummary) -> None:
        self._flush()
        self._population[s.t] = s.population_size

    def result(self, t_max: int | None = None) -> RunSeries:
        self._flush()
        last = max([0, *self._rows.keys(), *self._population.keys()])
        T = last if t_max is None else max(t_max, last)
        cols = np.full((8, T), np.nan)
        cols[2, :] = 0.0
        cols[5, :] = 0.0
        types = multisets = 0.0
        for i in range(T):
            row = self._rows.get(i + 1)
            if row is not None:
                cols[:, i] = row
                types, multisets = row[6], row[7]
            else:
                cols[6, i] = types
                cols[7, i] = multisets
        population = np.array([self._population.get(t, np.nan) for t in range(1, T + 1)], dtype=float)
        return RunSeries(
            self.run_id,
            max_fitness=cols[0],
            mean_fitness=cols[1],
            replicated_individuals=cols[2],
            max_size=cols[3],
            mean_size=cols[4],
            event_count=cols[5].astype(np.int64),
            population=population,
            unique_individual_types=cols[6].astype(np.int64),
            unique_multiset_types=cols[7].astype(np.int64),
        )


def series_from_events(events: Iterable[ReplicationEvent], run_id: int = 0,
                       summaries: Iterable[StepSummary] = (), t_max: int | None = None) -> RunSeries:
    acc = RunAccumulator(run_id)
    for ev in events:
        acc.event(ev)
    for s in summaries:
        acc.summary(s)
    return acc.result(t_max)


@dataclass
class CrossRunMean:
    mean: np.ndarray
    count: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, len(self.mean) + 1)


def _field_values(run, name: str | None) -> np.ndarray:
    if name is None:
        values = run
    elif isinstance(run, RunSeries):
        values = getattr(run, name)
    else:
        values = [getattr(a, name) for a in run]
    return np.array([np.nan if v is None else v for v in values], dtype=float)


def cross_run_mean(runs: Sequence, field_name: str | None = None) -> CrossRunMean:
    """Mean over runs with a defined value at each step; counts recorded per step.

    ``runs`` holds RunSeries, lists of StepAggregate, or plain per-step
    sequences (``field_name=None``). Runs may differ in length.
    """
    if not runs:
        raise ValueError("need at least one run")
    cols = [_field_values(r, field_name) for r in runs]
    T = max(len(c) for c in cols)
    grid = np.full((len(cols), T), np.nan)
    for i, c in enumerate(cols):
        grid[i, : len(c)] = c
    defined = ~np.isnan(grid)
    count = defined.sum(axis=0)
    total = np.where(defined, grid, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return CrossRunMean(mean, count)


# growth models -------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    model: str
    a: float
    b: float
    r_squared: float
    aic: float
    bic: float
    t_range: tuple[int, int]
    n_points: int

    @property
    def r_squared_defined(self) -> bool:
        return not math.isnan(self.r_squared)

    def predict(self, t) -> np.ndarray:
        return self.a * growth_predictor(np.asarray(t, dtype=float), self.model) + self.b

    def to_dict(self) -> dict:
        d = asdict(self)
        d["t_range"] = list(self.t_range)
        for key in ("r_squared", "aic", "bic"):
            if not math.isfinite(d[key]):
                d[key] = None if math.isnan(d[key]) else ("-inf" if d[key] < 0 else "inf")
        return d


def growth_predictor(t: np.ndarray, model: str) -> np.ndarray:
    """Regressor for ``n(t) = a*x(t) + b``: ``-1/ln t`` (bounded) or ``ln t`` (unbounded)."""
    if model == "bounded":
        return -1.0 / np.log(t)
    if model == "unbounded":
        return np.log(t)
    raise ValueError(f"unknown growth model {model!r}")


def information_criteria(rss: float, n: int, k: int = 2) -> tuple[float, float]:
    """Gaussian-likelihood AIC and BIC with ``k`` regression terms plus the variance."""
    if rss <= 0.0:
        return -math.inf, -math.inf
    base = n * math.log(2.0 * math.pi * rss / n) + n
    return base + 2 * (k + 1), base + (k + 1) * math.log(n)


def select_points(series, t_range: tuple[int, int], t=None, log_resample: bool = False):
    y = np.asarray(series, dtype=float)
    t = np.arange(1, len(y) + 1, dtype=float) if t is None else np.asarray(t, dtype=float)
    t_lo, t_hi = t_range
    if t_lo < 2:
        raise ValueError("t_range must start at t >= 2 (log t must be non-zero)")
    keep = (t >= t_lo) & (t <= t_hi) & ~np.isnan(y)
    if log_resample:
        grid = np.unique(np.rint(np.geomspace(t_lo, t_hi, 101)))
        keep &= np.isin(t, grid)
    return t[keep], y[keep]


def fit_growth(series, t_range: tuple[int, int] = (100, 2000), model: str = "unbounded",
               t=None, log_resample: bool = False) -> FitResult:
    """Least-squares fit of a growth model to ``series`` over ``t_range``."""
    tt, y = select_points(series, t_range, t, log_resample)
    n = len(y)
    if n < 3:
        raise ValueError(f"need at least 3 defined points in {t_range}, got {n}")
    x = growth_predictor(tt, model)
    design = np.column_stack([x, np.ones_like(x)])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (a * x + b)
    rss = float(resid @ resid)
    dev = y - y.mean()
    tss = float(dev @ dev)
    r2 = 1.0 - rss / tss if tss > 0.0 else math.nan
    aic, bic = information_criteria(rss, n)
    return FitResult(model, float(a), float(b), r2, aic, bic, (int(t_range[0]), int(t_range[1])), n)


@dataclass(frozen=True)
class ModelComparison:
    bounded: FitResult
    unbounded: FitResult
    verdict: str
    delta_aic: float  # AIC(bounded) - AIC(unbounded); positive favours unbounded
    delta_bic: float

    def to_dict(self) -> dict:
        def num(v):
            return v if math.isfinite(v) else None

        return {
            "bounded": self.bounded.to_dict(),
            "unbounded": self.unbounded.to_dict(),
            "verdict": self.verdict,
            "delta_aic": num(self.delta_aic),
            "delta_bic": num(self.delta_bic),
        }


def compare_models(series, t_range: tuple[int, int] = (100, 2000), t=None,
                   log_resample: bool = False) -> ModelComparison:
    bounded = fit_growth(series, t_range, "bounded", t, log_resample)
    unbounded = fit_growth(series, t_range, "unbounded", t, log_resample)
    verdict = "unbounded" if unbounded.aic < bounded.aic else "bounded"
    with np.errstate(invalid="ignore"):
        d_aic = bounded.aic - unbounded.aic if bounded.aic != unbounded.aic else 0.0
        d_bic = bounded.bic - unbounded.bic if bounded.bic != unbounded.bic else 0.0
    return ModelComparison(bounded, unbounded, verdict, d_aic, d_bic)


# figure tables -------------------------------------------------------------

FIGURES = {
    "fig2_max_fitness": "max_fitness",
    "fig2_mean_fitness": "mean_fitness",
    "fig3_replicated_individuals": "replicated_individuals",
    "fig4_max_size": "max_size",
    "fig4_mean_size": "mean_size",
    "fig6_individual_types": "unique_individual_types",
    "fig6_multiset_types": "unique_multiset_types",
}


def figure_table(runs: Sequence[RunSeries], name: str, transform_first: bool = False):
    """Columns (per-run values, mean) for one figure; fitness panels are neglog-transformed.

    By default the mean of raw fitness is transformed; ``transform_first``
    averages the transformed per-run values instead.
    """
    fld = FIGURES[name]
    T = max(r.length for r in runs)
    cols = []
    for r in runs:
        col = np.full(T, np.nan)
        col[: r.length] = getattr(r, fld)
        cols.append(col)
    is_fitness = fld.endswith("fitness")
    mean = cross_run_mean(cols).mean
    if is_fitness:
        shown = [neglog_array(c) for c in cols]
        mean = cross_run_mean(shown).mean if transform_first else neglog_array(mean)
        cols = shown
    return np.arange(1, T + 1), cols, mean


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else f"{v:.10g}"


def write_figure_csvs(runs: Sequence[RunSeries], out_dir: str | Path,
                      transform_first: bool = False) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name in FIGURES:
        t, cols, mean = figure_table(runs, name, transform_first)
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", *[f"run_{r.run_id}" for r in runs], "mean"])
            for i in range(len(t)):
                w.writerow([int(t[i]), *[_fmt(c[i]) for c in cols], _fmt(mean[i])])
        written[name] = path
    return written


LOW_SAMPLE_RUNS = 10


@dataclass
class FitReport:
    t_range: tuple[int, int]
    n_runs: int
    log_resample: bool
    comparisons: dict[str, ModelComparison] = field(default_factory=dict)

    @property
    def low_sample(self) -> bool:
        return self.n_runs < LOW_SAMPLE_RUNS

    def to_dict(self) -> dict:
        return {
            "t_range": list(self.t_range),
            "n_runs": self.n_runs,
            "low_sample": self.low_sample,
            "log_resample": self.log_resample,
            "series": {k: v.to_dict() for k, v in self.comparisons.items()},
        }


def fit_report(runs: Sequence[RunSeries], t_range: tuple[int, int] = (100, 2000),
               log_resample: bool = False) -> FitReport:
    report = FitReport(t_range, len(runs), log_resample)
    for key in ("max_size", "mean_size"):
        mean = cross_run_mean(runs, key).mean
        report.comparisons[key] = compare_models(mean, t_range, log_resample=log_resample)
    return report


def write_fit_report(report: FitReport, path: str | Path, extra: dict | None = None) -> None:
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
