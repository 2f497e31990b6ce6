"""Wall-clock comparison of the two models with logging disabled."""

from __future__ import annotations

import os
import statistics
import time
from dataclasses import dataclass, field

from .core import SimConfig
from .eventlog import NullSink
from .nonspatial import run
from .spatial import SpatialConfig, run_spatial


@dataclass
class TimingStats:
    model: str
    times: list[float] = field(default_factory=list)
    extinct_runs: list[int] = field(default_factory=list)

    def describe(self) -> dict:
        d = {
            "model": self.model,
            "runs_timed": len(self.times),
            "extinctions": len(self.extinct_runs),
            "extinct_run_indices": self.extinct_runs,
        }
        if self.times:
            d.update(
                min=min(self.times),
                median=statistics.median(self.times),
                mean=statistics.fmean(self.times),
                max=max(self.times),
            )
        return d


@dataclass
class BenchReport:
    iterations: int
    stats: dict[str, TimingStats]

    @property
    def speedup(self) -> float | None:
        """Mean spatial time over mean non-spatial time."""
        sp = self.stats.get("spatial")
        ns = self.stats.get("nonspatial")
        if not sp or not ns or not sp.times or not ns.times:
            return None
        return statistics.fmean(sp.times) / statistics.fmean(ns.times)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "models": {k: v.describe() for k, v in self.stats.items()},
            "speedup": self.speedup,
        }


def pin_single_cpu() -> None:
    """Best effort: keep the benchmark on one core."""
    if hasattr(os, "sched_setaffinity"):
        try:
            cpus = sorted(os.sched_getaffinity(0))
            os.sched_setaffinity(0, {cpus[0]})
        except OSError:
            pass


def _warm_up(ns_cfg: SimConfig, sp_cfg: SpatialConfig) -> None:
    # trigger numba compilation outside the timed region
    run(ns_cfg.replace(iterations=2, n_max=50), 0, NullSink())
    run_spatial(sp_cfg.replace(iterations=2), 0, NullSink())


def benchmark(runs: int, models: tuple[str, ...] = ("spatial", "nonspatial"),
              seed: int = 1, iterations: int = 2000, ns_cfg: SimConfig | None = None,
              sp_cfg: SpatialConfig | None = None, progress=None) -> BenchReport:
    ns_cfg = (ns_cfg or SimConfig()).replace(seed=seed, iterations=iterations)
    sp_cfg = (sp_cfg or SpatialConfig()).replace(seed=seed, iterations=iterations)
    pin_single_cpu()
    _warm_up(ns_cfg, sp_cfg)
    report = BenchReport(iterations, {})
    for model in models:
        stats = TimingStats(model)
        for r in range(runs):
            start = time.perf_counter()
            if model == "spatial":
                summaries = run_spatial(sp_cfg, r, NullSink())
            elif model == "nonspatial":
                summaries = run(ns_cfg, r, NullSink())
            else:
                raise ValueError(f"unknown model {model!r}")
            elapsed = time.perf_counter() - start
            extinct = bool(summaries) and summaries[-1].extinct
            if extinct:
                stats.extinct_runs.append(r)
            else:
                stats.times.append(elapsed)
            if progress is not None:
                progress(model, r, elapsed, extinct)
        report.stats[model] = stats
    return report


def format_report(report: BenchReport) -> str:
    lines = [f"iterations per run: {report.iterations}"]
    for model, stats in report.stats.items():
        d = stats.describe()
        if stats.times:
            lines.append(
                f"{model:>10}: n={d['runs_timed']} min={d['min']:.3f}s median={d['median']:.3f}s "
                f"mean={d['mean']:.3f}s max={d['max']:.3f}s extinct={d['extinctions']}"
            )
        else:
            lines.append(f"{model:>10}: no completed runs, extinct={d['extinctions']}")
        if stats.extinct_runs:
            lines.append(f"{'':>10}  excluded (extinct) runs: {stats.extinct_runs}")
    if report.speedup is not None:
        lines.append(f"speed-up (spatial mean / non-spatial mean): {report.speedup:.2f}x")
    return "\n".join(lines)
