import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hashchem.analysis import (
    FIGURES,
    RunAccumulator,
    aggregate_run,
    compare_models,
    cross_run_mean,
    cumulative_unique_individual_types,
    cumulative_unique_multiset_types,
    figure_table,
    fit_growth,
    fit_report,
    information_criteria,
    neglog_transform,
    select_points,
    series_from_events,
    write_figure_csvs,
    write_fit_report,
)
from hashchem.core import ReplicationEvent, SimConfig
from hashchem.eventlog import ListSink
from hashchem.nonspatial import run

from oracles import fit_line


def ev(t, ms, f):
    return ReplicationEvent(0, t, tuple(ms), f)


EVENTS = [ev(1, [1], 0.5), ev(1, [1, 2, 3], 0.9), ev(3, [2, 2], 0.7)]


def test_aggregate_run_example():
    agg = aggregate_run(EVENTS)
    assert len(agg) == 3
    a1 = agg[0]
    assert (a1.max_fitness, a1.mean_fitness, a1.replicated_individuals) == (0.9, pytest.approx(0.7), 4)
    assert (a1.max_size, a1.mean_size, a1.event_count) == (3, 2.0, 2)
    assert agg[1].empty and agg[1].max_fitness is None and agg[1].replicated_individuals == 0
    assert agg[2].mean_size == 2.0


def test_aggregate_rejects_unsorted():
    with pytest.raises(ValueError):
        aggregate_run(list(reversed(EVENTS)))


def test_cumulative_diversity():
    assert cumulative_unique_individual_types(EVENTS, t_max=4) == [3, 3, 3, 3]
    assert cumulative_unique_multiset_types(EVENTS, t_max=4) == [2, 2, 3, 3]


def test_neglog():
    assert neglog_transform(0.999) == pytest.approx(3.0)
    assert neglog_transform(0.0) == 0.0
    with pytest.raises(ValueError):
        neglog_transform(1.0)


def test_accumulator_matches_simple_aggregation():
    cfg = SimConfig(n_max=200, iterations=50, mutate_on_replicate=True, seed=4)
    sink = ListSink()
    run(cfg, 0, sink)
    expected = aggregate_run(sink.events, t_max=50)

    batched = RunAccumulator()
    run(cfg, 0, batched)
    series = batched.result(50)
    per_event = series_from_events(sink.events, summaries=sink.summaries, t_max=50)
    for s in (series, per_event):
        got = s.aggregates()
        for a, b in zip(got, expected):
            assert a.t == b.t and a.event_count == b.event_count
            assert a.replicated_individuals == b.replicated_individuals
            if not b.empty:
                assert a.max_fitness == b.max_fitness
                assert a.mean_fitness == pytest.approx(b.mean_fitness, rel=1e-12)
                assert a.mean_size == pytest.approx(b.mean_size, rel=1e-12)
                assert a.max_size == b.max_size
    assert list(series.unique_individual_types) == cumulative_unique_individual_types(sink.events, 50)
    assert list(series.unique_multiset_types) == cumulative_unique_multiset_types(sink.events, 50)
    assert list(per_event.unique_multiset_types) == list(series.unique_multiset_types)
    assert list(series.population) == [s.population_size for s in sink.summaries]


def test_cross_run_mean_skips_undefined():
    res = cross_run_mean([[1.0, np.nan, 3.0], [3.0, np.nan], [np.nan, 4.0, 5.0]])
    assert res.mean[0] == 2.0 and res.mean[1] == 4.0 and res.mean[2] == 4.0
    assert list(res.count) == [2, 1, 2]
    assert np.isnan(cross_run_mean([[np.nan]]).mean[0])
    with pytest.raises(ValueError):
        cross_run_mean([])


def test_cross_run_mean_of_aggregates():
    agg = aggregate_run(EVENTS)
    res = cross_run_mean([agg, agg], "max_fitness")
    assert res.mean[0] == 0.9 and np.isnan(res.mean[1])


@pytest.mark.parametrize("model, a, b", [("unbounded", 1.60238, -6.30145), ("bounded", 57.1218, 12.7686)])
def test_fit_recovers_exact_parameters(model, a, b):
    t = np.arange(1, 2001, dtype=float)
    x = np.log(t) if model == "unbounded" else -1.0 / np.log(np.maximum(t, 2))
    series = a * x + b
    fit = fit_growth(series, (100, 2000), model)
    assert abs(fit.a - a) < 1e-9 and abs(fit.b - b) < 1e-9
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.n_points == 1901


@given(st.integers(0, 2**32))
@settings(max_examples=20, deadline=None)
def test_fit_agrees_with_normal_equation_oracle(seed):
    rng = np.random.default_rng(seed)
    t = np.arange(1, 401, dtype=float)
    y = 0.3 * np.log(t) + 2.0 + rng.normal(0, 0.2, len(t))
    for model in ("bounded", "unbounded"):
        fit = fit_growth(y, (50, 400), model)
        tt = np.arange(50, 401, dtype=float)
        x = (np.log(tt) if model == "unbounded" else -1.0 / np.log(tt)).tolist()
        a, b, rss, tss = fit_line(x, y[49:].tolist())
        assert fit.a == pytest.approx(a, rel=1e-9, abs=1e-9)
        assert fit.b == pytest.approx(b, rel=1e-9, abs=1e-9)
        assert fit.r_squared == pytest.approx(1 - rss / tss, abs=1e-9)
        n = len(x)
        aic = n * math.log(2 * math.pi * rss / n) + n + 6
        assert fit.aic == pytest.approx(aic, rel=1e-9)
        assert fit.bic == pytest.approx(aic - 6 + 3 * math.log(n), rel=1e-9)


def test_information_criteria_difference():
    aic, bic = information_criteria(10.0, 1901)
    # BIC - AIC = 3 (ln N - 2) for three estimated parameters
    assert bic - aic == pytest.approx(3 * (math.log(1901) - 2))
    assert information_criteria(0.0, 10) == (-math.inf, -math.inf)


def test_constant_series_has_undefined_r_squared():
    fit = fit_growth(np.full(300, 4.0), (100, 300))
    assert math.isnan(fit.r_squared) and not fit.r_squared_defined
    assert fit.a == pytest.approx(0.0, abs=1e-12)
    assert json.loads(json.dumps(fit.to_dict()))["r_squared"] is None


def test_select_points_and_log_resample():
    y = np.arange(1, 2001, dtype=float)
    y[149] = np.nan
    t, v = select_points(y, (100, 2000))
    assert len(t) == 1900 and 150 not in t
    t2, _ = select_points(y, (100, 2000), log_resample=True)
    assert 95 <= len(t2) <= 101 and t2[0] == 100 and t2[-1] == 2000
    with pytest.raises(ValueError):
        select_points(y, (1, 10))
    with pytest.raises(ValueError):
        fit_growth(np.full(5, np.nan), (2, 5))


def test_model_comparison_prefers_generating_model():
    t = np.arange(1, 2001, dtype=float)
    noise = np.random.default_rng(0).normal(0, 0.01, len(t))
    up = compare_models(1.5 * np.log(t) - 6 + noise)
    assert up.verdict == "unbounded" and up.delta_aic > 0
    down = compare_models(-50 / np.log(np.maximum(t, 2)) + 12 + noise)
    assert down.verdict == "bounded" and down.delta_aic < 0


def _tiny_runs():
    runs = []
    for r in range(3):
        acc = RunAccumulator(r)
        run(SimConfig(n_max=100, iterations=30), r, acc)
        runs.append(acc.result(30))
    return runs


def test_figure_csvs_and_fit_report(tmp_path):
    runs = _tiny_runs()
    written = write_figure_csvs(runs, tmp_path)
    assert set(written) == set(FIGURES)
    with open(written["fig4_mean_size"]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "run_0", "run_1", "run_2", "mean"]
    assert len(rows) == 31
    t, cols, mean = figure_table(runs, "fig2_max_fitness")
    assert len(t) == 30 and len(cols) == 3
    raw = np.array([r.max_fitness for r in runs])
    assert np.allclose(cols, -np.log10(1 - raw), equal_nan=True)
    assert np.allclose(mean, -np.log10(1 - np.nanmean(raw, axis=0)), equal_nan=True)
    _, _, mean_first = figure_table(runs, "fig2_max_fitness", transform_first=True)
    assert np.allclose(mean_first, np.nanmean(-np.log10(1 - raw), axis=0), equal_nan=True)
    report = fit_report(runs, (5, 30))
    assert report.low_sample
    write_fit_report(report, tmp_path / "fit.json", {"note": 1})
    doc = json.loads((tmp_path / "fit.json").read_text())
    assert set(doc["series"]) == {"max_size", "mean_size"}
    assert doc["series"]["max_size"]["verdict"] in ("bounded", "unbounded")
    assert doc["note"] == 1
