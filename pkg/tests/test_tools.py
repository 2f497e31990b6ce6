import pytest

from hashchem.bench import BenchReport, TimingStats, benchmark, format_report
from hashchem.cli import main
from hashchem.plot import CsvFormatError, plot_csv, read_figure_csv, render_svg


def test_benchmark_small(capsys):
    report = benchmark(2, iterations=30)
    ns = report.stats["nonspatial"]
    assert len(ns.times) == 2 and ns.extinct_runs == []
    sp = report.stats["spatial"]
    assert len(sp.times) + len(sp.extinct_runs) == 2
    text = format_report(report)
    assert "nonspatial" in text and "iterations per run: 30" in text


def test_speedup_is_ratio_of_means():
    report = BenchReport(10, {"spatial": TimingStats("spatial", [2.0, 4.0]),
                              "nonspatial": TimingStats("nonspatial", [1.0, 1.0])})
    assert report.speedup == 3.0
    report.stats["spatial"] = TimingStats("spatial", [], [0, 1])
    assert report.speedup is None
    assert "excluded (extinct) runs: [0, 1]" in format_report(report)


def test_bench_cli(tmp_path, capsys):
    assert main(["bench", "--runs", "1", "--iterations", "10", "--models", "nonspatial",
                 "--json", str(tmp_path / "b.json")]) == 0
    assert "nonspatial: n=1" in capsys.readouterr().out
    assert (tmp_path / "b.json").exists()


CSV = "t,run_0,run_1,mean\n1,0.5,,0.5\n2,1.5,2.5,2\n10,3,4,3.5\n"


def test_plot_is_deterministic(tmp_path):
    src = tmp_path / "fig2_max_fitness.csv"
    src.write_text(CSV)
    a = plot_csv(src, tmp_path / "a").read_bytes()
    b = plot_csv(src, tmp_path / "b").read_bytes()
    assert a == b
    text = a.decode()
    assert text.count("<path") == 3
    assert 'stroke-width="2.5"' in text and "(log scale)" in text


def test_fig6_uses_linear_axis(tmp_path):
    src = tmp_path / "fig6_individual_types.csv"
    src.write_text(CSV)
    assert "(log scale)" not in render_svg(read_figure_csv(src))


@pytest.mark.parametrize(
    "text",
    ["", "t,run_0,mean\n", "x,mean\n1,2\n", "t,run_0,mean\n1,2\n", "t,run_0,mean\n1,a,2\n",
     "t,run_0,mean\n0,1,1\n", "t,run_0,mean\n1,,\n"],
)
def test_malformed_csv(tmp_path, text):
    src = tmp_path / "bad.csv"
    src.write_text(text)
    with pytest.raises(CsvFormatError):
        plot_csv(src, tmp_path)
    assert main(["plot", "--csv", str(src), "--out", str(tmp_path)]) == 2
