"""Command-line interface: run, batch, bench, analyze, plot.

Exit codes: 0 success, 1 run failure inside a batch, 2 invalid input
(config, missing logs, malformed CSV), 3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .core import (
    ConfigError,
    ReplicationEvent,
    SimConfig,
    StepSummary,
    ValidationError,
    config_from_mapping,
    read_config_file,
    validate_config,
)
from .eventlog import LogFormatError, LogWriter, log_path, read_log

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_IO = 3

MODELS = ("nonspatial", "spatial")


def _config_class(model: str):
    if model == "spatial":
        from .spatial import SpatialConfig

        return SpatialConfig
    return SimConfig


def _default_out() -> str:
    return os.environ.get("HASHCHEM_OUT", ".")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    from .spatial import SpatialConfig

    group = p.add_argument_group("config overrides (any configuration field)")
    for f in dataclasses.fields(SpatialConfig):
        if f.name in ("seed", "iterations"):
            continue
        group.add_argument(_flag(f.name), dest=f"cfg_{f.name}", metavar=f.name.upper(), default=None)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=MODELS, default="nonspatial")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory (default: $HASHCHEM_OUT or .)")
    p.add_argument("--config", default=None, help="flat key = value file or JSON object")
    p.add_argument("--gzip", action="store_true", help="write .jsonl.gz logs")
    _add_config_flags(p)


def build_config(args: argparse.Namespace):
    """Defaults, then the config file, then explicit flags."""
    cls = _config_class(args.model)
    cfg = cls()
    if args.config:
        cfg = config_from_mapping(cls, read_config_file(args.config), cfg)
    overrides = {}
    allowed = {f.name for f in dataclasses.fields(cls)}
    for key, value in vars(args).items():
        if key.startswith("cfg_") and value is not None:
            name = key[4:]
            if name not in allowed:
                raise ConfigError(name, f"not a parameter of the {args.model} model")
            overrides[name] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    cfg = config_from_mapping(cls, overrides, cfg)
    return validate_config(cfg)


def simulate(model: str, cfg: SimConfig, run_index: int, sink) -> list[StepSummary]:
    if model == "spatial":
        from .spatial import run_spatial

        return run_spatial(cfg, run_index, sink)
    from .nonspatial import run

    return run(cfg, run_index, sink)


def run_to_log(model: str, cfg: SimConfig, run_index: int, out_dir: str | Path, compress: bool = False):
    """Simulate one run into its log file; returns (path, final summary or None)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = log_path(out_dir, model, cfg.seed, run_index, compress)
    with LogWriter(path, model, cfg.seed, run_index, cfg.to_dict()) as writer:
        summaries = simulate(model, cfg, run_index, writer)
    return path, (summaries[-1] if summaries else None)


def _describe(summary: StepSummary | None) -> str:
    if summary is None:
        return "no iterations"
    return (
        f"t={summary.t} population={summary.population_size} matches={summary.matches} "
        f"births={summary.births} deaths={summary.deaths} mutated={summary.mutated_multisets}"
    )


def _replay_args(args: argparse.Namespace) -> tuple[str, SimConfig, int]:
    header = next(iter(read_log(args.replay)))
    model = header.get("model")
    if model not in MODELS:
        raise ConfigError("model", f"unknown model {model!r} in header")
    cfg = config_from_mapping(_config_class(model), header.get("config", {}))
    return model, validate_config(cfg), int(header["run_id"])


def cmd_run(args: argparse.Namespace) -> int:
    if args.replay:
        model, cfg, run_index = _replay_args(args)
    else:
        model, cfg, run_index = args.model, build_config(args), args.run_index
    path, last = run_to_log(model, cfg, run_index, args.out or _default_out(), args.gzip)
    print(f"{path}: {_describe(last)}")
    return EXIT_OK


def _batch_worker(job: tuple) -> tuple[int, str | None, str | None, str | None]:
    model, cfg, run_index, out_dir, compress = job
    try:
        path, last = run_to_log(model, cfg, run_index, out_dir, compress)
    except Exception as exc:  # reported per run; other runs continue
        return run_index, None, None, f"{type(exc).__name__}: {exc}"
    return run_index, str(path), _describe(last), None


def cmd_batch(args: argparse.Namespace) -> int:
    if args.runs < 1:
        raise ConfigError("runs", "must be >= 1")
    if args.jobs < 1:
        raise ConfigError("jobs", "must be >= 1")
    cfg = build_config(args)
    out = args.out or _default_out()
    Path(out).mkdir(parents=True, exist_ok=True)
    jobs = [(args.model, cfg, r, out, args.gzip) for r in range(args.runs)]
    if args.jobs == 1:
        results = map(_batch_worker, jobs)
        failures = _report_batch(results)
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            failures = _report_batch(pool.map(_batch_worker, jobs))
    if failures:
        print(f"{failures} of {args.runs} runs failed; completed logs kept", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def _report_batch(results) -> int:
    failures = 0
    for run_index, path, described, error in results:
        if error:
            failures += 1
            print(f"run {run_index}: FAILED {error}", file=sys.stderr)
        else:
            print(f"{path}: {described}")
    return failures


def cmd_bench(args: argparse.Namespace) -> int:
    from .bench import benchmark, format_report

    models = MODELS if args.models == "both" else (args.models,)
    report = benchmark(args.runs, models=tuple(reversed(models)), seed=args.seed, iterations=args.iterations)
    print(format_report(report))
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError("fit-range", f"expected LO:HI, got {text!r}") from None
    if not 1 <= lo < hi:
        raise ConfigError("fit-range", f"need 1 <= LO < HI, got {text!r}")
    return lo, hi


def load_series(path: str | Path):
    """Replay one log into a RunSeries; returns (header, series)."""
    from .analysis import RunAccumulator

    records = read_log(path)
    header = next(records)
    acc = RunAccumulator(int(header["run_id"]))
    for rec in records:
        if isinstance(rec, ReplicationEvent):
            acc.event(rec)
        else:
            acc.summary(rec)
    t_max = header.get("config", {}).get("iterations")
    return header, acc.result(t_max)


def cmd_analyze(args: argparse.Namespace) -> int:
    from .analysis import fit_report, write_figure_csvs, write_fit_report

    t_range = _parse_range(args.fit_range)
    paths = sorted({p for pattern in args.logs for p in glob.glob(pattern)})
    if not paths:
        print("no logs matched", file=sys.stderr)
        return EXIT_INVALID
    runs, errors, models = [], [], set()
    for p in paths:
        try:
            header, series = load_series(p)
        except LogFormatError as exc:
            errors.append({"file": p, "error": str(exc)})
            print(f"{p}: {exc}", file=sys.stderr)
            continue
        except (StopIteration, KeyError):
            errors.append({"file": p, "error": "missing header"})
            print(f"{p}: missing header", file=sys.stderr)
            continue
        models.add(header.get("model"))
        runs.append(series)
    if not runs:
        print("no parseable logs", file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out or _default_out())
    written = write_figure_csvs(runs, out, transform_first=args.transform_first)
    report = fit_report(runs, t_range, log_resample=args.log_resample)
    extra = {"models": sorted(m for m in models if m), "files": paths, "parse_errors": errors}
    write_fit_report(report, out / "fit_report.json", extra)
    for name in written:
        print(f"wrote {written[name]}")
    print(f"wrote {out / 'fit_report.json'} ({len(runs)} runs{', low sample' if report.low_sample else ''})")
    for key, cmp in report.comparisons.items():
        print(
            f"{key}: verdict={cmp.verdict} dAIC={cmp.delta_aic:.3f} "
            f"unbounded a={cmp.unbounded.a:.5g} b={cmp.unbounded.b:.5g}"
        )
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    from .plot import CsvFormatError, plot_csv

    paths = sorted({p for pattern in args.csv for p in (glob.glob(pattern) or [pattern])})
    out = args.out or _default_out()
    status = EXIT_OK
    for p in paths:
        try:
            target = plot_csv(p, out)
        except CsvFormatError as exc:
            print(f"{p}: {exc}", file=sys.stderr)
            status = EXIT_INVALID
            continue
        print(f"wrote {target}")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hashchem", description="Seeded multiset evolution simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one simulation run to a JSON Lines log")
    _add_run_flags(p)
    p.add_argument("--run-index", type=int, default=0)
    p.add_argument("--replay", metavar="LOG", help="rerun exactly the run recorded in LOG's header")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="runs 0..N-1 of one seed")
    _add_run_flags(p)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("bench", help="wall-clock comparison with logging disabled")
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--models", choices=("both", *MODELS), default="both")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--json", default=None, help="also write the report as JSON")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("analyze", help="figure CSVs and growth-model fits from logs")
    p.add_argument("--logs", nargs="+", required=True, help="glob pattern(s)")
    p.add_argument("--out", default=None)
    p.add_argument("--fit-range", default="100:2000")
    p.add_argument("--log-resample", action="store_true", help="fit on 101 log-spaced points")
    p.add_argument("--transform-first", action="store_true", help="average transformed fitness")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plot", help="SVG line chart per figure CSV")
    p.add_argument("--csv", nargs="+", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except LogFormatError as exc:
        print(f"bad log: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
