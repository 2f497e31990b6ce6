"""JSON Lines persistence of replication events and step summaries.

Layout of a log file (one JSON object per line, no whitespace)::

    {"k":"h","format":"hashchem-log/1","model":...,"seed":...,"run_id":...,"config":{...}}
    {"k":"r","t":3,"ms":[1,1,3],"f":0.25000000}
    {"k":"s","t":3,"n":10,"matches":5,"births":5,"deaths":0,"mutated":0}

Fitness is always printed with exactly eight fractional digits so that
identical runs give byte-identical files.
"""

from __future__ import annotations

import gzip
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Iterable, Iterator

import numpy as np

from .core import ENTITY_MAX, ReplicationEvent, StepSummary

FORMAT_VERSION = "hashchem-log/1"


class LogFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class ContentStore:
    """Flat storage of multiset contents used by the compiled kernels.

    Content ``c`` occupies ``pool[off[c]:off[c] + lens[c]]`` and has fitness
    ``nums[c] / m``. ``generation`` changes whenever ids are renumbered.
    """

    pool: np.ndarray
    off: np.ndarray
    lens: np.ndarray
    nums: np.ndarray
    m: int
    generation: int = 0

    def elements(self, c: int) -> tuple[int, ...]:
        o = int(self.off[c])
        return tuple(self.pool[o : o + int(self.lens[c])].tolist())


@dataclass
class EventBatch:
    """All replication events of one step, as content ids into a store."""

    run_id: int
    t: int
    ids: np.ndarray
    store: ContentStore

    def __len__(self) -> int:
        return len(self.ids)

    def sizes(self) -> np.ndarray:
        return self.store.lens[self.ids]

    def numerators(self) -> np.ndarray:
        return self.store.nums[self.ids]

    def __iter__(self) -> Iterator[ReplicationEvent]:
        store = self.store
        m = store.m
        for c in self.ids.tolist():
            yield ReplicationEvent(self.run_id, self.t, store.elements(c), int(store.nums[c]) / m)


class Sink:
    """Event consumer. Subclasses override what they need."""

    def event(self, ev: ReplicationEvent) -> None:
        pass

    def batch(self, b: EventBatch) -> None:
        for ev in b:
            self.event(ev)

    def summary(self, s: StepSummary) -> None:
        pass

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class NullSink(Sink):
    def batch(self, b: EventBatch) -> None:
        pass


class ListSink(Sink):
    def __init__(self):
        self.events: list[ReplicationEvent] = []
        self.summaries: list[StepSummary] = []

    def event(self, ev: ReplicationEvent) -> None:
        self.events.append(ev)

    def summary(self, s: StepSummary) -> None:
        self.summaries.append(s)


def _ms_text(elements: Iterable[int]) -> str:
    return ",".join(map(str, elements))


def format_event(ev: ReplicationEvent) -> str:
    return f'{{"k":"r","t":{ev.t},"ms":[{_ms_text(ev.multiset)}],"f":{ev.fitness:.8f}}}\n'


def format_summary(s: StepSummary) -> str:
    return (
        f'{{"k":"s","t":{s.t},"n":{s.population_size},"matches":{s.matches},'
        f'"births":{s.births},"deaths":{s.deaths},"mutated":{s.mutated_multisets}}}\n'
    )


def format_header(model: str, seed: int, run_id: int, config: dict[str, Any]) -> str:
    header = {
        "k": "h",
        "format": FORMAT_VERSION,
        "model": model,
        "seed": seed,
        "run_id": run_id,
        "config": config,
    }
    return json.dumps(header, separators=(",", ":")) + "\n"


def write_event(out: IO[str], ev: ReplicationEvent) -> None:
    out.write(format_event(ev))


def write_summary(out: IO[str], s: StepSummary) -> None:
    out.write(format_summary(s))


def log_path(out_dir: str | Path, model: str, seed: int, run_id: int, compress: bool = False) -> Path:
    suffix = ".jsonl.gz" if compress else ".jsonl"
    return Path(out_dir) / f"{model}_{seed}_{run_id}{suffix}"


def _open_write(path: Path) -> IO[str]:
    if path.suffix == ".gz":
        raw = open(path, "wb")
        # mtime=0 and empty name keep compressed output byte-identical across runs
        gz = gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0)
        return _ClosingText(gz, raw)
    return open(path, "w", encoding="ascii", newline="\n")


class _ClosingText(io.TextIOWrapper):
    def __init__(self, gz: gzip.GzipFile, raw: IO[bytes]):
        super().__init__(gz, encoding="ascii", newline="\n")
        self._raw = raw

    def close(self) -> None:
        super().close()
        self._raw.close()


class LogWriter(Sink):
    """Sink that persists a run as a JSON Lines log."""

    def __init__(self, path: str | Path, model: str, seed: int, run_id: int, config: dict[str, Any]):
        self.path = Path(path)
        self.run_id = run_id
        self._out = _open_write(self.path)
        self._out.write(format_header(model, seed, run_id, config))
        self._tails: dict[int, str] = {}
        self._generation = -1

    def event(self, ev: ReplicationEvent) -> None:
        self._out.write(format_event(ev))

    def batch(self, b: EventBatch) -> None:
        store = b.store
        if store.generation != self._generation:
            self._tails.clear()
            self._generation = store.generation
        tails = self._tails
        m = store.m
        head = f'{{"k":"r","t":{b.t},"ms":['
        parts = []
        for c in b.ids.tolist():
            tail = tails.get(c)
            if tail is None:
                tail = tails[c] = f'{_ms_text(store.elements(c))}],"f":{int(store.nums[c]) / m:.8f}}}\n'
            parts.append(head)
            parts.append(tail)
        self._out.write("".join(parts))

    def summary(self, s: StepSummary) -> None:
        self._out.write(format_summary(s))

    def close(self) -> None:
        if not self._out.closed:
            self._out.close()


def _open_read(source) -> Iterable[str]:
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        if path.suffix == ".gz":
            return gzip.open(path, "rt", encoding="ascii", newline="")
        return open(path, "r", encoding="ascii", newline="")
    return source


def _int_field(rec: dict, key: str, lineno: int) -> int:
    value = rec.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise LogFormatError(lineno, f"field {key!r} must be an integer")
    return value


def _parse_event(rec: dict, run_id: int, lineno: int) -> ReplicationEvent:
    t = _int_field(rec, "t", lineno)
    ms = rec.get("ms")
    if not isinstance(ms, list) or not ms:
        raise LogFormatError(lineno, "field 'ms' must be a non-empty list")
    prev = 0
    for v in ms:
        if not isinstance(v, int) or isinstance(v, bool) or not 1 <= v <= ENTITY_MAX:
            raise LogFormatError(lineno, f"invalid entity type {v!r}")
        if v < prev:
            raise LogFormatError(lineno, f"multiset not sorted ascending: {ms}")
        prev = v
    f = rec.get("f")
    if not isinstance(f, (int, float)) or isinstance(f, bool) or not 0.0 <= f < 1.0:
        raise LogFormatError(lineno, f"fitness {f!r} not in [0, 1)")
    return ReplicationEvent(run_id, t, tuple(ms), float(f))


def _parse_summary(rec: dict, lineno: int) -> StepSummary:
    return StepSummary(
        _int_field(rec, "t", lineno),
        _int_field(rec, "n", lineno),
        _int_field(rec, "matches", lineno),
        _int_field(rec, "births", lineno),
        _int_field(rec, "deaths", lineno),
        _int_field(rec, "mutated", lineno) if "mutated" in rec else 0,
    )


def read_log(source) -> Iterator[dict | ReplicationEvent | StepSummary]:
    """Yield the header dict, then events and summaries in file order.

    ``source`` is a path (``.gz`` decompressed transparently) or any iterable
    of text lines. Every record is validated; problems raise LogFormatError
    carrying the 1-based line number.
    """
    stream = _open_read(source)
    run_id = 0
    last_t = 0
    lineno = 0
    try:
        for lineno, line in enumerate(stream, 1):
            if not line.endswith("\n"):
                raise LogFormatError(lineno, "truncated line (no terminating newline)")
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogFormatError(lineno, f"malformed JSON: {exc.msg}") from None
            if not isinstance(rec, dict):
                raise LogFormatError(lineno, "record is not an object")
            kind = rec.get("k")
            if lineno == 1:
                if kind != "h":
                    raise LogFormatError(lineno, "first record must be the header")
                if rec.get("format") != FORMAT_VERSION:
                    raise LogFormatError(lineno, f"unsupported format {rec.get('format')!r}")
                run_id = _int_field(rec, "run_id", lineno)
                yield rec
                continue
            if kind == "r":
                record = _parse_event(rec, run_id, lineno)
            elif kind == "s":
                record = _parse_summary(rec, lineno)
            else:
                raise LogFormatError(lineno, f"unknown record kind {kind!r}")
            if record.t < last_t:
                raise LogFormatError(lineno, f"time went backwards ({record.t} < {last_t})")
            last_t = record.t
            yield record
        if lineno == 0:
            raise LogFormatError(1, "empty log")
    finally:
        if stream is not source:
            stream.close()
