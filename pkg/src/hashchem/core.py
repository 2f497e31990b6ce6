"""Shared domain types and simulation configuration."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Iterator

S_MAX_DEFAULT = 1000
ENTITY_MAX = 2**32 - 1


class ConfigError(ValueError):
    """Raised when a configuration field violates its bound."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ValidationError(ValueError):
    pass


class PopulationOverflow(RuntimeError):
    pass


@dataclass(frozen=True, slots=True)
class Multiset:
    """Canonical (ascending) bag of entity types."""

    elements: tuple[int, ...]

    def __post_init__(self):
        el = self.elements
        if not el:
            raise ValidationError("multiset must not be empty")
        for a, b in zip(el, el[1:]):
            if a > b:
                raise ValidationError(f"multiset not sorted: {list(el)}")

    @property
    def size(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[int]:
        return iter(self.elements)

    def __repr__(self) -> str:
        return f"Multiset{list(self.elements)}"


def canonicalize(elements: Iterable[int], s_max: int = S_MAX_DEFAULT) -> Multiset:
    el = sorted(int(e) for e in elements)
    if not el:
        raise ValidationError("multiset must not be empty")
    if el[0] < 1 or el[-1] > s_max:
        bad = el[0] if el[0] < 1 else el[-1]
        raise ValidationError(f"entity type {bad} outside [1, {s_max}]")
    return Multiset(tuple(el))


class Population:
    """Indexable list of multisets. Removal swaps the last member into the hole."""

    __slots__ = ("members", "limit")

    def __init__(self, members: Iterable[Multiset] = (), limit: int | None = None):
        self.members: list[Multiset] = list(members)
        self.limit = limit

    @property
    def n(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, i: int) -> Multiset:
        return self.members[i]

    def __setitem__(self, i: int, ms: Multiset) -> None:
        self.members[i] = ms

    def __iter__(self) -> Iterator[Multiset]:
        return iter(self.members)

    def append(self, ms: Multiset) -> None:
        self.members.append(ms)
        if self.limit is not None and len(self.members) > self.limit:
            raise PopulationOverflow(
                f"population {len(self.members)} exceeds hard bound {self.limit}"
            )

    def remove(self, i: int) -> None:
        members = self.members
        last = members.pop()
        if i < len(members):
            members[i] = last


@dataclass(frozen=True, slots=True)
class ReplicationEvent:
    run_id: int
    t: int
    multiset: tuple[int, ...]
    fitness: float


@dataclass(frozen=True, slots=True)
class StepSummary:
    t: int
    population_size: int
    matches: int
    births: int
    deaths: int
    mutated_multisets: int = 0

    @property
    def extinct(self) -> bool:
        return self.population_size == 0


@dataclass
class SimConfig:
    S_max: int = S_MAX_DEFAULT
    n_max: int = 10_000
    iterations: int = 2000
    m: int = 100_000_000
    init_count: int = 10
    mutation_rate: float = 0.01
    point_change_prob: float = 0.20
    swap_fraction: float = 0.80
    duplication_prob: float = 0.20
    mutate_on_replicate: bool = False
    seed: int = 1

    @property
    def hard_bound(self) -> int:
        return 4 * self.n_max

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes: Any):
        return dataclasses.replace(self, **changes)


_PROBABILITIES = (
    "mutation_rate",
    "point_change_prob",
    "swap_fraction",
    "duplication_prob",
    "point_mutation_prob",
)


def validate_config(cfg: SimConfig) -> SimConfig:
    """Return ``cfg`` unchanged, or raise ConfigError naming the first bad field."""
    for f in fields(cfg):
        name = f.name
        value = getattr(cfg, name)
        if name in _PROBABILITIES:
            if not 0.0 <= value <= 1.0:
                raise ConfigError(name, f"{value} not in [0, 1]")
        elif name in ("S_max", "n_max", "init_count", "d_max"):
            if value < 1:
                raise ConfigError(name, f"{value} must be >= 1")
        elif name == "iterations":
            if value < 0:
                raise ConfigError(name, f"{value} must be >= 0")
        elif name in ("m", "m_spatial"):
            if value < 2:
                raise ConfigError(name, f"{value} must be >= 2")
        elif name == "seed":
            if not 0 <= value < 2**64:
                raise ConfigError(name, f"{value} not a 64-bit unsigned integer")
        elif name == "neighbor_radius":
            if not 0.0 < value < 1.0:
                raise ConfigError(name, f"{value} not in (0, 1)")
        elif name == "move_sigma":
            if value < 0.0:
                raise ConfigError(name, f"{value} must be >= 0")
    if cfg.S_max > ENTITY_MAX:
        raise ConfigError("S_max", f"{cfg.S_max} exceeds 32-bit entity range")
    return cfg


def _coerce(kind: Any, raw: Any, name: str) -> Any:
    kind = kind if isinstance(kind, str) else getattr(kind, "__name__", str(kind))
    try:
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(str(raw).replace("_", "")) if isinstance(raw, str) else int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r} as {kind}") from None
    return raw


def config_from_mapping(cls: type, values: dict[str, Any], base=None):
    """Build ``cls`` from a flat mapping; unknown keys are rejected."""
    known = {f.name: f for f in fields(cls)}
    cfg = base if base is not None else cls()
    changes = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(key, "unknown configuration key")
        changes[key] = _coerce(known[key].type, raw, key)
    return dataclasses.replace(cfg, **changes)


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Parse a flat ``key = value`` file (``#`` comments) or a JSON object."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError(str(path), "JSON config must be an object")
        return data
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(str(path), f"line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip().strip('"').strip("'")
    return values
