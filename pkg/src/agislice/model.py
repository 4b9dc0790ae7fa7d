"""Value types for the slicing model, unit parsing and the INI config format.

Everything is stored in canonical units: bits, seconds, bits/second and
1/second.  Config files may carry unit suffixes (``5 Gb``, ``20 Mbps``,
``0.2 /s``); they are converted once, on load.
"""

from __future__ import annotations

import configparser
import io
import math
import re
from dataclasses import dataclass, field, fields, replace
from decimal import Decimal, InvalidOperation
from typing import Any, Mapping, Sequence

from .errors import ConfigError

ROUTE_TAIL_MASS = 1e-9

# Decimal multipliers keep integer-valued conversions exact.
_UNITS = {
    "size": {"": 1, "b": 1, "bit": 1, "bits": 1, "kb": 10**3, "Kb": 10**3,
             "Mb": 10**6, "Gb": 10**9, "Tb": 10**12},
    "rate": {"": 1, "bps": 1, "b/s": 1, "kbps": 10**3, "Kbps": 10**3,
             "Mbps": 10**6, "Gbps": 10**9, "Tbps": 10**12},
    "time": {"": 1, "s": 1, "ms": Decimal("0.001"), "min": 60, "h": 3600},
    "freq": {"": 1, "/s": 1, "1/s": 1, "Hz": 1, "/min": Decimal(1) / 60,
             "/h": Decimal(1) / 3600},
    "number": {"": 1},
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*(\S*)\s*$")


def parse_quantity(value: Any, kind: str = "number", name: str = "") -> float:
    """Convert ``value`` (number or string with optional unit) to canonical units."""
    if isinstance(value, bool):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    m = _QUANTITY.match(str(value))
    if not m:
        raise ConfigError(name, f"cannot parse quantity {value!r}")
    number, unit = m.groups()
    table = _UNITS[kind]
    if unit not in table:
        raise ConfigError(name, f"unknown {kind} unit {unit!r} in {value!r}")
    mult = table[unit]
    try:
        if "inf" in number:
            return float(number) * float(mult)
        return float(Decimal(number) * Decimal(mult))
    except InvalidOperation as exc:  # pragma: no cover - regex guards this
        raise ConfigError(name, f"cannot parse quantity {value!r}") from exc


def parse_int(value: Any, name: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    x = parse_quantity(value, "number", name)
    if not math.isfinite(x) or x != int(x):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    return int(x)


def parse_values(value: Any, kind: str, name: str) -> list[float]:
    """Parse an explicit list (``a, b, c``) or an inclusive range (``start:stop:step``)."""
    if isinstance(value, (list, tuple)):
        return [parse_quantity(v, kind, name) for v in value]
    text = str(value).strip()
    if ":" in text:
        parts = [p.strip() for p in text.split(":")]
        if len(parts) != 3:
            raise ConfigError(name, f"range must be start:stop:step, got {text!r}")
        start, stop, step = (parse_quantity(p, kind, name) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError(name, f"invalid range {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9))
        d0, ds = Decimal(repr(start)), Decimal(repr(step))
        return [float(d0 + k * ds) for k in range(n + 1)]
    if not text:
        raise ConfigError(name, "empty value list")
    return [parse_quantity(v, kind, name) for v in text.split(",")]


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(name, message)


def _finite(name: str, v: float) -> None:
    _require(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v),
             name, f"must be a finite number, got {v!r}")


def _positive(name: str, v: float) -> None:
    _finite(name, v)
    _require(v > 0, name, f"{name} must be positive")


def _nonnegative(name: str, v: float) -> None:
    _finite(name, v)
    _require(v >= 0, name, f"{name} must be non-negative")


def _count(name: str, v: int, minimum: int = 0) -> None:
    _require(isinstance(v, int) and not isinstance(v, bool), name, f"{name} must be an integer")
    _require(v >= minimum, name, f"{name} must be >= {minimum}")


# -- domain types -----------------------------------------------------------


@dataclass(frozen=True)
class GeometricRoute:
    """Route length in blocks, geometric: continue with ``continue_prob`` after each block."""

    continue_prob: float

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        _finite("continue_prob", self.continue_prob)
        _require(0 <= self.continue_prob < 1, "continue_prob", "continue_prob must lie in [0, 1)")

    @property
    def mean_length(self) -> float:
        return 1.0 / (1.0 - self.continue_prob)

    def probabilities(self, tail_mass: float = ROUTE_TAIL_MASS) -> tuple[float, ...]:
        """G_J for J = 1..J_max, cut at the first J_max leaving tail mass < ``tail_mass``."""
        psi = self.continue_prob
        if psi == 0:
            return (1.0,)
        j_max = max(1, math.ceil(math.log(tail_mass) / math.log(psi)))
        while psi**j_max >= tail_mass:
            j_max += 1
        raw = [(1.0 - psi) * psi ** (j - 1) for j in range(1, j_max + 1)]
        total = math.fsum(raw)
        return tuple(g / total for g in raw)


@dataclass(frozen=True)
class MobilityProfile:
    vehicle_arrival_rate: float
    erlang_shape: int
    erlang_rate: float
    route_dist: tuple[float, ...]
    continue_prob: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "route_dist", tuple(float(g) for g in self.route_dist))
        self.validate()

    @classmethod
    def geometric(cls, vehicle_arrival_rate, erlang_shape, erlang_rate, continue_prob):
        route = GeometricRoute(continue_prob)
        return cls(vehicle_arrival_rate, erlang_shape, erlang_rate,
                   route.probabilities(), continue_prob=continue_prob)

    def validate(self) -> None:
        _positive("vehicle_arrival_rate", self.vehicle_arrival_rate)
        _count("erlang_shape", self.erlang_shape, 1)
        _positive("erlang_rate", self.erlang_rate)
        _require(len(self.route_dist) >= 1, "route_dist", "route_dist must not be empty")
        for g in self.route_dist:
            _finite("route_dist", g)
            _require(g >= 0, "route_dist", "route_dist probabilities must be non-negative")
        _require(abs(math.fsum(self.route_dist) - 1.0) <= 1e-9, "route_dist",
                 "route_dist probabilities must sum to 1")
        if self.continue_prob is not None:
            GeometricRoute(self.continue_prob)

    @property
    def mean_dwell(self) -> float:
        return self.erlang_shape / self.erlang_rate


@dataclass(frozen=True)
class Popularity:
    """Request probabilities by file rank, most popular first."""

    probabilities: tuple[float, ...]
    zipf_skew: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        self.validate()

    def validate(self) -> None:
        p = self.probabilities
        _require(len(p) >= 1, "popularity", "popularity needs at least one file")
        for v in p:
            _finite("popularity", v)
            _require(v >= 0, "popularity", "probabilities must be non-negative")
        _require(abs(math.fsum(p) - 1.0) <= 1e-12, "popularity", "probabilities must sum to 1")
        _require(all(a >= b for a, b in zip(p, p[1:])), "popularity",
                 "probabilities must be non-increasing in rank")

    @property
    def files(self) -> int:
        return len(self.probabilities)


@dataclass(frozen=True)
class ManaConfig:
    map_size: float
    cache_slots: int
    hap_rate: float
    rsu_rate: float
    delay_target: float

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        _positive("map_size", self.map_size)
        _count("cache_slots", self.cache_slots)
        _nonnegative("hap_rate", self.hap_rate)
        _nonnegative("rsu_rate", self.rsu_rate)
        _positive("delay_target", self.delay_target)


@dataclass(frozen=True)
class FociConfig:
    file_size: float
    cache_slots: int
    hap_rate: float
    rsu_rate: float
    expire_rate: float
    request_rate: float
    popularity: Popularity
    delay_target: float

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        _positive("file_size", self.file_size)
        _count("cache_slots", self.cache_slots)
        _nonnegative("hap_rate", self.hap_rate)
        _nonnegative("rsu_rate", self.rsu_rate)
        _positive("expire_rate", self.expire_rate)
        _nonnegative("request_rate", self.request_rate)
        _require(isinstance(self.popularity, Popularity), "popularity",
                 "popularity must be a Popularity")
        _require(self.cache_slots <= self.popularity.files, "cache_slots",
                 f"cache_slots ({self.cache_slots}) exceeds the number of files "
                 f"({self.popularity.files})")
        _positive("delay_target", self.delay_target)


@dataclass(frozen=True)
class ResourceBudget:
    rsu_total: float
    hap_total: float
    vehicle_cache: float
    block_count: int

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        _positive("rsu_total", self.rsu_total)
        # zero push resources is the no-push baseline, so allowed
        _nonnegative("hap_total", self.hap_total)
        _nonnegative("vehicle_cache", self.vehicle_cache)
        _count("block_count", self.block_count, 1)


def _increasing(name: str, values: Sequence[float]) -> None:
    _require(len(values) >= 1, name, f"{name} must not be empty")
    for v in values:
        _nonnegative(name, v)
    _require(all(a < b for a, b in zip(values, values[1:])), name,
             f"{name} must be strictly increasing")


@dataclass(frozen=True)
class GridSpec:
    """Candidate values for the four pushed-resource variables of the search."""

    c_m_values: tuple[int, ...]
    r_hm_values: tuple[float, ...]
    c_p_values: tuple[int, ...]
    r_hp_values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "c_m_values", tuple(int(v) for v in self.c_m_values))
        object.__setattr__(self, "c_p_values", tuple(int(v) for v in self.c_p_values))
        object.__setattr__(self, "r_hm_values", tuple(float(v) for v in self.r_hm_values))
        object.__setattr__(self, "r_hp_values", tuple(float(v) for v in self.r_hp_values))
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            _increasing(f.name, getattr(self, f.name))

    @classmethod
    def default(cls) -> "GridSpec":
        return cls(
            c_m_values=tuple(range(16)),
            r_hm_values=tuple(0.5e6 * k for k in range(21)),
            c_p_values=tuple(range(0, 201, 10)),
            r_hp_values=tuple(float(Decimal("0.1e6") * k) for k in range(51)),
        )

    @property
    def size(self) -> int:
        return (len(self.c_m_values) * len(self.r_hm_values)
                * len(self.c_p_values) * len(self.r_hp_values))


@dataclass(frozen=True)
class SlicingSolution:
    """One allocation of (cache, HAP rate, RSU rate) to each pushed slice."""

    c_m: int
    r_hm: float
    r_rm: float
    c_p: int
    r_hp: float
    r_rp: float
    objective: float
    mana_delay: float
    foci_delay: float
    feasible: bool
    p_acc: float = 0.0
    p_hit: float = 0.0
    reason: str = ""

    @property
    def mana(self) -> tuple[int, float, float]:
        return (self.c_m, self.r_hm, self.r_rm)

    @property
    def foci(self) -> tuple[int, float, float]:
        return (self.c_p, self.r_hp, self.r_rp)

    @property
    def rsu_used(self) -> float:
        return self.r_rm + self.r_rp


@dataclass(frozen=True)
class RunSettings:
    seed: int | None = None
    vehicles: int = 100_000
    requests: int = 1_000_000
    transitions: int = 1_000_000
    warmup_fraction: float = 0.1
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.seed is not None:
            _count("seed", self.seed)
            _require(self.seed < 2**64, "seed", "seed must fit in 64 bits")
        _count("vehicles", self.vehicles, 1)
        _count("requests", self.requests, 1)
        _count("transitions", self.transitions, 1)
        _finite("warmup_fraction", self.warmup_fraction)
        _require(0 <= self.warmup_fraction < 1, "warmup_fraction",
                 "warmup_fraction must lie in [0, 1)")
        _count("workers", self.workers, 1)


@dataclass(frozen=True)
class RunConfig:
    mobility: MobilityProfile
    mana: ManaConfig
    foci: FociConfig
    budget: ResourceBudget | None = None
    run: RunSettings = field(default_factory=RunSettings)
    grid: GridSpec | None = None
    sweep: tuple[tuple[str, tuple[float, ...]], ...] = ()


def validate(obj):
    """Re-check every invariant of ``obj`` and return it unchanged."""
    if isinstance(obj, RunConfig):
        for part in (obj.mobility, obj.mana, obj.foci, obj.budget, obj.run, obj.grid):
            if part is not None:
                part.validate()
        return obj
    check = getattr(obj, "validate", None)
    if check is None:
        raise TypeError(f"no invariants known for {type(obj).__name__}")
    check()
    return obj


# -- config mapping / INI ---------------------------------------------------

_SCHEMA = {
    "mobility": {"vehicle_arrival_rate": "freq", "erlang_shape": "int", "erlang_rate": "freq",
                 "continue_prob": "number", "route_dist": "list:number"},
    "mana": {"map_size": "size", "cache_slots": "int", "hap_rate": "rate", "rsu_rate": "rate",
             "delay_target": "time"},
    "foci": {"file_size": "size", "cache_slots": "int", "hap_rate": "rate", "rsu_rate": "rate",
             "expire_rate": "freq", "request_rate": "freq", "zipf_files": "int",
             "zipf_skew": "number", "popularity": "list:number", "delay_target": "time"},
    "budget": {"rsu_total": "rate", "hap_total": "rate", "vehicle_cache": "size",
               "block_count": "int"},
    "run": {"seed": "int", "vehicles": "int", "requests": "int", "transitions": "int",
            "warmup_fraction": "number", "workers": "int"},
    "grid": {"c_m_values": "list:int", "r_hm_values": "list:rate", "c_p_values": "list:int",
             "r_hp_values": "list:rate"},
}
SECTIONS = tuple(_SCHEMA) + ("sweep",)


def sweep_axis(key: str, raw: Any) -> tuple[str, tuple[float, ...]]:
    """Parse one sweep axis ``section.key = values`` using the target key's units."""
    section, _, name = key.partition(".")
    if section not in _SCHEMA or name not in _SCHEMA[section]:
        raise ConfigError(f"sweep.{key}", "unknown sweep key")
    kind = _SCHEMA[section][name]
    if kind.startswith("list:"):
        raise ConfigError(f"sweep.{key}", "list-valued keys cannot be swept")
    vals = parse_values(raw, "number" if kind == "int" else kind, key)
    if not vals:
        raise ConfigError(f"sweep.{key}", "empty value list")
    if kind == "int":
        if any(v != int(v) for v in vals):
            raise ConfigError(key, "expected integers")
        vals = [int(v) for v in vals]
    return key, tuple(vals)


def _coerce(section: str, key: str, raw: Any) -> Any:
    name = f"{section}.{key}"
    kind = _SCHEMA[section][key]
    if kind == "int":
        return parse_int(raw, name)
    if kind.startswith("list:"):
        sub = kind[5:]
        if sub == "int":
            vals = parse_values(raw, "number", name)
            if any(v != int(v) for v in vals):
                raise ConfigError(name, "expected integers")
            return [int(v) for v in vals]
        return parse_values(raw, sub, name)
    return parse_quantity(raw, kind, name)


def _section(raw: Mapping[str, Mapping[str, Any]], name: str, required: bool) -> dict | None:
    if name not in raw:
        if required:
            raise ConfigError(name, f"missing section [{name}]")
        return None
    values = {}
    for key, v in raw[name].items():
        if key not in _SCHEMA[name]:
            raise ConfigError(f"{name}.{key}", "unknown key")
        values[key] = _coerce(name, key, v)
    return values


def _need(sec: dict, section: str, key: str):
    if key not in sec:
        raise ConfigError(f"{section}.{key}", "missing required key")
    return sec[key]


def config_from_mapping(raw: Mapping[str, Mapping[str, Any]]) -> RunConfig:
    """Build a validated :class:`RunConfig` from section -> key -> value mappings."""
    for name in raw:
        if name not in SECTIONS:
            raise ConfigError(name, f"unknown section [{name}]")

    mob = _section(raw, "mobility", True)
    args = [_need(mob, "mobility", k) for k in ("vehicle_arrival_rate", "erlang_shape", "erlang_rate")]
    if "continue_prob" in mob and "route_dist" in mob:
        raise ConfigError("mobility.route_dist", "give either continue_prob or route_dist, not both")
    if "continue_prob" in mob:
        mobility = MobilityProfile.geometric(*args, mob["continue_prob"])
    elif "route_dist" in mob:
        mobility = MobilityProfile(*args, tuple(mob["route_dist"]))
    else:
        raise ConfigError("mobility.continue_prob", "missing route description")

    m = _section(raw, "mana", True)
    mana = ManaConfig(*[_need(m, "mana", k) for k in
                        ("map_size", "cache_slots", "hap_rate", "rsu_rate", "delay_target")])

    f = _section(raw, "foci", True)
    if "popularity" in f:
        if "zipf_skew" in f or "zipf_files" in f:
            raise ConfigError("foci.popularity", "give either zipf_* keys or popularity, not both")
        popularity = Popularity(tuple(f["popularity"]))
    else:
        from .foci import zipf  # local import: foci depends on this module

        popularity = zipf(_need(f, "foci", "zipf_files"), _need(f, "foci", "zipf_skew"))
    foci = FociConfig(
        *[_need(f, "foci", k) for k in
          ("file_size", "cache_slots", "hap_rate", "rsu_rate", "expire_rate", "request_rate")],
        popularity, _need(f, "foci", "delay_target"))

    b = _section(raw, "budget", False)
    budget = None
    if b is not None:
        budget = ResourceBudget(*[_need(b, "budget", k) for k in
                                  ("rsu_total", "hap_total", "vehicle_cache", "block_count")])

    r = _section(raw, "run", False) or {}
    run = RunSettings(**r)

    g = _section(raw, "grid", False)
    grid = None
    if g is not None:
        base = GridSpec.default()
        grid = GridSpec(**{k.name: tuple(g.get(k.name, getattr(base, k.name))) for k in fields(GridSpec)})

    sweep = tuple(sweep_axis(k, v) for k, v in raw.get("sweep", {}).items())
    return RunConfig(mobility, mana, foci, budget, run, grid, sweep)


def config_to_mapping(cfg: RunConfig) -> dict[str, dict[str, Any]]:
    """Canonical-unit mapping; ``config_from_mapping`` inverts it exactly."""
    mob = cfg.mobility
    out: dict[str, dict[str, Any]] = {
        "mobility": {"vehicle_arrival_rate": mob.vehicle_arrival_rate,
                     "erlang_shape": mob.erlang_shape, "erlang_rate": mob.erlang_rate},
    }
    if mob.continue_prob is not None:
        out["mobility"]["continue_prob"] = mob.continue_prob
    else:
        out["mobility"]["route_dist"] = list(mob.route_dist)
    out["mana"] = {k.name: getattr(cfg.mana, k.name) for k in fields(ManaConfig)}
    foci = {k.name: getattr(cfg.foci, k.name) for k in fields(FociConfig) if k.name != "popularity"}
    pop = cfg.foci.popularity
    if pop.zipf_skew is not None:
        foci["zipf_files"] = pop.files
        foci["zipf_skew"] = pop.zipf_skew
    else:
        foci["popularity"] = list(pop.probabilities)
    out["foci"] = foci
    if cfg.budget is not None:
        out["budget"] = {k.name: getattr(cfg.budget, k.name) for k in fields(ResourceBudget)}
    out["run"] = {k.name: getattr(cfg.run, k.name) for k in fields(RunSettings)
                  if getattr(cfg.run, k.name) is not None}
    if cfg.grid is not None:
        out["grid"] = {k.name: list(getattr(cfg.grid, k.name)) for k in fields(GridSpec)}
    if cfg.sweep:
        out["sweep"] = {k: list(v) for k, v in cfg.sweep}
    return out


def _ini_value(v: Any) -> str:
    if isinstance(v, (list, tuple)):
        return ", ".join(_ini_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section, values in config_to_mapping(cfg).items():
        parser[section] = {k: _ini_value(v) for k, v in values.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("", f"malformed config: {exc}") from exc
    return config_from_mapping({s: dict(parser[s]) for s in parser.sections()})


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def with_override(cfg: RunConfig, key: str, value: Any) -> RunConfig:
    """Return ``cfg`` with ``section.field`` replaced; ``value`` may carry units."""
    section, _, name = key.partition(".")
    if section not in _SCHEMA or name not in _SCHEMA[section]:
        raise ConfigError(key, "unknown sweep key")
    mapping = config_to_mapping(cfg)
    sec = mapping.setdefault(section, {})
    sec[name] = value
    if section == "mobility" and name == "continue_prob":
        sec.pop("route_dist", None)
    if section == "foci" and name in ("zipf_files", "zipf_skew"):
        pop = cfg.foci.popularity
        sec.pop("popularity", None)
        sec.setdefault("zipf_files", pop.files)
        sec.setdefault("zipf_skew", pop.zipf_skew if pop.zipf_skew is not None else 0.0)
    return config_from_mapping(mapping)


__all__ = [
    "ConfigError", "FociConfig", "GeometricRoute", "GridSpec", "ManaConfig", "MobilityProfile",
    "Popularity", "ResourceBudget", "RunConfig", "RunSettings", "SlicingSolution", "SECTIONS",
    "config_from_mapping", "config_to_mapping", "dump_config", "load_config", "parse_config",
    "parse_quantity", "parse_values", "replace", "sweep_axis", "validate", "with_override",
]
