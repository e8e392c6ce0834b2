"""Run configuration, binary checkpoints and CSV time series."""
from __future__ import annotations

import csv
import math
import re
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .evolution import SolverConfig, TrajectoryRecord
from .functionals import WellClass, bubble
from .grid import BoxDomain, Field, sine_mode

MAGIC = b"CHQH"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sII3d")

CSV_COLUMNS = ["t", "a", "b", "j", "i", "l2", "linf", "dt", "dissipation", "klass"]


class ConfigError(ValueError):
    pass


class CheckpointError(IOError):
    pass


class BadMagic(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass


class TruncatedCheckpoint(CheckpointError):
    pass


# --- initial-condition specs -------------------------------------------------

@dataclass(frozen=True)
class Eigenmode:
    k: tuple = (1, 1, 1)

    def __str__(self):
        return "eigenmode({},{},{})".format(*self.k)

    def build(self, domain: BoxDomain) -> Field:
        return sine_mode(domain, self.k)


@dataclass(frozen=True)
class Bubble:
    center: tuple
    width: float

    def __str__(self):
        return "bubble({},{},{},{})".format(*map(repr, self.center), repr(self.width))

    def build(self, domain: BoxDomain) -> Field:
        return bubble(domain, self.center, self.width)


@dataclass(frozen=True)
class Checkpoint:
    path: str

    def __str__(self):
        return f"checkpoint({self.path})"

    def build(self, domain: BoxDomain) -> Field:
        u, _, _ = read_checkpoint(self.path)
        if u.domain != domain:
            raise ConfigError(f"checkpoint grid {u.domain} does not match configured grid {domain}")
        return u


@dataclass(frozen=True)
class Scaled:
    factor: float
    inner: object

    def __str__(self):
        return f"scaled({self.factor!r},{self.inner})"

    def build(self, domain: BoxDomain) -> Field:
        return self.factor * self.inner.build(domain)


_CALL = re.compile(r"^\s*([a-z]+)\s*\((.*)\)\s*$", re.S)


def parse_initial(text: str):
    m = _CALL.match(text)
    if not m:
        raise ConfigError(f"cannot parse initial condition {text!r}")
    name, args = m.group(1), m.group(2).strip()
    try:
        if name == "eigenmode":
            k = tuple(int(a) for a in args.split(",")) if args else (1, 1, 1)
            if len(k) != 3 or min(k) < 1:
                raise ConfigError("eigenmode needs three positive integers")
            return Eigenmode(k)
        if name == "bubble":
            vals = [float(a) for a in args.split(",")]
            if len(vals) != 4:
                raise ConfigError("bubble needs center x,y,z and width")
            return Bubble(tuple(vals[:3]), vals[3])
        if name == "checkpoint":
            return Checkpoint(args)
        if name == "scaled":
            head, _, rest = args.partition(",")
            return Scaled(float(head), parse_initial(rest))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad arguments in {text!r}: {exc}") from exc
    raise ConfigError(f"unknown initial condition {name!r}")


# --- run configuration -------------------------------------------------------

@dataclass
class RunConfig:
    L: float = 1.0
    M: int = 32
    mu: float = 2.0
    initial: object = field(default_factory=Eigenmode)
    seed: int = 7
    output_dir: str = "out"
    lambda_min: float = 0.5
    lambda_max: float = 4.0
    bracket_tol: float = 0.05
    gs_max_iter: int = 2000
    gs_tol: float = 1e-7
    picard_T: float = 0.01
    picard_n_time: int = 40
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    solver: SolverConfig = field(default_factory=SolverConfig)

    @property
    def domain(self) -> BoxDomain:
        return BoxDomain(self.L, self.M)

    def items(self):
        for f in fields(self):
            if f.name == "solver":
                continue
            yield f.name, getattr(self, f.name)
        for f in fields(SolverConfig):
            yield f.name, getattr(self.solver, f.name)


_RUN_KEYS = {f.name: f for f in fields(RunConfig) if f.name != "solver"}
_SOLVER_KEYS = {f.name: f for f in fields(SolverConfig)}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if key == "initial":
            return parse_initial(raw)
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def apply_overrides(cfg: RunConfig, pairs) -> RunConfig:
    """Apply ``key=value`` strings (or ``(key, value)`` pairs) to ``cfg``."""
    run_kw, solver_kw = {}, {}
    defaults = RunConfig()
    for item in pairs:
        if isinstance(item, str):
            if "=" not in item:
                raise ConfigError(f"expected key=value, got {item!r}")
            key, raw = item.split("=", 1)
        else:
            key, raw = item
        key = key.strip()
        if key in _RUN_KEYS:
            run_kw[key] = _convert(key, str(raw), getattr(defaults, key))
        elif key in _SOLVER_KEYS:
            solver_kw[key] = _convert(key, str(raw), getattr(defaults.solver, key))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        solver = SolverConfig(**{**{f: getattr(cfg.solver, f) for f in _SOLVER_KEYS}, **solver_kw})
        out = RunConfig(**{**{k: getattr(cfg, k) for k in _RUN_KEYS}, **run_kw, "solver": solver})
        out.domain  # validates L and M
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return out


def parse_config(text: str) -> RunConfig:
    pairs = []
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, value = s.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return apply_overrides(RunConfig(), pairs)


def dump_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_format(v)}\n" for k, v in cfg.items())


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


# --- checkpoints -------------------------------------------------------------

def write_checkpoint(u: Field, t: float, mu: float, path) -> None:
    M = u.domain.M
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, M, float(u.domain.L), float(mu), float(t))
    payload = np.asarray(u.values, dtype="<f8").ravel(order="F").tobytes()
    Path(path).write_bytes(header + payload)


def read_checkpoint(path):
    """Returns ``(field, t, mu)``; raises a :class:`CheckpointError` subclass on bad input."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"{path}: not a checkpoint (magic {data[:4]!r})")
    if len(data) < _HEADER.size:
        raise TruncatedCheckpoint(f"{path}: header truncated")
    _, version, M, L, mu, t = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    need = _HEADER.size + 8 * M ** 3
    if len(data) < need:
        raise TruncatedCheckpoint(f"{path}: expected {need} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", count=M ** 3, offset=_HEADER.size)
    values = values.reshape((M, M, M), order="F").astype(float)
    return Field(BoxDomain(L, M), values), t, mu


# --- time series -------------------------------------------------------------

def write_timeseries(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([f"{getattr(r, c):.17g}" for c in CSV_COLUMNS[:-1]] + [r.klass.value])


def read_timeseries(path) -> list:
    out = []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in rows:
            vals = {c: float(v) for c, v in zip(CSV_COLUMNS[:-1], row[:-1])}
            out.append(TrajectoryRecord(**vals, klass=WellClass(row[-1])))
    return out


def records_close(a, b, rel: float = 1e-15) -> bool:
    """Equality of two record lists up to 17-significant-digit serialisation."""
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        if x.klass is not y.klass:
            return False
        for c in CSV_COLUMNS[:-1]:
            u, v = getattr(x, c), getattr(y, c)
            if not (u == v or math.isclose(u, v, rel_tol=rel, abs_tol=0.0)):
                return False
    return True
