"""Flat TOML experiment configuration and output writers.

Every key is optional; missing keys take the defaults below (cavity drive
and coupling in units of omega0). Unknown keys, repeated keys and values of
the wrong type are rejected.

CSV outputs start with ``#`` comment lines carrying the artifact version
and the resolved configuration as one-line JSON, followed by a header row
and one row per record; floats use ``repr`` and ``.`` as decimal mark.
JSON outputs are objects ``{"artifact", "version", "config", "columns",
"rows"}`` for tables or ``{"artifact", "version", "config", "summary"}``
for summaries.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import re
from dataclasses import dataclass, fields
from pathlib import Path

import tomli
import tomli_w

from . import __version__
from .clicks import RESET_MODES, RunConfig
from .dynamics import METHODS, AtomParams, DriveProfile, PropagatorConfig
from .errors import ConfigError
from .estimators import VARIANTS


@dataclass(frozen=True)
class ExperimentConfig:
    # cavity drive, in units of omega0
    omega0: float = 1.0
    epsilon: float = 1e-3
    eta: float = 2.0
    # atom
    g: float = 5e-4
    delta: float = 0.0
    # microsecond calibration: omega0 in rad per microsecond
    omega0_per_mcs: float = 1000.0
    # numerics
    fock_dim: int = 40
    steps_per_period: int = 200
    method: str = "midpoint"
    unitarity_tol: float = 1e-8
    # protocol timing (microseconds)
    generation_mcs: float = 1.0
    transit_mcs: float = 1.0
    fig1_samples: int = 51
    # readout grids
    tau_max: float = 0.05
    tau_points: int = 9
    fig2_tau_max: float = 0.2
    fig2_tau_points: int = 41
    theta_x: float = 0.0
    theta_points: int = 16
    witness_margin: float = 0.02
    # scan subcommand
    scan_variant: str = "plain-1atom"
    scan_theta: float = 0.0
    scan_mode: str = "kraus"
    # Monte Carlo
    mc_atoms: int = 20000
    mc_tau_max: float = 0.3
    mc_tau_points: int = 9
    reset_mode: str = "exact-vacuum"
    reset_tau: float = 0.3
    reset_cycle_cap: int = 200
    seed: int = 2015
    # acceptance bands for eq27
    expect_n: float = 0.28
    expect_x: float = 0.0
    expect_x2: float = 0.18
    band: float = 0.02
    # output
    format: str = "csv"
    out_dir: str = "dceprobe-out"

    def __post_init__(self):
        checks = [
            (self.omega0 > 0, "omega0 must be positive"),
            (0 <= self.epsilon < 1, "epsilon must lie in [0, 1)"),
            (self.eta > 0, "eta must be positive"),
            (self.g >= 0, "g must be nonnegative"),
            (self.omega0_per_mcs > 0, "omega0_per_mcs must be positive"),
            (self.fock_dim >= 2, "fock_dim must be >= 2"),
            (self.steps_per_period >= 50, "steps_per_period must be >= 50"),
            (self.method in METHODS, f"method must be one of {METHODS}"),
            (self.generation_mcs >= 0 and self.transit_mcs >= 0, "durations must be nonnegative"),
            (self.fig1_samples >= 2, "fig1_samples must be >= 2"),
            (self.tau_points >= 5 and self.mc_tau_points >= 5, "tau grids need >= 5 points"),
            (self.fig2_tau_points >= 2, "fig2_tau_points must be >= 2"),
            (self.tau_max > 0 and self.mc_tau_max > 0 and self.fig2_tau_max > 0, "tau maxima must be positive"),
            (self.theta_points >= 16, "theta_points must be >= 16"),
            (self.scan_variant in VARIANTS, f"scan_variant must be one of {VARIANTS}"),
            (self.scan_mode in ("kraus", "exact"), "scan_mode must be 'kraus' or 'exact'"),
            (self.mc_atoms >= 1, "mc_atoms (atoms per tau point) must be >= 1"),
            (self.reset_mode in RESET_MODES, f"reset_mode must be one of {RESET_MODES}"),
            (0 <= self.seed < 2 ** 64, "seed must be a 64-bit unsigned integer"),
            (self.format in ("csv", "json"), "format must be 'csv' or 'json'"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    # derived objects

    @property
    def mcs(self) -> float:
        """One microsecond in internal time units."""
        return self.omega0_per_mcs / self.omega0

    def drive(self) -> DriveProfile:
        return DriveProfile(self.omega0, self.epsilon, self.eta)

    def atom(self) -> AtomParams:
        return AtomParams(self.g, self.delta, self.omega0)

    def propagator(self) -> PropagatorConfig:
        return PropagatorConfig(self.steps_per_period, self.method, self.unitarity_tol)

    def run_config(self) -> RunConfig:
        return RunConfig(self.drive(), self.atom(), self.generation_mcs * self.mcs, self.tau_max, self.mc_atoms,
                         self.reset_mode, self.seed, self.fock_dim, self.propagator(), self.reset_tau,
                         self.reset_cycle_cap)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_KEY_RE = re.compile(r"^\s*([A-Za-z0-9_\-]+|\"[^\"]*\")\s*=")


def _coerce(key, value):
    kind = _FIELD_TYPES[key]
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{key}: unsupported type {kind}")


def config_from_mapping(data: dict) -> ExperimentConfig:
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    values = {k: _coerce(k, v) for k, v in data.items()}
    if "eta" not in values and "omega0" in values:
        values["eta"] = 2.0 * values["omega0"]
    return ExperimentConfig(**values)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    seen = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.lstrip().startswith("["):
            raise ConfigError(f"{source}:{lineno}: tables are not allowed, the configuration is flat")
        m = _KEY_RE.match(line)
        if m:
            key = m.group(1).strip('"')
            if key in seen:
                raise ConfigError(f"{source}:{lineno}: duplicate key '{key}' (first set on line {seen[key]})")
            seen[key] = lineno
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return config_from_mapping(data)


def load_config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, str(path))


def dump_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(tomli_w.dumps(cfg.to_dict()), encoding="utf-8")
    return path


# outputs


@dataclass
class Table:
    columns: list
    rows: list


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if hasattr(v, "item"):
        return _jsonable(v.item())
    return v


def render(data, cfg: ExperimentConfig, fmt: str) -> str:
    """Serialize a :class:`Table` or a flat summary dict."""
    meta = {"artifact": "dceprobe", "version": __version__, "config": cfg.to_dict()}
    if fmt == "json":
        if isinstance(data, Table):
            body = {"columns": list(data.columns),
                    "rows": [[_jsonable(v) for v in row] for row in data.rows]}
        else:
            body = {"summary": {k: _jsonable(v) for k, v in data.items()}}
        return json.dumps({**meta, **body}, indent=2, sort_keys=False) + "\n"
    if fmt != "csv":
        raise ConfigError(f"unknown output format {fmt!r}")
    buf = io.StringIO()
    buf.write(f"# dceprobe {__version__}\n")
    buf.write(f"# config: {json.dumps(meta['config'], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(data, Table):
        w.writerow(data.columns)
        for row in data.rows:
            w.writerow([_fmt(_jsonable(v)) for v in row])
    else:
        w.writerow(["key", "value"])
        for k, v in data.items():
            w.writerow([k, _fmt(_jsonable(v))])
    return buf.getvalue()


def write_output(data, path, cfg: ExperimentConfig, fmt: str | None = None) -> Path:
    fmt = fmt or cfg.format
    path = Path(path)
    if path.suffix != f".{fmt}":
        path = path.with_suffix(f".{fmt}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(render(data, cfg, fmt), encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc
    return path


def embedded_config(path) -> ExperimentConfig:
    """Recover the resolved configuration embedded in an output file."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return config_from_mapping(json.loads(text)["config"])
    for line in text.splitlines():
        if line.startswith("# config: "):
            return config_from_mapping(json.loads(line[len("# config: "):]))
    raise ConfigError(f"{path} has no embedded configuration")
