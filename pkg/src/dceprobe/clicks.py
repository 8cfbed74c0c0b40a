"""Monte Carlo simulation of the atomic detector clicks.

Randomness comes from numpy's Philox4x32-10, a counter-based generator.
Every tau point owns a stream keyed by ``SeedSequence([seed, point])``;
within it, repetition k reads the uniforms at counter positions
[k*m, (k+1)*m) where m is the number of atoms per repetition, so results
do not depend on how repetitions are scheduled. The atom-extraction reset
consumes a variable number of draws, so in that mode each repetition gets
its own stream ``SeedSequence([seed, point, k])``.

Click record file layout (text, UTF-8, newline-terminated lines)::

    # dceprobe click record v1
    # config: <RunConfig as one-line JSON>
    # seed: <int>
    # variant: <plain-1atom | rotated-1atom | rotated-2atom>
    # streams: <point>:<digest>;<point>:<digest>;...
    cycle,tau,theta,outcome
    0,0.0,0.0,g
    ...

One row per detected atom. ``cycle`` counts repetitions over the whole run
(two-atom cycles produce two rows with the same cycle), ``theta`` is empty
for unrotated scans and ``outcome`` is ``g`` or ``e``. Floats are written
with ``repr`` so a record reads back bit-identical.
"""
from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import AtomParams, DriveProfile, PropagatorConfig, field_propagator, generate_dce_field
from .errors import EmptyRecordError, InvalidInputError, ResetFailedError
from .estimators import PLAIN, ROTATED_2, VARIANTS, TauScan
from .fock import FieldState, mean_n, vacuum_state
from .measurement import AtomicOutcome, KrausPair, conditional_update, kraus_pair, outcome_probability

RESET_MODES = ("exact-vacuum", "atom-extraction")
RECORD_VERSION = "dceprobe click record v1"


@dataclass(frozen=True)
class RunConfig:
    drive: DriveProfile = field(default_factory=DriveProfile)
    atom: AtomParams = field(default_factory=AtomParams)
    generation_duration: float = 1000.0
    tau: float = 0.05
    atoms_per_point: int = 20000
    reset_mode: str = "exact-vacuum"
    seed: int = 2015
    dim: int = 40
    propagator: PropagatorConfig = field(default_factory=PropagatorConfig)
    reset_tau: float = 0.3
    reset_cycle_cap: int = 200
    reset_vacuum_target: float = 0.999

    def __post_init__(self):
        if self.atoms_per_point < 1:
            raise InvalidInputError("atoms_per_point must be >= 1")
        if self.tau < 0:
            raise InvalidInputError("tau must be nonnegative")
        if self.reset_mode not in RESET_MODES:
            raise InvalidInputError(f"reset_mode must be one of {RESET_MODES}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def make_rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def stream_digest(rng: np.random.Generator) -> str:
    st = rng.bit_generator.state["state"]
    blob = json.dumps({k: np.asarray(v).tolist() for k, v in st.items()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def sample_outcome(state: FieldState, pair: KrausPair, rng: np.random.Generator) -> tuple[AtomicOutcome, FieldState]:
    """Draw one detection outcome and collapse the field accordingly."""
    p_g = outcome_probability(state, pair, "g")
    outcome = AtomicOutcome.G if rng.random() < p_g else AtomicOutcome.E
    return outcome, conditional_update(state, pair, outcome)


@dataclass(frozen=True)
class ResetResult:
    state: FieldState
    cycles: int


def reset_cavity(state: FieldState, mode: str = "exact-vacuum", rng: np.random.Generator | None = None,
                 tau: float = 0.3, cycle_cap: int = 200, vacuum_target: float = 0.999) -> ResetResult:
    """Empty the cavity before the next repetition.

    ``exact-vacuum`` simply returns the vacuum. ``atom-extraction`` sends
    ground-state atoms through one at a time and keeps the conditional
    state after each detection, whichever the outcome, until the vacuum
    population exceeds ``vacuum_target``.
    """
    if mode == "exact-vacuum":
        return ResetResult(vacuum_state(state.dim), 0)
    if mode != "atom-extraction":
        raise InvalidInputError(f"unknown reset mode {mode!r}")
    if rng is None:
        raise InvalidInputError("atom-extraction reset needs a random generator")
    pair = kraus_pair(tau, state.dim)
    cycles = 0
    while state.populations()[0] <= vacuum_target:
        if cycles >= cycle_cap:
            raise ResetFailedError(cycles, mean_n(state))
        _, state = sample_outcome(state, pair, rng)
        cycles += 1
    return ResetResult(state, cycles)


@dataclass(frozen=True)
class ClickRecord:
    config: RunConfig
    variant: str
    theta: float | None
    tau_grid: np.ndarray
    cycle: np.ndarray = field(repr=False)
    tau: np.ndarray = field(repr=False)
    outcome: np.ndarray = field(repr=False)  # 'g' / 'e' per atom row
    successes: np.ndarray = field(repr=False)  # per tau point: cycles with every atom in g
    totals: np.ndarray = field(repr=False)
    streams: tuple = ()
    reset_cycles: np.ndarray | None = field(default=None, repr=False)

    @property
    def atoms_per_cycle(self) -> int:
        return 2 if self.variant == ROTATED_2 else 1


@functools.lru_cache(maxsize=8)
def _pre_measurement_state(drive: DriveProfile, duration: float, dim: int, cfg: PropagatorConfig) -> FieldState:
    return generate_dce_field(duration, drive, cfg, dim).state


@functools.lru_cache(maxsize=8)
def _generation_matrix(drive: DriveProfile, duration: float, dim: int, cfg: PropagatorConfig) -> np.ndarray:
    # maps a t=0 field to the rotating-frame field at t=duration
    u = field_propagator(drive, dim, cfg).matrix(0.0, duration)
    return np.exp(1j * drive.omega0 * duration * np.arange(dim))[:, None] * u


def _branch_probabilities(state: FieldState, pair: KrausPair, n_atoms: int):
    """P(first = g) and P(second = g | first) for both first outcomes."""
    p1 = outcome_probability(state, pair, "g")
    if n_atoms == 1:
        return p1, None
    p2 = {}
    for out, p in (("g", p1), ("e", 1 - p1)):
        p2[out] = outcome_probability(conditional_update(state, pair, out), pair, "g") if p > 1e-15 else 0.0
    return p1, p2


def run_protocol(config: RunConfig, tau_grid, theta: float | None = None, variant: str = PLAIN) -> ClickRecord:
    """Simulate ``atoms_per_point`` repetitions at every tau of ``tau_grid``.

    A repetition resets the cavity, regenerates the field for
    ``generation_duration``, then sends one atom (two for the two-atom
    variant) and records the detections.
    """
    if variant not in VARIANTS:
        raise InvalidInputError(f"unknown variant {variant!r}")
    if variant == PLAIN:
        theta = None
    elif theta is None:
        theta = 0.0
    tau_grid = np.asarray(tau_grid, dtype=float)
    n_atoms = 2 if variant == ROTATED_2 else 1
    reps = config.atoms_per_point
    cycles, taus, outs = [], [], []
    successes = np.zeros(tau_grid.size, dtype=np.int64)
    reset_counts = []
    streams = []
    base_cycle = 0
    for i, tau in enumerate(tau_grid):
        pair = kraus_pair(tau, config.dim, theta)
        if config.reset_mode == "exact-vacuum":
            rng = make_rng(config.seed, i)
            streams.append(f"{i}:{stream_digest(rng)}")
            state = _pre_measurement_state(config.drive, config.generation_duration, config.dim, config.propagator)
            p1, p2 = _branch_probabilities(state, pair, n_atoms)
            u = rng.random((reps, n_atoms))
            first_g = u[:, 0] < p1
            block = [first_g]
            if n_atoms == 2:
                second_p = np.where(first_g, p2["g"], p2["e"])
                block.append(u[:, 1] < second_p)
            g = np.stack(block, axis=1)
        else:
            gen = _generation_matrix(config.drive, config.generation_duration, config.dim, config.propagator)
            g = np.empty((reps, n_atoms), dtype=bool)
            field_state = vacuum_state(config.dim)
            counts = np.empty(reps, dtype=np.int64)
            streams.append(f"{i}:{stream_digest(make_rng(config.seed, i, 0))}")
            for k in range(reps):
                rng = make_rng(config.seed, i, k)
                res = reset_cavity(field_state, "atom-extraction", rng, config.reset_tau,
                                   config.reset_cycle_cap, config.reset_vacuum_target)
                counts[k] = res.cycles
                field_state = FieldState(gen @ res.state.data)
                for j in range(n_atoms):
                    out, field_state = sample_outcome(field_state, pair, rng)
                    g[k, j] = out is AtomicOutcome.G
            reset_counts.append(counts)
        successes[i] = int(np.all(g, axis=1).sum())
        cycles.append(np.repeat(np.arange(base_cycle, base_cycle + reps), n_atoms))
        taus.append(np.full(reps * n_atoms, tau))
        outs.append(np.where(g.ravel(), "g", "e"))
        base_cycle += reps
    return ClickRecord(
        config, variant, theta, tau_grid,
        np.concatenate(cycles), np.concatenate(taus), np.concatenate(outs),
        successes, np.full(tau_grid.size, reps, dtype=np.int64), tuple(streams),
        np.stack(reset_counts) if reset_counts else None,
    )


def binomial_std_err(k, n):
    """sqrt(p(1-p)/n); for k = 0 or k = n the add-one rule
    p~ = (k+1)/(n+2), sqrt(p~(1-p~)/(n+2)) replaces the zero."""
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    p = k / n
    se = np.sqrt(p * (1 - p) / n)
    pt = (k + 1) / (n + 2)
    adj = np.sqrt(pt * (1 - pt) / (n + 2))
    return np.where((k == 0) | (k == n), adj, se)


def estimate_probabilities(record: ClickRecord) -> TauScan:
    if record.totals.size == 0 or np.any(record.totals == 0):
        raise EmptyRecordError("click record has grid points without detections")
    p = record.successes / record.totals
    return TauScan(record.tau_grid, p, record.variant, record.theta,
                   binomial_std_err(record.successes, record.totals))


def write_click_record(record: ClickRecord, path) -> Path:
    path = Path(path)
    theta = "" if record.theta is None else repr(float(record.theta))
    lines = [
        f"# {RECORD_VERSION}",
        f"# config: {json.dumps(record.config.to_dict(), sort_keys=True)}",
        f"# seed: {record.config.seed}",
        f"# variant: {record.variant}",
        f"# streams: {';'.join(record.streams)}",
        "cycle,tau,theta,outcome",
    ]
    tau_txt = {t: repr(float(t)) for t in record.tau_grid}
    lines.extend(f"{c},{tau_txt[t]},{theta},{o}"
                 for c, t, o in zip(record.cycle.tolist(), record.tau.tolist(), record.outcome.tolist()))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_click_counts(path) -> tuple[dict, TauScan]:
    """Parse a click record file back into its header and tau scan."""
    header, rows = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# ") and ":" in line:
                key, _, val = line[2:].partition(": ")
                header[key] = val
            elif line and not line.startswith("#") and not line.startswith("cycle,"):
                rows.append(line.split(","))
    if not rows:
        raise EmptyRecordError(f"{path} holds no click rows")
    variant = header["variant"]
    n_atoms = 2 if variant == ROTATED_2 else 1
    taus, succ, tot = [], {}, {}
    by_cycle: dict[int, list] = {}
    for c, t, _th, o in rows:
        by_cycle.setdefault(int(c), [float(t), True])
        by_cycle[int(c)][1] &= o == "g"
    for t, ok in by_cycle.values():
        if t not in tot:
            taus.append(t)
            tot[t] = succ[t] = 0
        tot[t] += 1
        succ[t] += int(ok)
    theta = rows[0][2]
    k = np.array([succ[t] for t in taus])
    n = np.array([tot[t] for t in taus])
    if n_atoms * n.sum() != len(rows):
        raise InvalidInputError(f"{path}: rows do not match {n_atoms} atom(s) per cycle")
    scan = TauScan(np.array(taus), k / n, variant, float(theta) if theta else None, binomial_std_err(k, n))
    header["config"] = json.loads(header["config"])
    return header, scan
