"""Atom-passage measurement of the cavity field.

A ground-state atom crosses the cavity, optionally receives a classical
pi/2 pulse, and is detected in |g> or |e>. Seen from the field this is a
two-outcome instrument with Kraus operators K_g, K_e. The closed-form
resonant Jaynes-Cummings transformers live here alongside an exact route
that propagates the joint atom-field state and projects the atom.

Field states handed to this module are expressed in the frame rotating at
omega0, i.e. the interaction picture of the Jaynes-Cummings coupling.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import (
    AtomParams,
    DriveProfile,
    ExternalPulse,
    Propagator,
    PropagatorConfig,
    SIGMA_MINUS,
    SIGMA_PLUS,
    joint_hamiltonian,
)
from .errors import ImpossibleOutcomeError, InvalidInputError
from .fock import FieldState, make_mode_operators, mean_n

PROBABILITY_FLOOR = 1e-12


class AtomicOutcome(str, enum.Enum):
    G = "g"
    E = "e"

    @property
    def index(self) -> int:
        return 0 if self is AtomicOutcome.G else 1


@dataclass(frozen=True, eq=False)
class KrausPair:
    """Field transformers for one atom passage at strength tau = g * t_int.

    ``theta`` is None for the bare pair and holds the pulse phase for the
    rotated pair.
    """

    dim: int
    K_g: np.ndarray
    K_e: np.ndarray
    tau: float
    theta: float | None = None

    def __post_init__(self):
        for m in (self.K_g, self.K_e):
            m.setflags(write=False)

    def __getitem__(self, outcome) -> np.ndarray:
        return self.K_g if AtomicOutcome(outcome) is AtomicOutcome.G else self.K_e

    @property
    def rotated(self) -> bool:
        return self.theta is not None

    def completeness_error(self) -> float:
        s = self.K_g.conj().T @ self.K_g + self.K_e.conj().T @ self.K_e
        return float(np.max(np.abs(s - np.eye(self.dim))))


@functools.lru_cache(maxsize=256)
def jc_kraus(tau: float, dim: int) -> KrausPair:
    """Resonant Jaynes-Cummings transformers.

    K_g = cos(tau sqrt(n)),  K_e = -i a sin(tau sqrt(n)) / sqrt(n)

    K_e maps |n> to -i sin(tau sqrt(n)) |n-1>; the n = 0 column vanishes, so
    the removable singularity never has to be evaluated.
    """
    if tau < 0:
        raise InvalidInputError("tau must be nonnegative")
    make_mode_operators(dim)
    root_n = np.sqrt(np.arange(dim, dtype=float))
    k_g = np.diag(np.cos(tau * root_n)).astype(complex)
    k_e = np.diag(-1j * np.sin(tau * root_n[1:]), 1)
    return KrausPair(dim, k_g, k_e, float(tau))


@functools.lru_cache(maxsize=1024)
def rotated_kraus(pair: KrausPair, theta: float) -> KrausPair:
    """Kraus pair after the atomic pi/2 pulse with phase ``theta``.

    K~_g = (K_g + e^{-i theta} K_e) / sqrt(2)
    K~_e = (K_e - e^{i theta} K_g) / sqrt(2)

    The minus sign in K~_e is what makes the mixing matrix unitary, so that
    K~_g^dag K~_g + K~_e^dag K~_e = 1.
    """
    if pair.rotated:
        raise InvalidInputError("Kraus pair is already rotated")
    c = complex(math.cos(theta), math.sin(theta))
    s = 1 / math.sqrt(2)
    k_g = s * (pair.K_g + c.conjugate() * pair.K_e)
    k_e = s * (pair.K_e - c * pair.K_g)
    return KrausPair(pair.dim, k_g, k_e, pair.tau, float(theta))


def kraus_pair(tau: float, dim: int, theta: float | None = None) -> KrausPair:
    pair = jc_kraus(float(tau), int(dim))
    return pair if theta is None else rotated_kraus(pair, float(theta))


def external_rotation_unitary(theta: float, area: float = math.pi / 2) -> np.ndarray:
    """exp[-i (area/2) (sigma_- e^{i theta} + sigma_+ e^{-i theta})] in the (g, e) basis."""
    c = complex(math.cos(theta), math.sin(theta))
    gen = SIGMA_MINUS * c + SIGMA_PLUS * c.conjugate()
    return math.cos(area / 2) * np.eye(2) - 1j * math.sin(area / 2) * gen


def pulse_phase_for(theta: float) -> float:
    """Pulse phase whose rotation reproduces ``rotated_kraus(., theta)``.

    Propagating the atom through the pulse unitary gives
    K~_g = (K_g - i e^{i phase} K_e)/sqrt(2); matching the readout phase
    theta requires phase = pi/2 - theta. The map is its own inverse.
    """
    return math.pi / 2 - theta


def apply_atomic_unitary(pair: KrausPair, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Kraus operators after an atomic unitary ``u`` acts between passage and detection."""
    return (u[0, 0] * pair.K_g + u[0, 1] * pair.K_e,
            u[1, 0] * pair.K_g + u[1, 1] * pair.K_e)


def povm_element(pair: KrausPair, outcome) -> np.ndarray:
    k = pair[outcome]
    return k.conj().T @ k


def _unnormalized(state: FieldState, k: np.ndarray) -> np.ndarray:
    if state.is_pure:
        return k @ state.data
    return k @ state.data @ k.conj().T


def _weight(state: FieldState, data: np.ndarray) -> float:
    if state.is_pure:
        return float(np.vdot(data, data).real)
    return float(np.trace(data).real)


def outcome_probability(state: FieldState, pair: KrausPair, outcome) -> float:
    p = _weight(state, _unnormalized(state, pair[outcome]))
    return min(1.0, max(0.0, p))


def conditional_update(state: FieldState, pair: KrausPair, outcome,
                       floor: float = PROBABILITY_FLOOR) -> FieldState:
    outcome = AtomicOutcome(outcome)
    out = _unnormalized(state, pair[outcome])
    p = _weight(state, out)
    if p <= floor:
        raise ImpossibleOutcomeError(outcome.value, p)
    return FieldState(out / (math.sqrt(p) if state.is_pure else p), state.tail_threshold)


def two_atom_probability(state: FieldState, pair: KrausPair, outcome,
                         between: Callable[[FieldState], FieldState] | None = None) -> float:
    """Probability that two successive atoms both give ``outcome``.

    Without ``between`` the atoms follow each other immediately and this is
    <K^dag K^dag K K>. ``between`` maps the conditional field after the
    first atom to the field met by the second (e.g. further modulated
    evolution); the probability is then built from the chain rule.
    """
    k = pair[outcome]
    if between is None:
        kk = k @ k
        return min(1.0, max(0.0, _weight(state, _unnormalized(state, kk))))
    p1 = outcome_probability(state, pair, outcome)
    if p1 <= PROBABILITY_FLOOR:
        return 0.0
    return p1 * outcome_probability(between(conditional_update(state, pair, outcome)), pair, outcome)


@dataclass(frozen=True)
class WeaknessReport:
    value: float
    flagged: bool
    threshold: float


def weakness_check(tau: float, state: FieldState | float, threshold: float = 0.1) -> WeaknessReport:
    """tau * <n>, flagged when above ``threshold`` (weak-coupling expansion unsafe)."""
    n = state if isinstance(state, (int, float)) else mean_n(state)
    v = float(tau * n)
    return WeaknessReport(v, v > threshold, threshold)


# exact joint atom-field route


def embed_ground_atom(field: FieldState) -> FieldState:
    g = np.array([1.0, 0.0], dtype=complex)
    if field.is_pure:
        return FieldState(np.kron(g, field.data), field.tail_threshold)
    return FieldState(np.kron(np.outer(g, g), field.data), field.tail_threshold)


def _frame_phases(dim: int, omega0: float, t: float) -> np.ndarray:
    # exp(i omega0 (n + sigma_z/2) t) on the kron(atom, field) basis
    n = np.arange(dim)
    return np.concatenate([np.exp(1j * omega0 * t * (n - 0.5)), np.exp(1j * omega0 * t * (n + 0.5))])


def _phase(state: FieldState, ph: np.ndarray) -> FieldState:
    if state.is_pure:
        return FieldState(ph * state.data, state.tail_threshold)
    return FieldState(ph[:, None] * state.data * ph.conj()[None, :], state.tail_threshold)


@functools.lru_cache(maxsize=16)
def joint_propagator(drive: DriveProfile, atom: AtomParams, dim: int, cfg: PropagatorConfig,
                     dce_on: bool) -> Propagator:
    ops = make_mode_operators(dim)
    return Propagator(lambda t: joint_hamiltonian(t, drive, atom, ops, dce_on), drive.period, cfg)


def evolve_joint(joint: FieldState, atom: AtomParams, drive: DriveProfile, t_start: float, t_end: float,
                 cfg: PropagatorConfig | None = None, dce_on: bool = True) -> FieldState:
    """Evolve an interaction-picture joint state from ``t_start`` to ``t_end``.

    Propagation runs in the Schroedinger picture; the frame rotating with
    omega0 (n + sigma_z/2) is removed before and restored after.
    """
    cfg = cfg or PropagatorConfig()
    dim = joint.dim // 2
    prop = joint_propagator(drive, atom, dim, cfg, dce_on)
    lab = _phase(joint, _frame_phases(dim, drive.omega0, t_start).conj())
    lab = prop.evolve(lab, t_start, t_end)
    return _phase(lab, _frame_phases(dim, drive.omega0, t_end))


def project_atom(joint: FieldState, outcome, pulse: ExternalPulse | None = None,
                 floor: float = PROBABILITY_FLOOR) -> tuple[float, FieldState]:
    """Apply the optional pulse, project the atom, and trace it out."""
    outcome = AtomicOutcome(outcome)
    dim = joint.dim // 2
    data = joint.data
    if pulse is not None:
        u = np.kron(external_rotation_unitary(pulse.theta, pulse.area), np.eye(dim))
        data = u @ data if joint.is_pure else u @ data @ u.conj().T
    sl = slice(outcome.index * dim, (outcome.index + 1) * dim)
    block = data[sl] if joint.is_pure else data[sl, sl]
    p = float(np.vdot(block, block).real) if joint.is_pure else float(np.trace(block).real)
    if p <= floor:
        raise ImpossibleOutcomeError(outcome.value, p)
    cond = block / (math.sqrt(p) if joint.is_pure else p)
    return min(1.0, p), FieldState(cond, joint.tail_threshold)


@dataclass(frozen=True)
class PassageResult:
    probability: float
    state: FieldState
    t_end: float


def exact_atom_passage(field_state: FieldState, atom: AtomParams, drive: DriveProfile, t_int: float,
                       pulse: ExternalPulse | None = None, outcome="g", cfg: PropagatorConfig | None = None,
                       dce_on: bool = True, t_start: float = 0.0) -> PassageResult:
    """One atom passage computed by propagating the joint atom-field state.

    The atom enters in |g> at ``t_start`` and interacts for ``t_int``. The
    returned field state is conditioned on ``outcome`` and expressed in the
    rotating frame at ``t_start + t_int``.
    """
    if t_int < 0:
        raise InvalidInputError("interaction time must be nonnegative")
    joint = evolve_joint(embed_ground_atom(field_state), atom, drive, t_start, t_start + t_int, cfg, dce_on)
    p, cond = project_atom(joint, outcome, pulse)
    return PassageResult(p, cond, t_start + t_int)
