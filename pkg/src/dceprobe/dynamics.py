"""Driven-cavity and atom-cavity Hamiltonians and their time propagation.

Internal units: time in 1/omega0 with omega0 = 1 by default. Conversion to
laboratory microseconds goes through ``omega0_per_mcs`` in the experiment
configuration.

The modulated cavity Hamiltonian is periodic with the drive period
2*pi/eta, and so is the atom-cavity Hamiltonian (its extra terms are
static). :class:`Propagator` exploits this: the step unitaries on a time
grid anchored at t = 0 are computed once per phase of the period and then
reused, and whole periods are applied as one precomputed product.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import PropagationDivergedError, UnsupportedRegimeError
from .fock import (
    FieldState,
    ModeOperatorSet,
    SqueezeParams,
    fit_squeeze,
    make_mode_operators,
    vacuum_state,
    variance,
)

# atomic basis ordering: index 0 = |g>, index 1 = |e>
SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
SIGMA_PLUS = SIGMA_MINUS.T.copy()  # |e><g|
for _m in (SIGMA_Z, SIGMA_MINUS, SIGMA_PLUS):
    _m.setflags(write=False)

METHODS = ("midpoint", "cf4")


@dataclass(frozen=True)
class DriveProfile:
    """Cavity frequency modulation omega_F(t) = omega0 (1 + epsilon sin(eta t)).

    ``eta`` defaults to the parametric resonance 2*omega0.
    """

    omega0: float = 1.0
    epsilon: float = 1e-3
    eta: float | None = None

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.eta is None:
            object.__setattr__(self, "eta", 2.0 * self.omega0)
        if self.eta <= 0:
            raise ValueError("eta must be positive")

    @property
    def period(self) -> float:
        return 2 * math.pi / self.eta

    @property
    def resonant(self) -> bool:
        return math.isclose(self.eta, 2 * self.omega0, rel_tol=1e-12)


@dataclass(frozen=True)
class AtomParams:
    g: float = 5e-4
    delta: float = 0.0
    omega0: float = 1.0

    def __post_init__(self):
        if self.g < 0:
            raise ValueError("coupling g must be nonnegative")

    @property
    def omega_a(self) -> float:
        return self.omega0 + self.delta


@dataclass(frozen=True)
class ExternalPulse:
    """Classical pulse acting on the atom after it leaves the cavity.

    The pulse area ``rabi_frequency * duration`` defaults to pi/2, which
    gives the equal-weight atomic rotation used for quadrature readout.
    """

    rabi_frequency: float = math.pi / 2
    duration: float = 1.0
    omega_e: float = 1.0
    omega_a: float = 1.0

    def __post_init__(self):
        if self.area <= 0:
            raise ValueError("pulse area must be positive")

    @property
    def area(self) -> float:
        return self.rabi_frequency * self.duration

    @property
    def theta(self) -> float:
        return (self.omega_e - self.omega_a) * self.duration

    @classmethod
    def with_phase(cls, theta: float, omega_a: float = 1.0, duration: float = 1.0) -> ExternalPulse:
        return cls(math.pi / 2 / duration, duration, omega_a + theta / duration, omega_a)


@dataclass(frozen=True)
class PropagatorConfig:
    steps_per_period: int = 200
    method: str = "midpoint"
    unitarity_tol: float = 1e-8
    check_convergence: bool = False

    def __post_init__(self):
        if self.steps_per_period < 50:
            raise ValueError("steps_per_period must be >= 50")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")


def omega_F(t, drive: DriveProfile):
    return drive.omega0 * (1 + drive.epsilon * np.sin(drive.eta * t))


def xi_of_t(t, drive: DriveProfile):
    """Squeezing rate (d omega_F/dt) / (4 omega_F)."""
    e, h = drive.epsilon, drive.eta
    return e * h * np.cos(h * t) / (4 * (1 + e * np.sin(h * t)))


def field_hamiltonian(t: float, drive: DriveProfile, ops: ModeOperatorSet) -> np.ndarray:
    a2 = ops.a @ ops.a
    return omega_F(t, drive) * ops.n_hat + 1j * xi_of_t(t, drive) * (a2.conj().T - a2)


def joint_hamiltonian(t: float, drive: DriveProfile, atom: AtomParams, ops: ModeOperatorSet,
                      dce_on: bool = True) -> np.ndarray:
    """Atom-cavity Hamiltonian on the (atom x field) product space.

    Ordering is ``kron(atom, field)``. With ``dce_on=False`` the cavity term
    is the unmodulated omega0 * n.
    """
    n = ops.dim
    hc = field_hamiltonian(t, drive, ops) if dce_on else drive.omega0 * ops.n_hat
    h = np.kron(np.eye(2), hc)
    h += np.kron(0.5 * atom.omega_a * SIGMA_Z, np.eye(n))
    h += atom.g * (np.kron(SIGMA_MINUS, ops.a_dag) + np.kron(SIGMA_PLUS, ops.a))
    return h


def _exp_step(h: np.ndarray, dt: float) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * dt * w)) @ v.conj().T


_CF4_C = (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6)
_CF4_A = ((3 - 2 * math.sqrt(3)) / 12, (3 + 2 * math.sqrt(3)) / 12)


class Propagator:
    """Time-stepping propagator for a Hamiltonian periodic in ``period``.

    The grid is anchored at absolute time 0 with spacing
    ``period / cfg.steps_per_period``; off-grid start and end points are
    reached with one shortened step each.
    """

    def __init__(self, hamiltonian_fn: Callable[[float], np.ndarray], period: float,
                 cfg: PropagatorConfig | None = None):
        self.h = hamiltonian_fn
        self.cfg = cfg or PropagatorConfig()
        self.period = float(period)
        self.steps = self.cfg.steps_per_period
        self.dt = self.period / self.steps
        self._grid: dict[int, np.ndarray] = {}
        self._period_u = None
        self.worst_deviation = 0.0
        self.worst_step = None

    def step_unitary(self, t: float, h: float) -> np.ndarray:
        if self.cfg.method == "midpoint":
            u = _exp_step(self.h(t + 0.5 * h), h)
        else:
            h1, h2 = self.h(t + _CF4_C[0] * h), self.h(t + _CF4_C[1] * h)
            a1, a2 = _CF4_A
            u = _exp_step(a1 * h1 + a2 * h2, h) @ _exp_step(a2 * h1 + a1 * h2, h)
        self._check(u, t)
        return u

    def _check(self, u, t):
        dev = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
        if dev > self.worst_deviation:
            self.worst_deviation, self.worst_step = dev, t
        if not dev <= self.cfg.unitarity_tol:  # also catches nan
            raise PropagationDivergedError(
                f"step at t={t:.6g} lost unitarity by {dev:.3e}", worst_step=t, deviation=dev)

    def _grid_unitary(self, k: int) -> np.ndarray:
        j = k % self.steps
        u = self._grid.get(j)
        if u is None:
            u = self.step_unitary(j * self.dt, self.dt)
            self._grid[j] = u
        return u

    def period_unitary(self) -> np.ndarray:
        if self._period_u is None:
            u = self._grid_unitary(0)
            for j in range(1, self.steps):
                u = self._grid_unitary(j) @ u
            self._check(u, 0.0)
            self._period_u = u
        return self._period_u

    @staticmethod
    def _apply(u, data, density):
        if density:
            return u @ data @ u.conj().T
        return u @ data

    def evolve_array(self, data: np.ndarray, t0: float, t1: float, density: bool = False) -> np.ndarray:
        """Evolve a vector, a block of column vectors, or (``density=True``) a density matrix."""
        if t1 < t0:
            raise ValueError("t1 must be >= t0")
        if t1 == t0:
            return np.array(data, dtype=complex)
        dt, eps = self.dt, 1e-9
        out = np.array(data, dtype=complex)
        k0 = math.ceil(t0 / dt - eps)
        k1 = math.floor(t1 / dt + eps)
        if k0 > k1:
            return self._apply(self.step_unitary(t0, t1 - t0), out, density)
        if k0 * dt - t0 > eps * dt:
            out = self._apply(self.step_unitary(t0, k0 * dt - t0), out, density)
        k = k0
        while k < k1:
            if k % self.steps == 0 and k + self.steps <= k1:
                out = self._apply(self.period_unitary(), out, density)
                k += self.steps
            else:
                out = self._apply(self._grid_unitary(k), out, density)
                k += 1
        if t1 - k1 * dt > eps * dt:
            out = self._apply(self.step_unitary(k1 * dt, t1 - k1 * dt), out, density)
        return out

    def evolve(self, state: FieldState, t0: float, t1: float) -> FieldState:
        before = state.trace()
        out = FieldState(self.evolve_array(state.data, t0, t1, density=not state.is_pure),
                         state.tail_threshold)
        drift = abs(out.trace() - before)
        if not drift <= self.cfg.unitarity_tol:
            raise PropagationDivergedError(
                f"norm drifted by {drift:.3e} over [{t0}, {t1}]", worst_step=self.worst_step,
                deviation=drift)
        return out

    def matrix(self, t0: float, t1: float) -> np.ndarray:
        n = self.h(t0).shape[0]
        return self.evolve_array(np.eye(n, dtype=complex), t0, t1)


def propagate(state: FieldState, t0: float, t1: float, hamiltonian_fn, cfg: PropagatorConfig | None = None,
              period: float = 2 * math.pi) -> FieldState:
    """Evolve ``state`` from ``t0`` to ``t1`` under ``hamiltonian_fn(t)``.

    ``period`` must be a period of the Hamiltonian; it sets the step size
    through ``cfg.steps_per_period``.
    """
    cfg = cfg or PropagatorConfig()
    prop = Propagator(hamiltonian_fn, period, cfg)
    out = prop.evolve(state, t0, t1)
    if cfg.check_convergence:
        gap = step_halving_gap(state, t0, t1, hamiltonian_fn, cfg, period, reference=out)
        if gap > 10 * cfg.unitarity_tol:
            warnings.warn(f"step halving changes the propagated state by infidelity {gap:.3e}",
                          RuntimeWarning, stacklevel=2)
    return out


def fidelity(s1: FieldState, s2: FieldState) -> float:
    """|<psi1|psi2>|^2 for pure states, tr(rho1 rho2) otherwise."""
    if s1.is_pure and s2.is_pure:
        return float(abs(np.vdot(s1.data, s2.data)) ** 2)
    return float(np.real(np.einsum("ij,ji->", s1.density(), s2.density())))


def step_halving_gap(state, t0, t1, hamiltonian_fn, cfg: PropagatorConfig, period, reference=None) -> float:
    """Infidelity between runs at ``cfg.steps_per_period`` and twice that."""
    if reference is None:
        reference = Propagator(hamiltonian_fn, period, cfg).evolve(state, t0, t1)
    fine_cfg = PropagatorConfig(2 * cfg.steps_per_period, cfg.method, cfg.unitarity_tol)
    fine = Propagator(hamiltonian_fn, period, fine_cfg).evolve(state, t0, t1)
    return abs(1.0 - fidelity(reference, fine))


def to_rotating_frame(state: FieldState, omega_ref: float, t: float) -> FieldState:
    """Interaction-picture state exp(i omega_ref n t) |psi>."""
    ph = np.exp(1j * omega_ref * t * np.arange(state.dim))
    if state.is_pure:
        return FieldState(ph * state.data, state.tail_threshold)
    return FieldState(ph[:, None] * state.data * ph.conj()[None, :], state.tail_threshold)


def from_rotating_frame(state: FieldState, omega_ref: float, t: float) -> FieldState:
    return to_rotating_frame(state, omega_ref, -t)


def rotating_frame_observable(ops: ModeOperatorSet, omega_ref: float, t: float, base: np.ndarray) -> np.ndarray:
    """U0^dag base U0 with U0 = exp(-i omega_ref n t)."""
    ph = np.exp(-1j * omega_ref * t * np.arange(ops.dim))
    return ph.conj()[:, None] * base * ph[None, :]


def mean_time_dispersion(state: FieldState, ops: ModeOperatorSet, omega_ref: float, quadrature: str = "x",
                         samples: int = 128) -> float:
    """Variance of a freely rotating quadrature averaged over one period 2*pi/omega_ref."""
    if samples < 64:
        raise ValueError("use at least 64 sample points")
    base = {"x": ops.x, "p": ops.p}[quadrature]
    ts = np.arange(samples) * (2 * math.pi / omega_ref / samples)
    # uniform rectangle rule is exact for the trigonometric polynomial in t
    return float(np.mean([variance(state, rotating_frame_observable(ops, omega_ref, t, base)) for t in ts]))


def rwa_squeeze_oracle(t: float, drive: DriveProfile) -> SqueezeParams:
    """Rotating-wave squeezing of the resonantly driven cavity from vacuum.

    In the frame rotating at omega0 the resonant part of the drive is
    i (eps*eta/8)(a^dag^2 - a^2), which is S(xi) with r = eps*eta*t/4 and
    phi = pi (p is the squeezed quadrature).
    """
    if not drive.resonant:
        raise UnsupportedRegimeError("the RWA oracle needs eta = 2*omega0")
    return SqueezeParams(drive.epsilon * drive.eta * t / 4, math.pi)


@dataclass(frozen=True)
class GeneratedField:
    """Cavity field after modulated evolution from vacuum.

    ``state`` is in the frame rotating at omega0 (the frame in which the
    atomic readout acts); ``lab_state`` is the Schroedinger-picture state.
    """

    state: FieldState
    lab_state: FieldState
    time: float
    squeeze: SqueezeParams


def field_propagator(drive: DriveProfile, dim: int, cfg: PropagatorConfig | None = None) -> Propagator:
    ops = make_mode_operators(dim)
    return Propagator(lambda t: field_hamiltonian(t, drive, ops), drive.period, cfg)


def generate_dce_field(duration: float, drive: DriveProfile, cfg: PropagatorConfig | None = None,
                       dim: int = 40, propagator: Propagator | None = None) -> GeneratedField:
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    cfg = cfg or PropagatorConfig()
    prop = propagator or field_propagator(drive, dim, cfg)
    lab = prop.evolve(vacuum_state(dim), 0.0, duration)
    lab.require_truncation_safe()
    rot = to_rotating_frame(lab, drive.omega0, duration)
    return GeneratedField(rot, lab, duration, fit_squeeze(rot))
