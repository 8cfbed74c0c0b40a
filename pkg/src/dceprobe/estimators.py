"""Moment readout from detection-probability curves P(tau).

The field moments sit in the low-order Taylor coefficients at tau = 0:

    P_g(tau)          = 1 - tau^2 <n> + ...
    P~_g(tau)         = (1 + sqrt(2) tau <Q>) / 2 + ...
    P~_gg(tau)        = (1 + 2 sqrt(2) tau <Q> + tau^2 (2<Q^2> - 1)) / 4 + ...

so <n> = -P_g''(0)/2, <Q> = sqrt(2) P~_g'(0) and <Q^2> = P~_gg''(0) + 1/2.
Derivatives come from a least-squares polynomial whose intercept is pinned
to the known tau = 0 value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import AtomParams, DriveProfile, ExternalPulse, PropagatorConfig
from .errors import FitFailedError, InvalidInputError
from .fock import FieldState, make_mode_operators, quadrature_Q, variance
from .measurement import (
    WeaknessReport,
    exact_atom_passage,
    kraus_pair,
    outcome_probability,
    pulse_phase_for,
    two_atom_probability,
    weakness_check,
)

PLAIN = "plain-1atom"
ROTATED_1 = "rotated-1atom"
ROTATED_2 = "rotated-2atom"
VARIANTS = (PLAIN, ROTATED_1, ROTATED_2)
INTERCEPTS = {PLAIN: 1.0, ROTATED_1: 0.5, ROTATED_2: 0.25}

DEFAULT_TAU_GRID = np.linspace(0.0, 0.05, 9)
MAX_CONDITION = 1e8


def default_tau_grid(tau_max: float = 0.05, points: int = 9) -> np.ndarray:
    return np.linspace(0.0, tau_max, points)


@dataclass(frozen=True)
class TauScan:
    tau_grid: np.ndarray
    probabilities: np.ndarray
    variant: str
    theta: float | None = None
    std_errs: np.ndarray | None = None

    def __post_init__(self):
        tau = np.asarray(self.tau_grid, dtype=float)
        p = np.asarray(self.probabilities, dtype=float)
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"unknown scan variant {self.variant!r}")
        if tau.ndim != 1 or tau.shape != p.shape:
            raise InvalidInputError("tau grid and probabilities must be 1-d arrays of equal length")
        if tau[0] != 0.0 or np.any(np.diff(tau) <= 0):
            raise InvalidInputError("tau grid must start at 0 and increase strictly")
        object.__setattr__(self, "tau_grid", tau)
        object.__setattr__(self, "probabilities", p)
        if self.std_errs is not None:
            s = np.asarray(self.std_errs, dtype=float)
            if s.shape != p.shape or np.any(s < 0):
                raise InvalidInputError("std_errs must be nonnegative and match the grid")
            object.__setattr__(self, "std_errs", s)

    @property
    def intercept(self) -> float:
        return INTERCEPTS[self.variant]


@dataclass(frozen=True)
class DerivativeEstimate:
    d1_at_0: float
    d2_at_0: float
    covariance: np.ndarray = field(repr=False)
    fit_degree: int = 4
    condition_flag: WeaknessReport | None = None

    @property
    def d1_err(self) -> float:
        return math.sqrt(max(self.covariance[0, 0], 0.0))

    @property
    def d2_err(self) -> float:
        return math.sqrt(max(self.covariance[1, 1], 0.0))


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    std_err: float
    derivatives: DerivativeEstimate = field(repr=False)

    def __float__(self):
        return self.value


def scan_probability(state: FieldState, variant: str, tau_grid=DEFAULT_TAU_GRID, mode: str = "kraus",
                     theta: float | None = None, atom: AtomParams | None = None,
                     drive: DriveProfile | None = None, cfg: PropagatorConfig | None = None,
                     dce_on: bool = True, t_start: float = 0.0) -> TauScan:
    """Detection probability at every tau of ``tau_grid``.

    Each grid point starts from the same input ``state``. ``mode="kraus"``
    uses the closed-form transformers; ``mode="exact"`` propagates the
    joint atom-field system for t_int = tau / g, with the cavity drive
    still running when ``dce_on``.
    """
    if variant not in VARIANTS:
        raise InvalidInputError(f"unknown scan variant {variant!r}")
    if variant != PLAIN and theta is None:
        theta = 0.0
    if variant == PLAIN:
        theta = None
    tau_grid = np.asarray(tau_grid, dtype=float)
    probs = np.empty_like(tau_grid)
    if mode == "kraus":
        for i, tau in enumerate(tau_grid):
            pair = kraus_pair(tau, state.dim, theta)
            if variant == ROTATED_2:
                probs[i] = two_atom_probability(state, pair, "g")
            else:
                probs[i] = outcome_probability(state, pair, "g")
    elif mode == "exact":
        atom = atom or AtomParams()
        drive = drive or DriveProfile()
        if atom.g <= 0:
            raise InvalidInputError("exact scans need a nonzero coupling")
        pulse = None if theta is None else ExternalPulse.with_phase(pulse_phase_for(theta), atom.omega_a)
        for i, tau in enumerate(tau_grid):
            t_int = tau / atom.g
            first = exact_atom_passage(state, atom, drive, t_int, pulse, "g", cfg, dce_on, t_start)
            p = first.probability
            if variant == ROTATED_2:
                p *= exact_atom_passage(first.state, atom, drive, t_int, pulse, "g", cfg, dce_on,
                                        first.t_end).probability
            probs[i] = p
    else:
        raise InvalidInputError(f"mode must be 'kraus' or 'exact', got {mode!r}")
    return TauScan(tau_grid, probs, variant, theta)


def fit_derivatives(scan: TauScan, degree: int = 4, mean_n: float | None = None,
                    weak_threshold: float = 0.1) -> DerivativeEstimate:
    """First and second derivative at tau = 0 from a pinned-intercept polynomial fit.

    With ``std_errs`` the fit is weighted by 1/sigma^2 and the returned
    covariance is the propagated parameter covariance; without them the
    curve is treated as exact and the covariance is zero.
    """
    tau = scan.tau_grid
    if tau.size < 5:
        raise FitFailedError("need at least 5 grid points")
    keep = tau > 0
    if keep.sum() < degree:
        raise FitFailedError(f"need at least {degree} nonzero tau points for a degree-{degree} fit")
    tau_max = tau[-1]
    u = tau[keep] / tau_max
    design = np.stack([u ** (k + 1) for k in range(degree)], axis=1)
    y = scan.probabilities[keep] - scan.intercept
    if scan.std_errs is not None:
        sig = scan.std_errs[keep]
        if np.any(sig <= 0):
            raise FitFailedError("weighted fit needs strictly positive std errors")
        w = 1.0 / sig
    else:
        w = np.ones_like(u)
    dw = design * w[:, None]
    cond = np.linalg.cond(dw)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise FitFailedError(f"fit condition number {cond:.2e} too large; use a different tau grid")
    coef, *_ = np.linalg.lstsq(dw, y * w, rcond=None)
    # d^k/dtau^k at 0 of sum c_k (tau/tau_max)^k
    scale = np.array([1.0 / tau_max, 2.0 / tau_max ** 2])
    d1, d2 = coef[0] * scale[0], coef[1] * scale[1]
    if scan.std_errs is not None:
        cov_u = np.linalg.inv(dw.T @ dw)[:2, :2]
        cov = cov_u * np.outer(scale, scale)
    else:
        cov = np.zeros((2, 2))
    if mean_n is None and scan.variant == PLAIN:
        mean_n = max(-0.5 * d2, 0.0)
    flag = None if mean_n is None else weakness_check(tau_max, float(mean_n), weak_threshold)
    return DerivativeEstimate(float(d1), float(d2), cov, degree, flag)


def _require(scan: TauScan, variant: str):
    if scan.variant != variant:
        raise InvalidInputError(f"expected a {variant} scan, got {scan.variant}")


def estimate_mean_n(scan: TauScan) -> MomentEstimate:
    """<n> = -P_g''(0) / 2."""
    _require(scan, PLAIN)
    d = fit_derivatives(scan)
    return MomentEstimate(-0.5 * d.d2_at_0, 0.5 * d.d2_err, d)


def estimate_Q_mean(scan: TauScan) -> MomentEstimate:
    """<Q(theta)> = sqrt(2) P~_g'(0)."""
    _require(scan, ROTATED_1)
    d = fit_derivatives(scan)
    return MomentEstimate(math.sqrt(2) * d.d1_at_0, math.sqrt(2) * d.d1_err, d)


def estimate_Q2(scan: TauScan) -> MomentEstimate:
    """<Q(theta)^2> = P~_gg''(0) + 1/2."""
    _require(scan, ROTATED_2)
    d = fit_derivatives(scan)
    return MomentEstimate(d.d2_at_0 + 0.5, d.d2_err, d)


@dataclass(frozen=True)
class WitnessRecord:
    min_variance: float
    theta_at_min: float
    squeezed: bool
    thetas: np.ndarray = field(repr=False)
    variances: np.ndarray = field(repr=False)
    pipeline: str = "direct"


def quadrature_variance_via_clicks(state: FieldState, theta: float, tau_grid=DEFAULT_TAU_GRID) -> float:
    q = estimate_Q_mean(scan_probability(state, ROTATED_1, tau_grid, theta=theta)).value
    q2 = estimate_Q2(scan_probability(state, ROTATED_2, tau_grid, theta=theta)).value
    return q2 - q * q


def squeezing_witness(state: FieldState, theta_grid=None, pipeline: str = "direct", margin: float = 0.02,
                      tau_grid=DEFAULT_TAU_GRID) -> WitnessRecord:
    """Minimum over theta of Var Q(theta); squeezed when below 1/2 - margin."""
    if theta_grid is None:
        theta_grid = np.arange(16) * (math.pi / 16)
    thetas = np.asarray(theta_grid, dtype=float)
    if thetas.size < 16:
        raise InvalidInputError("theta grid needs at least 16 points")
    if pipeline == "direct":
        ops = make_mode_operators(state.dim)
        var = np.array([variance(state, quadrature_Q(ops, th)) for th in thetas])
    elif pipeline == "via-estimators":
        var = np.array([quadrature_variance_via_clicks(state, th, tau_grid) for th in thetas])
    else:
        raise InvalidInputError(f"unknown pipeline {pipeline!r}")
    i = int(np.argmin(var))
    return WitnessRecord(float(var[i]), float(thetas[i]), bool(var[i] < 0.5 - margin), thetas, var, pipeline)
