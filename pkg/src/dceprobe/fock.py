"""Truncated Fock-space linear algebra for a single field mode.

States are stored either as a pure amplitude vector or as a density matrix.
Pure vectors are kept for as long as the dynamics allows because every
propagation step then costs a matrix-vector product instead of a similarity
transform.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    NotHermitianError,
    TruncationError,
)

NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10
EIGEN_TOL = 1e-9
TAIL_THRESHOLD = 1e-6


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FieldState:
    """A field state on a Fock space truncated at ``dim`` levels.

    ``data`` is a length-``dim`` vector for a pure state or a ``dim x dim``
    density matrix. Use :meth:`density` to get the matrix view of either.
    """

    data: np.ndarray
    tail_threshold: float = TAIL_THRESHOLD

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim == 1:
            if data.shape[0] < 2:
                raise InvalidDimensionError("field dimension must be >= 2")
        elif data.ndim == 2:
            if data.shape[0] != data.shape[1] or data.shape[0] < 2:
                raise InvalidDimensionError(f"density matrix must be square with dim >= 2, got {data.shape}")
        else:
            raise InvalidDimensionError("state data must be a vector or a square matrix")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def populations(self) -> np.ndarray:
        if self.is_pure:
            return np.abs(self.data) ** 2
        return np.real(np.diag(self.data)).copy()

    def trace(self) -> float:
        if self.is_pure:
            return float(np.vdot(self.data, self.data).real)
        return float(np.trace(self.data).real)

    def purity(self) -> float:
        if self.is_pure:
            return self.trace() ** 2
        return float(np.real(np.vdot(self.data, self.data)))

    def tail_population(self) -> float:
        """Probability held in the top 10% of Fock levels (at least two, so
        parity-restricted states such as squeezed vacuum cannot hide there)."""
        k = min(max(2, math.ceil(0.1 * self.dim)), self.dim - 1)
        return float(self.populations()[-k:].sum())

    @property
    def truncation_safe(self) -> bool:
        return self.tail_population() < self.tail_threshold

    def normalized(self) -> FieldState:
        return FieldState(self.data / (math.sqrt(self.trace()) if self.is_pure else self.trace()),
                          self.tail_threshold)

    def validate(self, tol: float = NORM_TOL, eig_tol: float = EIGEN_TOL) -> FieldState:
        """Raise ``ValueError`` if the state breaks a representation invariant."""
        if self.is_pure:
            if abs(np.linalg.norm(self.data) - 1.0) > tol:
                raise ValueError(f"pure state norm deviates from 1 by {abs(np.linalg.norm(self.data) - 1):.3e}")
            return self
        rho = self.data
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > tol:
            raise ValueError(f"density matrix not Hermitian (max deviation {herm:.3e})")
        if abs(np.trace(rho).real - 1.0) > tol:
            raise ValueError("density matrix trace deviates from 1")
        if np.linalg.eigvalsh(rho).min() < -eig_tol:
            raise ValueError("density matrix has a negative eigenvalue")
        return self

    def require_truncation_safe(self) -> FieldState:
        if not self.truncation_safe:
            raise TruncationError(
                f"tail population {self.tail_population():.3e} exceeds {self.tail_threshold:.1e} at dim={self.dim}"
            )
        return self


@dataclass(frozen=True)
class ModeOperatorSet:
    dim: int
    a: np.ndarray = field(repr=False)
    a_dag: np.ndarray = field(repr=False)
    n_hat: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)


@dataclass(frozen=True)
class SqueezeParams:
    """Squeezing parameter xi = r * exp(i phi)."""

    r: float
    phi: float = 0.0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("squeezing magnitude r must be nonnegative")
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "phi", float(self.phi) % (2 * math.pi))

    @property
    def xi(self) -> complex:
        return self.r * complex(math.cos(self.phi), math.sin(self.phi))


@functools.lru_cache(maxsize=32)
def make_mode_operators(dim: int) -> ModeOperatorSet:
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"Fock dimension must be an integer >= 2, got {dim!r}")
    dim = int(dim)
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)
    a_dag = a.conj().T.copy()
    n_hat = np.diag(np.arange(dim, dtype=float)).astype(complex)
    x = (a + a_dag) / math.sqrt(2)
    p = (a - a_dag) / (math.sqrt(2) * 1j)
    return ModeOperatorSet(dim, *(_frozen(m) for m in (a, a_dag, n_hat, x, p)))


def quadrature_Q(ops: ModeOperatorSet, theta: float) -> np.ndarray:
    """Rotated quadrature (e^{-i theta} a - e^{i theta} a^dag) / (sqrt(2) i).

    ``Q(0)`` is ``p`` and ``Q(pi/2)`` is ``-x``.
    """
    ph = complex(math.cos(theta), -math.sin(theta))
    return (ph * ops.a - ph.conjugate() * ops.a_dag) / (math.sqrt(2) * 1j)


def fock_state(n: int, dim: int) -> FieldState:
    if not 0 <= n < dim:
        raise InvalidDimensionError(f"Fock level {n} outside truncation {dim}")
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return FieldState(psi)


def vacuum_state(dim: int) -> FieldState:
    make_mode_operators(dim)
    return fock_state(0, dim)


def _exp_antihermitian(gen: np.ndarray) -> np.ndarray:
    # exp(G) for anti-Hermitian G via the eigenbasis of the Hermitian iG
    w, v = np.linalg.eigh(1j * gen)
    return (v * np.exp(-1j * w)) @ v.conj().T


def squeeze_operator(sq: SqueezeParams, dim: int) -> np.ndarray:
    """S(xi) = exp[(xi* a^2 - xi a^dag^2) / 2]; phi = 0 squeezes x."""
    if math.sinh(sq.r) ** 2 >= dim / 10:
        raise TruncationError(f"r={sq.r} needs sinh^2 r < dim/10 = {dim / 10}")
    ops = make_mode_operators(dim)
    xi = sq.xi
    gen = 0.5 * (xi.conjugate() * ops.a @ ops.a - xi * ops.a_dag @ ops.a_dag)
    return _exp_antihermitian(gen)


def displacement_operator(alpha: complex, dim: int) -> np.ndarray:
    ops = make_mode_operators(dim)
    return _exp_antihermitian(alpha * ops.a_dag - np.conj(alpha) * ops.a)


def squeezed_vacuum(sq: SqueezeParams, dim: int) -> FieldState:
    return FieldState(squeeze_operator(sq, dim)[:, 0])


def displaced_squeezed_state(alpha: complex, sq: SqueezeParams, dim: int) -> FieldState:
    psi = displacement_operator(alpha, dim) @ squeeze_operator(sq, dim)[:, 0]
    return FieldState(psi / np.linalg.norm(psi))


def thermal_state(nbar: float, dim: int) -> FieldState:
    if nbar < 0:
        raise ValueError("mean thermal occupation must be nonnegative")
    if nbar >= dim / 10:
        raise TruncationError(f"nbar={nbar} needs nbar < dim/10 = {dim / 10}")
    if nbar == 0:
        return vacuum_state(dim)
    q = nbar / (1.0 + nbar)
    w = q ** np.arange(dim)
    return FieldState(np.diag(w / w.sum()).astype(complex))


def mixture(states, weights) -> FieldState:
    weights = np.asarray(weights, dtype=float)
    rho = sum(w * s.density() for w, s in zip(weights / weights.sum(), states))
    return FieldState(rho)


def _check_dims(state: FieldState, m: np.ndarray):
    if m.shape != (state.dim, state.dim):
        raise DimensionMismatchError(f"operator shape {m.shape} does not match state dim {state.dim}")


def expectation(state: FieldState, m: np.ndarray) -> complex:
    _check_dims(state, m)
    if state.is_pure:
        psi = state.data
        return complex(np.vdot(psi, m @ psi))
    return complex(np.einsum("ij,ji->", state.data, m))


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def variance(state: FieldState, m: np.ndarray) -> float:
    if not is_hermitian(m):
        raise NotHermitianError("variance needs a Hermitian observable")
    mean = expectation(state, m).real
    return expectation(state, m @ m).real - mean ** 2


def mean_n(state: FieldState) -> float:
    return float(state.populations() @ np.arange(state.dim))


def covariance_matrix(state: FieldState, ops: ModeOperatorSet | None = None) -> np.ndarray:
    """Symmetrised 2x2 covariance of (x, p)."""
    ops = ops or make_mode_operators(state.dim)
    x, p = ops.x, ops.p
    mx, mp = expectation(state, x).real, expectation(state, p).real
    sym = 0.5 * expectation(state, x @ p + p @ x).real - mx * mp
    return np.array([[variance(state, x), sym], [sym, variance(state, p)]])


def fit_squeeze(state: FieldState, ops: ModeOperatorSet | None = None) -> SqueezeParams:
    """Effective squeezing (r, phi) read off the state's second moments.

    r comes from the covariance eigenvalue ratio, phi from the phase of the
    centred second moment <a^2> - <a>^2 = -e^{i phi} sinh r cosh r.
    """
    ops = ops or make_mode_operators(state.dim)
    lam = np.linalg.eigvalsh(covariance_matrix(state, ops))
    r = 0.25 * math.log(lam[1] / lam[0]) if lam[0] > 0 else float("inf")
    m_a = expectation(state, ops.a)
    c2 = expectation(state, ops.a @ ops.a) - m_a ** 2
    phi = math.atan2(-c2.imag, -c2.real) if abs(c2) > 1e-15 else 0.0
    return SqueezeParams(r, phi)


def squeezed_quadrature_angle(sq: SqueezeParams) -> float:
    """The theta in [0, pi) for which Var Q(theta) is minimal on S(xi)|0>."""
    # Q(theta) minimal when e^{2i theta} = -e^{i phi}
    return ((sq.phi - math.pi) / 2.0) % math.pi


def min_quadrature_variance(state: FieldState, thetas) -> tuple[float, float]:
    """Brute-force minimum of Var Q(theta) over ``thetas``; returns (min, argmin)."""
    ops = make_mode_operators(state.dim)
    vals = [variance(state, quadrature_Q(ops, th)) for th in thetas]
    i = int(np.argmin(vals))
    return float(vals[i]), float(thetas[i])
