"""Liouvillian construction, exact time propagation and steady states.

Density matrices are vectorized by column stacking,
``vec(rho) = rho.reshape(-1, order="F")``, so that
``vec(A @ X @ B) = kron(B.T, A) @ vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from klmlab.errors import (
    DimensionError,
    NonUniqueSteadyStateError,
    NumericalFailureError,
    ValidationError,
)
from klmlab.linalg import expm, hermiticity_defect, null_space, validate_density_matrix

TRACE_DRIFT_LIMIT = 1e-6
STEADY_NULL_TOL = 1e-10
STEADY_RESIDUAL_TOL = 1e-8
STEADY_NEGATIVITY_LIMIT = 1e-6


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return v.reshape(dim, dim, order="F")


@dataclass(frozen=True)
class Liouvillian:
    """Dense superoperator acting on column-stacked density matrices."""

    matrix: np.ndarray
    hilbert_dim: int

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.hilbert_dim)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``0, dt, ..., t_max`` with ``n_points`` entries (units of 1/Omega)."""

    t_max: float
    n_points: int = 500

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValidationError(f"t_max must be > 0, got {self.t_max}")
        if self.n_points < 2:
            raise ValidationError(f"n_points must be >= 2, got {self.n_points}")

    @property
    def dt(self) -> float:
        return self.t_max / (self.n_points - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_points)


def dissipator_rhs(H: np.ndarray, Ls: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """Master-equation right-hand side evaluated directly on ``rho``."""
    out = -1j * (H @ rho - rho @ H)
    for L in Ls:
        LdL = L.conj().T @ L
        out += L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def build_liouvillian(H: np.ndarray, Ls: Sequence[np.ndarray]) -> Liouvillian:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"Hamiltonian must be square, got shape {H.shape}")
    n = H.shape[0]
    if hermiticity_defect(H) > 1e-12 * max(1.0, float(np.max(np.abs(H), initial=0.0))):
        raise ValidationError("Hamiltonian is not Hermitian")
    eye = np.eye(n, dtype=complex)
    sup = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for L in Ls:
        L = np.asarray(L, dtype=complex)
        if L.shape != (n, n):
            raise DimensionError(f"jump operator shape {L.shape} does not match Hamiltonian ({n}, {n})")
        LdL = L.conj().T @ L
        sup += np.kron(L.conj(), L) - 0.5 * np.kron(eye, LdL) - 0.5 * np.kron(LdL.T, eye)
    return Liouvillian(sup, n)


def propagate(L: Liouvillian, rho0: np.ndarray, grid: TimeGrid) -> list[np.ndarray]:
    """Density matrices on every point of ``grid``.

    A single propagator ``exp(L * dt)`` is computed and applied repeatedly.
    Raises :class:`NumericalFailureError` if the trace drifts by more than
    ``TRACE_DRIFT_LIMIT``.
    """
    rho0 = validate_density_matrix(rho0)
    if rho0.shape[0] != L.hilbert_dim:
        raise DimensionError(f"rho0 has size {rho0.shape[0]}, Liouvillian acts on {L.hilbert_dim}")
    step = expm(L.matrix * grid.dt)
    v = vec(rho0)
    out = []
    for j in range(grid.n_points):
        if j:
            v = step @ v
        rho = unvec(v, L.hilbert_dim)
        drift = abs(np.trace(rho) - 1.0)
        if drift > TRACE_DRIFT_LIMIT:
            raise NumericalFailureError(f"trace drift {drift:.3e} at t = {j * grid.dt:g}")
        out.append(0.5 * (rho + rho.conj().T))
    return out


def steady_state(L: Liouvillian, tol: float = STEADY_NULL_TOL) -> np.ndarray:
    """Unique stationary density matrix from the null space of ``L``.

    Raises :class:`NonUniqueSteadyStateError` when the null space is not
    one-dimensional and :class:`NumericalFailureError` when the extracted
    state has a significantly negative eigenvalue or a large residual.
    """
    kernel = null_space(L.matrix, tol)
    if len(kernel) != 1:
        raise NonUniqueSteadyStateError(len(kernel))
    rho = unvec(kernel[0], L.hilbert_dim)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-14:
        raise NumericalFailureError("null vector has vanishing trace")
    rho = rho / tr
    w, v = np.linalg.eigh(rho)
    if w[0] < -STEADY_NEGATIVITY_LIMIT:
        raise NumericalFailureError(f"steady state has negative eigenvalue {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    rho = (v * w) @ v.conj().T
    rho /= np.trace(rho).real
    residual = np.linalg.norm(L.matrix @ vec(rho))
    if residual > STEADY_RESIDUAL_TOL:
        raise NumericalFailureError(f"steady-state residual {residual:.3e} exceeds {STEADY_RESIDUAL_TOL}")
    return rho


def spectral_gap(L: Liouvillian, tol: float = 1e-10) -> float:
    """Smallest nonzero ``|Re(lambda)|`` over the spectrum of ``L`` (0 if none)."""
    ev = np.linalg.eigvals(L.matrix)
    scale = max(1.0, float(np.max(np.abs(ev), initial=0.0)))
    decay = np.abs(ev.real)
    nonzero = decay[decay > tol * scale]
    return float(nonzero.min()) if nonzero.size else 0.0
