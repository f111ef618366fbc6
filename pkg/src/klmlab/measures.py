"""Entanglement and state-quality diagnostics: negativity, purity,
population and Uhlmann fidelity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from klmlab.errors import DomainError
from klmlab.linalg import matrix_sqrt, partial_transpose, trace_norm
from klmlab.model import DIMS

# tolerance for inputs coming out of a long propagation
PSD_INPUT_TOL = 1e-7


def negativity(rho: np.ndarray, dims: Sequence[int] = DIMS) -> float:
    """``(||rho^{T_A}||_1 - 1) / 2``, with round-off below zero clamped."""
    value = 0.5 * (trace_norm(partial_transpose(rho, dims, "A")) - 1.0)
    if -1e-10 < value < 0.0:
        return 0.0
    return value


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.real(np.vdot(rho.conj().T, rho)))


def population(rho: np.ndarray, psi: np.ndarray) -> float:
    psi = np.asarray(psi, dtype=complex).ravel()
    return float(np.real(psi.conj() @ np.asarray(rho) @ psi))


def _pure_vector(target: np.ndarray, tol: float = 1e-10) -> Optional[np.ndarray]:
    """State vector of ``target`` if it is a pure density matrix, else None."""
    if target.ndim == 1:
        return target / np.linalg.norm(target)
    w, v = np.linalg.eigh(0.5 * (target + target.conj().T))
    if abs(w[-1] - 1.0) < tol and abs(np.sum(w[:-1])) < tol:
        return v[:, -1]
    return None


def fidelity(rho: np.ndarray, target: np.ndarray, general: bool = False) -> float:
    """Uhlmann fidelity ``Tr sqrt(sqrt(target) rho sqrt(target))``.

    ``target`` may be a ket or a density matrix. Pure targets use the
    closed form ``sqrt(<psi|rho|psi>)`` unless ``general`` is set.
    """
    rho = np.asarray(rho, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -PSD_INPUT_TOL:
        raise DomainError("rho is not positive semidefinite")
    psi = None if general else _pure_vector(target)
    if psi is not None:
        return float(np.sqrt(np.clip(population(rho, psi), 0.0, 1.0)))
    if target.ndim == 1:
        target = np.outer(target, target.conj())
    root = matrix_sqrt(target, PSD_INPUT_TOL)
    inner = root @ rho @ root
    inner = 0.5 * (inner + inner.conj().T)
    value = np.trace(matrix_sqrt(inner, PSD_INPUT_TOL)).real
    return float(np.clip(value, 0.0, 1.0))


@dataclass
class MeasureRecord:
    time: float
    negativity: float
    purity: float
    populations: dict[str, float] = field(default_factory=dict)
    fidelity: Optional[float] = None


def measure_all(
    rho: np.ndarray,
    time: float,
    states: dict[str, np.ndarray],
    target: Optional[np.ndarray] = None,
) -> MeasureRecord:
    """Evaluate every diagnostic on one density matrix."""
    return MeasureRecord(
        time=time,
        negativity=negativity(rho),
        purity=purity(rho),
        populations={k: population(rho, psi) for k, psi in states.items()},
        fidelity=None if target is None else fidelity(rho, target),
    )
