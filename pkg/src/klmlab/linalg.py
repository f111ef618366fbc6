"""Dense complex linear-algebra primitives.

Every matrix in klmlab is a plain ``numpy.ndarray`` of dtype ``complex128``.
Composite indices follow the Kronecker convention: for ``a`` of size ``dA``
and ``b`` of size ``dB``, the basis element ``|i>|j>`` sits at index
``i * dB + j``. Subsystem dimensions are passed explicitly where they
matter (partial transpose, negativity) instead of being attached to arrays.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np
import scipy.linalg

from klmlab.errors import DimensionError, DomainError, ValidationError

#: Eigenvalues above ``-PSD_TOL`` are treated as round-off and clamped to zero.
PSD_TOL = 1e-10
HERMITIAN_TOL = 1e-10


def _square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more matrices (or kets), left to right."""
    if not ops:
        raise ValueError("tensor() needs at least one operand")
    return reduce(np.kron, (np.asarray(o, dtype=complex) for o in ops))


def hermiticity_defect(a: np.ndarray) -> float:
    """Largest entrywise deviation of ``a`` from its conjugate transpose."""
    a = np.asarray(a)
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and hermiticity_defect(a) <= tol


def partial_transpose(rho: np.ndarray, dims: Sequence[int], subsystem: str = "A") -> np.ndarray:
    """Transpose the indices of one subsystem of a bipartite operator.

    Parameters
    ----------
    rho : ndarray
        Square operator on a ``dA * dB`` dimensional space.
    dims : (int, int)
        Subsystem dimensions ``(dA, dB)``.
    subsystem : {"A", "B"}
        Which factor to transpose.
    """
    rho = _square(rho, "rho")
    if len(dims) != 2:
        raise DimensionError(f"expected two subsystem dimensions, got {list(dims)}")
    d_a, d_b = (int(d) for d in dims)
    if d_a * d_b != rho.shape[0]:
        raise DimensionError(f"dims {d_a}x{d_b} do not match operator size {rho.shape[0]}")
    t = rho.reshape(d_a, d_b, d_a, d_b)
    if subsystem == "A":
        t = t.transpose(2, 1, 0, 3)
    elif subsystem == "B":
        t = t.transpose(0, 3, 2, 1)
    else:
        raise ValueError(f"subsystem must be 'A' or 'B', got {subsystem!r}")
    return t.reshape(d_a * d_b, d_a * d_b)


def trace_norm(a: np.ndarray) -> float:
    """Sum of singular values, ``Tr sqrt(a^dagger a)``.

    Hermitian input takes the eigenvalue route (sum of absolute eigenvalues),
    which is more accurate near rank deficiency than squaring the matrix.
    """
    a = _square(a)
    if is_hermitian(a, 1e-14):
        return float(np.sum(np.abs(np.linalg.eigvalsh(a))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def eig_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns real eigenvalues in ascending order and the matching column
    eigenvectors. Raises :class:`DomainError` if ``a`` is not Hermitian
    within ``tol``.
    """
    a = _square(a)
    defect = hermiticity_defect(a)
    if defect > tol:
        raise DomainError(f"matrix is not Hermitian (defect {defect:.3e})")
    return np.linalg.eigh(0.5 * (a + a.conj().T))


def matrix_sqrt(a: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Principal square root of a Hermitian positive-semidefinite matrix.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything more negative
    raises :class:`DomainError`. Eigenvalues below the round-off floor
    ``n * eps * max|w|`` are zeroed too, so rank-deficient inputs do not pick
    up ``sqrt(eps)``-sized spurious components.
    """
    w, v = eig_hermitian(a)
    if w.size == 0:
        return np.zeros_like(a, dtype=complex)
    if w[0] < -tol:
        raise DomainError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    floor = w.size * np.finfo(float).eps * np.max(np.abs(w))
    s = np.sqrt(np.where(w > floor, w, 0.0))
    return (v * s) @ v.conj().T


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling and squaring with a Pade kernel)."""
    return scipy.linalg.expm(_square(a))


def null_space(a: np.ndarray, tol: float = 1e-10) -> list[np.ndarray]:
    """Orthonormal basis of the right null space of a square matrix.

    A right-singular direction belongs to the null space when its singular
    value is below ``tol`` times the largest singular value.
    """
    a = _square(a)
    if a.size == 0:
        return []
    _, s, vh = np.linalg.svd(a)
    if s[0] == 0.0:
        return [row.conj() for row in np.eye(a.shape[0], dtype=complex)]
    return [vh[k].conj() for k in range(len(s)) if s[k] < tol * s[0]]


def validate_density_matrix(rho: np.ndarray, tol: float = 1e-8, psd_tol: float = 1e-7) -> np.ndarray:
    """Return ``rho`` as a complex array after checking it is a density matrix.

    Checks squareness, Hermiticity and unit trace within ``tol`` and a
    spectrum bounded below by ``-psd_tol``.
    """
    rho = _square(rho, "density matrix")
    if hermiticity_defect(rho) > tol:
        raise ValidationError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise ValidationError(f"density matrix trace is {tr.real:.12g}, expected 1")
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if w[0] < -psd_tol:
        raise ValidationError(f"density matrix has negative eigenvalue {w[0]:.3e}")
    return rho


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    return np.outer(psi, psi.conj())
