"""Two-atom Rydberg model: parameters, Hamiltonians, jump operators, states.

Each atom has three levels ``|0>, |1>, |r>`` with local indices 0, 1, 2.
Two-atom basis states are ordered atom-1-major, ``index = 3 * i1 + i2``::

    0:|00>  1:|01>  2:|0r>  3:|10>  4:|11>  5:|1r>  6:|r0>  7:|r1>  8:|rr>

All rates are dimensionless ratios to the laser Rabi frequency Omega,
which is fixed to 1.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from klmlab.errors import ValidationError
from klmlab.linalg import tensor

LEVELS = ("0", "1", "r")
LOCAL_DIM = 3
DIM = LOCAL_DIM * LOCAL_DIM
DIMS = (LOCAL_DIM, LOCAL_DIM)

BASIS_LABELS = tuple(a + b for a in LEVELS for b in LEVELS)
GROUND_LABELS = ("00", "01", "10", "11")
RYDBERG_LABELS = tuple(lbl for lbl in BASIS_LABELS if "r" in lbl)

_I3 = np.eye(LOCAL_DIM, dtype=complex)


def antiblockade_urr(Delta: float) -> float:
    """Interaction strength ``2*Delta - 2/Delta`` that cancels the |rr> shift."""
    if Delta == 0:
        raise ZeroDivisionError("antiblockade condition undefined for Delta = 0")
    return 2.0 * Delta - 2.0 / Delta


@dataclass(frozen=True)
class SystemParams:
    """Model parameters in units of the laser Rabi frequency.

    ``omega_mw`` and ``u_rr`` may be left as ``None``: the microwave Rabi
    frequency then follows the dark-state condition ``delta = m * omega_mw``
    and the interaction sits at the antiblockade value. Use
    :attr:`microwave_rabi` and :attr:`interaction` for the resolved values.

    ``stark_compensation`` adds ``-(|0><0|_1 + |1><1|_2) / Delta`` to the
    full Hamiltonian, i.e. the single-atom light shifts that the effective
    model assumes are removed by auxiliary levels.
    """

    Delta: float = 70.0
    delta: float = 0.02
    gamma: float = 0.05
    m: float = 1.0
    omega_mw: Optional[float] = None
    u_rr: Optional[float] = None
    stark_compensation: bool = True
    omega_drive: float = 1.0

    def __post_init__(self):
        if self.omega_drive != 1.0:
            raise ValidationError("omega_drive is the unit of frequency and must be 1")
        if not self.Delta > 0:
            raise ValidationError(f"Delta must be > 0, got {self.Delta}")
        if not self.gamma >= 0:
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}")
        for name in ("Delta", "delta", "gamma", "m"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.omega_mw is None and self.m == 0:
            if self.delta != 0:
                raise ValidationError(
                    "m = 0 requires delta = 0 for the dark-state condition delta = m * omega_mw"
                )
            raise ValidationError("m = 0 leaves omega_mw undetermined; set it explicitly")

    @property
    def microwave_rabi(self) -> float:
        return self.delta / self.m if self.omega_mw is None else float(self.omega_mw)

    @property
    def interaction(self) -> float:
        return antiblockade_urr(self.Delta) if self.u_rr is None else float(self.u_rr)

    @property
    def omega_eff(self) -> float:
        return 2.0 / self.Delta

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def resolved(self) -> dict:
        """All parameters with derived quantities filled in."""
        d = self.to_dict()
        d.update(omega_mw=self.microwave_rabi, u_rr=self.interaction, omega_eff=self.omega_eff)
        return d


def basis_index(label: str) -> int:
    """Composite index of a two-atom basis label such as ``"r1"``."""
    try:
        return BASIS_LABELS.index(label)
    except ValueError:
        raise ValidationError(f"unknown basis label {label!r}") from None


def basis_ket(label: str) -> np.ndarray:
    v = np.zeros(DIM, dtype=complex)
    v[basis_index(label)] = 1.0
    return v


def _local(bra: int, ket: int) -> np.ndarray:
    """Single-atom operator |bra><ket| (first argument is the output level)."""
    op = np.zeros((LOCAL_DIM, LOCAL_DIM), dtype=complex)
    op[bra, ket] = 1.0
    return op


def _on_atom1(op):
    return tensor(op, _I3)


def _on_atom2(op):
    return tensor(_I3, op)


def _proj(out: str, inp: str) -> np.ndarray:
    return np.outer(basis_ket(out), basis_ket(inp).conj())


def build_full_hamiltonian(p: SystemParams) -> np.ndarray:
    """Rotating-frame Hamiltonian of the two driven three-level atoms."""
    g0, g1, r = 0, 1, 2
    coupling = (
        _on_atom1(_local(r, g0))
        + _on_atom2(_local(r, g1))
        + p.microwave_rabi * (_on_atom1(_local(g1, g0)) - _on_atom2(_local(g1, g0)))
    )
    h = coupling + coupling.conj().T
    h += -p.Delta * (_on_atom1(_local(r, r)) + _on_atom2(_local(r, r)))
    h += p.delta * (_on_atom1(_local(g1, g1)) - _on_atom2(_local(g0, g0)))
    h += p.interaction * _proj("rr", "rr")
    if p.stark_compensation:
        h -= (_on_atom1(_local(g0, g0)) + _on_atom2(_local(g1, g1))) / p.Delta
    return h


def build_full_lindblads(p: SystemParams) -> list[np.ndarray]:
    """Spontaneous emission |r> -> |0>, |1> on each atom at rate gamma/2."""
    amp = math.sqrt(p.gamma / 2.0)
    return [
        amp * _on_atom1(_local(0, 2)),
        amp * _on_atom1(_local(1, 2)),
        amp * _on_atom2(_local(0, 2)),
        amp * _on_atom2(_local(1, 2)),
    ]


def build_effective_hamiltonian(p: SystemParams) -> np.ndarray:
    """Hamiltonian after adiabatic elimination of single Rydberg excitations."""
    mw = p.microwave_rabi
    coupling = p.omega_eff * _proj("rr", "01") + mw * np.outer(
        basis_ket("00") - basis_ket("11"), basis_ket("10") - basis_ket("01")
    )
    h = coupling + coupling.conj().T
    h += p.delta * (_proj("11", "11") - _proj("00", "00"))
    return h


# (output, input) pairs of the twelve effective decay channels
EFFECTIVE_JUMPS = (
    ("r0", "rr"), ("r1", "rr"), ("0r", "rr"), ("1r", "rr"),
    ("00", "r0"), ("10", "r0"), ("01", "r1"), ("11", "r1"),
    ("00", "0r"), ("01", "0r"), ("10", "1r"), ("11", "1r"),
)


def build_effective_lindblads(p: SystemParams) -> list[np.ndarray]:
    amp = math.sqrt(p.gamma / 2.0)
    return [amp * _proj(out, inp) for out, inp in EFFECTIVE_JUMPS]


def build_model(p: SystemParams, model: str = "full") -> tuple[np.ndarray, list[np.ndarray]]:
    """Hamiltonian and jump operators for ``model`` in {"full", "effective"}."""
    if model == "full":
        return build_full_hamiltonian(p), build_full_lindblads(p)
    if model == "effective":
        return build_effective_hamiltonian(p), build_effective_lindblads(p)
    raise ValidationError(f"model must be 'full' or 'effective', got {model!r}")


def _ground_ket(c00, c01, c10, c11) -> np.ndarray:
    v = np.zeros(DIM, dtype=complex)
    for lbl, c in zip(GROUND_LABELS, (c00, c01, c10, c11)):
        v[basis_index(lbl)] = c
    return v


def klm_state(m: float = 1.0) -> np.ndarray:
    """Weighted KLM state ``(|00> + m|10> + |11>) / sqrt(2 + m^2)``."""
    return _ground_ket(1.0, 0.0, m, 1.0) / math.sqrt(2.0 + m * m)


def complement_states(m: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three ground-manifold companions of :func:`klm_state`.

    For ``m != 1`` the last two are normalized but not orthogonal to the
    KLM state; they are kept in the published form.
    """
    n2 = math.sqrt((2.0 + m * m) * (4.0 + m * m))
    root = math.sqrt(3.0 + 2.0 * m * m)
    th_p, th_m = (root + 1.0) / 2.0, (root - 1.0) / 2.0
    n34 = math.sqrt(4.0 + m * m)
    e2 = _ground_ket(m, -(2.0 + m * m), -2.0, m) / n2
    e3 = _ground_ket(th_p, 1.0, -1.0, -th_m) / n34
    e4 = _ground_ket(th_m, -1.0, 1.0, -th_p) / n34
    return e2, e3, e4


def target_states(m: float = 1.0) -> dict[str, np.ndarray]:
    """``{"E1": ..., "E2": ..., "E3": ..., "E4": ...}`` for weight ``m``."""
    e2, e3, e4 = complement_states(m)
    return {"E1": klm_state(m), "E2": e2, "E3": e3, "E4": e4}


def initial_mixed_state(a: float, b: float, c: float, d: float) -> np.ndarray:
    """Diagonal ``a|00><00| + b|11><11| + c|10><10| + d|01><01|``."""
    weights = (a, b, c, d)
    if any(w < 0 for w in weights):
        raise ValidationError(f"weights must be non-negative, got {weights}")
    if abs(sum(weights) - 1.0) > 1e-12:
        raise ValidationError(f"weights must sum to 1, got {sum(weights)!r}")
    rho = np.zeros((DIM, DIM), dtype=complex)
    for lbl, w in zip(("00", "11", "10", "01"), weights):
        i = basis_index(lbl)
        rho[i, i] = w
    return rho


FIG2_WEIGHTS = (0.3, 0.15, 0.45, 0.1)
