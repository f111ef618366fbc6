"""Sweep engine and figure-level pipelines.

Every pipeline returns a :class:`Table` whose column order is part of the
output contract. Parameter points are independent and can be farmed out
to worker processes; rows are always assembled in declaration order.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from klmlab.errors import (
    NonUniqueSteadyStateError,
    NumericalFailureError,
    ValidationError,
)
from klmlab.liouville import TimeGrid, build_liouvillian, propagate, steady_state
from klmlab.measures import fidelity, negativity, population, purity
from klmlab.model import (
    BASIS_LABELS,
    SystemParams,
    basis_ket,
    build_model,
    initial_mixed_state,
    klm_state,
    target_states,
)

FIG2_INIT = "diag:0.3,0.1,0.45,0.15"
GROUND_INIT = "pure:00"
FIG2_OUTPUTS = ("negativity", "purity", "pop_E1", "pop_E2", "pop_E3", "pop_E4")
FIG3A_DELTAS = (30.0, 50.0, 70.0, 100.0)
FIG5_M_VALUES = (0.5, 2.0, 3.0)

_PARAM_FIELDS = {f.name for f in dataclasses.fields(SystemParams)}


# ---------------------------------------------------------------- tables


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


@dataclass
class Table:
    """Column-ordered rows, serializable as CSV or JSON records."""

    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def select(self, columns: Sequence[str]) -> "Table":
        idx = [self.columns.index(c) for c in columns]
        return Table(list(columns), [tuple(r[i] for i in idx) for r in self.rows])

    def where(self, column: str, value) -> "Table":
        i = self.columns.index(column)
        return Table(list(self.columns), [r for r in self.rows if r[i] == value])

    def to_records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def to_csv(self, fh: Optional[io.TextIOBase] = None) -> Optional[str]:
        """Write CSV to ``fh`` (or return it as a string) with 17 significant digits."""
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(x) for x in r])
        return None if fh is not None else buf.getvalue()


# ---------------------------------------------------------------- units


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory parameters in MHz.

    ``gamma_times_2pi`` marks a decay rate quoted as ``2*pi x gamma_mhz``.
    With ``angular_convention`` (default) bare MHz figures are read as
    angular frequencies (rad/us); otherwise they are cyclic and carry an
    implicit ``2*pi``.
    """

    omega_mhz: float
    delta_big_mhz: float
    gamma_mhz: float
    gamma_times_2pi: bool = True
    angular_convention: bool = True

    def __post_init__(self):
        if not self.omega_mhz > 0:
            raise ValidationError(f"omega_mhz must be > 0, got {self.omega_mhz}")
        if self.delta_big_mhz <= 0 or self.gamma_mhz < 0:
            raise ValidationError("delta_big_mhz must be > 0 and gamma_mhz >= 0")

    def _angular(self, value: float, prefixed: bool) -> float:
        if prefixed or not self.angular_convention:
            return 2.0 * math.pi * value
        return value

    @property
    def omega_angular(self) -> float:
        """Laser Rabi frequency in rad/us."""
        return self._angular(self.omega_mhz, False)

    @property
    def gamma_angular(self) -> float:
        return self._angular(self.gamma_mhz, self.gamma_times_2pi)

    @property
    def delta_big_angular(self) -> float:
        return self._angular(self.delta_big_mhz, False)

    def alternate(self) -> "PhysicalParams":
        return dataclasses.replace(self, angular_convention=not self.angular_convention)


PARAMETER_SET_1 = PhysicalParams(omega_mhz=14.0, delta_big_mhz=600.0, gamma_mhz=0.03)
PARAMETER_SET_2 = PhysicalParams(omega_mhz=20.0, delta_big_mhz=900.0, gamma_mhz=0.1)


def convert_units(p: PhysicalParams, base: SystemParams | None = None) -> SystemParams:
    """Dimensionless model parameters (Delta/Omega, gamma/Omega) for ``p``.

    Fields not fixed by ``p`` (delta, m, omega_mw, ...) come from ``base``.
    """
    base = base or SystemParams()
    return base.replace(
        Delta=p.delta_big_angular / p.omega_angular,
        gamma=p.gamma_angular / p.omega_angular,
        u_rr=None,
    )


def physical_time_us(omega_t: float, p: PhysicalParams) -> float:
    """Convert a dimensionless time Omega*t to microseconds."""
    return omega_t / p.omega_angular


# ---------------------------------------------------------------- sweeps


def initial_state(spec: Union[str, np.ndarray], params: SystemParams | None = None) -> np.ndarray:
    """Density matrix from ``"diag:w00,w01,w10,w11"`` or ``"pure:LABEL"``.

    Diagonal weights are given in basis order |00>, |01>, |10>, |11>.
    Pure labels are two-atom basis labels (``"00"``, ``"r1"``, ...) or
    ``"E1"``..``"E4"`` for the KLM family at ``params.m``.
    """
    if not isinstance(spec, str):
        return np.asarray(spec, dtype=complex)
    kind, _, body = spec.partition(":")
    if kind == "diag":
        try:
            w = [float(x) for x in body.split(",")]
        except ValueError:
            raise ValidationError(f"bad diagonal weights in {spec!r}") from None
        if len(w) != 4:
            raise ValidationError(f"diag: needs 4 weights, got {len(w)}")
        w00, w01, w10, w11 = w
        return initial_mixed_state(w00, w11, w10, w01)
    if kind == "pure":
        if body in BASIS_LABELS:
            psi = basis_ket(body)
        elif body in ("E1", "E2", "E3", "E4"):
            psi = target_states((params or SystemParams()).m)[body]
        else:
            raise ValidationError(f"unknown pure-state label {body!r}")
        return np.outer(psi, psi.conj())
    raise ValidationError(f"initial state must start with 'diag:' or 'pure:', got {spec!r}")


def _known_output(name: str) -> bool:
    if name in ("negativity", "purity", "fidelity"):
        return True
    if name.startswith("pop_"):
        return name[4:] in ("E1", "E2", "E3", "E4") or name[4:] in BASIS_LABELS
    return False


@dataclass
class SweepSpec:
    """What to vary, what to hold fixed, and what to measure.

    ``grid=None`` requests steady-state mode.
    """

    fixed: SystemParams = field(default_factory=SystemParams)
    varied: list[tuple[str, list[float]]] = field(default_factory=list)
    model: str = "full"
    initial_state: Union[str, np.ndarray] = FIG2_INIT
    grid: Optional[TimeGrid] = field(default_factory=lambda: TimeGrid(5000.0, 500))
    outputs: tuple[str, ...] = FIG2_OUTPUTS

    def __post_init__(self):
        self.varied = [(str(n), [float(v) for v in vals]) for n, vals in self.varied]
        for name, values in self.varied:
            if name not in _PARAM_FIELDS or name in ("omega_drive", "stark_compensation"):
                raise ValidationError(f"cannot vary unknown parameter {name!r}")
            if not values:
                raise ValidationError(f"value list for {name!r} is empty")
        if self.model not in ("full", "effective"):
            raise ValidationError(f"model must be 'full' or 'effective', got {self.model!r}")
        bad = [o for o in self.outputs if not _known_output(o)]
        if bad:
            raise ValidationError(f"unknown outputs {bad}")

    @property
    def varied_names(self) -> list[str]:
        return [n for n, _ in self.varied]

    def points(self) -> list[dict[str, float]]:
        """Cartesian product of the varied values, first parameter slowest."""
        names = self.varied_names
        return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in self.varied))]


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _measure_row(rho: np.ndarray, outputs: Sequence[str], states: dict, target: np.ndarray) -> list[float]:
    row = []
    for name in outputs:
        if name == "negativity":
            row.append(negativity(rho))
        elif name == "purity":
            row.append(purity(rho))
        elif name == "fidelity":
            row.append(fidelity(rho, target))
        else:
            label = name[4:]
            psi = states[label] if label in states else basis_ket(label)
            row.append(population(rho, psi))
    return row


def _time_series_point(spec: SweepSpec, point: dict) -> list[tuple]:
    params = spec.fixed.replace(**point)
    try:
        H, Ls = build_model(params, spec.model)
        rhos = propagate(build_liouvillian(H, Ls), initial_state(spec.initial_state, params), spec.grid)
    except NumericalFailureError as exc:
        raise NumericalFailureError(f"parameter point {point}: {exc}") from exc
    states = target_states(params.m)
    prefix = tuple(point[n] for n in spec.varied_names)
    return [
        prefix + (float(t),) + tuple(_measure_row(rho, spec.outputs, states, states["E1"]))
        for t, rho in zip(spec.grid.times, rhos)
    ]


def run_time_series(spec: SweepSpec, jobs: int = 1) -> Table:
    """Propagate every parameter point and tabulate the requested measures."""
    if spec.grid is None:
        raise ValidationError("time-series sweep needs a time grid")
    chunks = _map(partial(_time_series_point, spec), spec.points(), jobs)
    return Table(spec.varied_names + ["omega_t"] + list(spec.outputs), [r for c in chunks for r in c])


def _steady_point(spec: SweepSpec, point: dict) -> tuple:
    params = spec.fixed.replace(**point)
    prefix = tuple(point[n] for n in spec.varied_names)
    try:
        rho = steady_state(build_liouvillian(*build_model(params, spec.model)))
    except (NonUniqueSteadyStateError, NumericalFailureError) as exc:
        return prefix + (float("nan"), f"failed: {exc}")
    return prefix + (fidelity(rho, klm_state(params.m)), "ok")


def run_steady_sweep(spec: SweepSpec, jobs: int = 1) -> Table:
    """Steady-state fidelity to the KLM target for every parameter point.

    Points without a unique steady state get ``fidelity = nan`` and a
    ``status`` describing the failure.
    """
    rows = _map(partial(_steady_point, spec), spec.points(), jobs)
    return Table(spec.varied_names + ["fidelity", "status"], rows)


def _label(x: float) -> str:
    return format(x, "g")


def run_general_klm(
    m_values: Iterable[float],
    params: SystemParams,
    grid: TimeGrid,
    initial: str = GROUND_INIT,
    jobs: int = 1,
) -> Table:
    """Fidelity to the weighted KLM state over time, one block per ``m``.

    The microwave Rabi frequency of each block is ``delta / m``.
    """
    m_values = [float(m) for m in m_values]
    for m in m_values:
        if m == 0 and params.delta != 0:
            raise ValidationError("m = 0 with delta != 0: delta = m * omega_mw cannot hold")
    out = Table(["omega_t", "fidelity", "label"])
    for m in m_values:
        spec = SweepSpec(
            fixed=params.replace(m=m, omega_mw=None),
            initial_state=initial,
            grid=grid,
            outputs=("fidelity",),
        )
        out.rows += [(t, f, f"m={_label(m)}") for t, f in run_time_series(spec, jobs).rows]
    return out


@dataclass
class Comparison:
    table: Table
    max_deviation: dict[str, float]

    @property
    def overall(self) -> float:
        return max(self.max_deviation.values())


def compare_full_effective(
    params: SystemParams,
    rho0,
    grid: TimeGrid,
    models: tuple[str, str] = ("full", "effective"),
) -> Comparison:
    """Populations of E1..E4 under the full and effective models on one grid.

    ``models`` can name the same model twice as a consistency baseline.
    """
    labels = ("E1", "E2", "E3", "E4")
    series = []
    for model in models:
        spec = SweepSpec(
            fixed=params,
            model=model,
            initial_state=rho0,
            grid=grid,
            outputs=tuple(f"pop_{k}" for k in labels),
        )
        series.append(np.array(run_time_series(spec).rows)[:, 1:])
    full, eff = series
    times = grid.times
    rows = [(float(t),) + tuple(f) + tuple(e) for t, f, e in zip(times, full, eff)]
    table = Table(["omega_t"] + [f"full_{k}" for k in labels] + [f"eff_{k}" for k in labels], rows)
    dev = {k: float(np.max(np.abs(full[:, i] - eff[:, i]))) for i, k in enumerate(labels)}
    return Comparison(table, dev)


def time_to_reach(times: np.ndarray, values: np.ndarray, level: float) -> float:
    """First grid time at which ``values >= level`` (inf if never)."""
    hit = np.nonzero(np.asarray(values) >= level)[0]
    return float(times[hit[0]]) if hit.size else math.inf


# ---------------------------------------------------------------- figures


def figure2(
    params: SystemParams | None = None,
    grid: TimeGrid | None = None,
    initial: str = FIG2_INIT,
    model: str = "full",
) -> Table:
    """Negativity, purity and E1..E4 populations from a mixed ground state."""
    spec = SweepSpec(
        fixed=params or SystemParams(),
        model=model,
        initial_state=initial,
        grid=grid or TimeGrid(5000.0, 500),
        outputs=FIG2_OUTPUTS,
    )
    return run_time_series(spec)


def figure3a(
    Deltas: Sequence[float] = FIG3A_DELTAS,
    params: SystemParams | None = None,
    grid: TimeGrid | None = None,
    initial: str = FIG2_INIT,
    jobs: int = 1,
) -> Table:
    """E1 population over time for several detunings Delta."""
    spec = SweepSpec(
        fixed=params or SystemParams(),
        varied=[("Delta", list(Deltas))],
        initial_state=initial,
        grid=grid or TimeGrid(20000.0, 500),
        outputs=("pop_E1",),
    )
    table = run_time_series(spec, jobs)
    return Table(
        ["omega_t", "pop_E1", "label"],
        [(t, p, f"Delta={_label(D)}") for D, t, p in table.rows],
    )


def figure3b(
    gammas: Sequence[float] | None = None,
    deltas: Sequence[float] | None = None,
    params: SystemParams | None = None,
    jobs: int = 1,
) -> Table:
    """Steady-state fidelity over a (gamma, delta) grid with omega_mw = delta / m."""
    gammas = np.linspace(0.01, 0.5, 20) if gammas is None else gammas
    deltas = np.linspace(0.005, 0.2, 20) if deltas is None else deltas
    base = (params or SystemParams(Delta=50.0)).replace(omega_mw=None)
    spec = SweepSpec(fixed=base, varied=[("gamma", list(gammas)), ("delta", list(deltas))], grid=None)
    table = run_steady_sweep(spec, jobs)
    table.columns = ["gamma_over_omega", "delta_over_omega", "fidelity", "status"]
    return table


def figure4(
    sets: Sequence[tuple[str, PhysicalParams]] = (("set1", PARAMETER_SET_1), ("set2", PARAMETER_SET_2)),
    params: SystemParams | None = None,
    grid: TimeGrid | None = None,
    initial: str = GROUND_INIT,
    jobs: int = 1,
) -> Table:
    """Fidelity to E1 over time for laboratory parameter sets, starting in |00>."""
    grid = grid or TimeGrid(30000.0, 500)
    out = Table(["omega_t", "fidelity", "label"])
    for label, phys in sets:
        spec = SweepSpec(
            fixed=convert_units(phys, params),
            initial_state=initial,
            grid=grid,
            outputs=("fidelity",),
        )
        out.rows += [(t, f, label) for t, f in run_time_series(spec, jobs).rows]
    return out


def figure5(
    m_values: Sequence[float] = FIG5_M_VALUES,
    physical: PhysicalParams = PARAMETER_SET_2,
    params: SystemParams | None = None,
    grid: TimeGrid | None = None,
    initial: str = GROUND_INIT,
    jobs: int = 1,
) -> Table:
    """Fidelity to the weighted KLM state for several weights m."""
    return run_general_klm(
        m_values,
        convert_units(physical, params),
        grid or TimeGrid(50000.0, 500),
        initial=initial,
        jobs=jobs,
    )


FIGURES = {
    "fig2": figure2,
    "fig3a": figure3a,
    "fig3b": figure3b,
    "fig4": figure4,
    "fig5": figure5,
}
