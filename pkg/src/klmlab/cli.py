"""Command-line front end.

    klmlab evolve  [flags]        time series for one parameter point
    klmlab steady  [flags]        steady state and its diagnostics
    klmlab sweep   --vary NAME=v1,v2,... [--steady] [flags]
    klmlab figure  {fig2,fig3a,fig3b,fig4,fig5} [flags]

Every run writes its output table plus ``<output>.manifest.json`` holding
the resolved configuration, tool version and wall time. A manifest can be
passed back through ``--config`` to reproduce the run.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from klmlab import __version__
from klmlab.errors import KLMLabError, ValidationError
from klmlab.experiments import (
    FIG2_INIT,
    FIG2_OUTPUTS,
    FIG3A_DELTAS,
    FIG5_M_VALUES,
    GROUND_INIT,
    PARAMETER_SET_1,
    PARAMETER_SET_2,
    PhysicalParams,
    SweepSpec,
    Table,
    figure2,
    figure3a,
    figure3b,
    figure4,
    figure5,
    initial_state,
    run_steady_sweep,
    run_time_series,
)
from klmlab.liouville import TimeGrid, build_liouvillian, spectral_gap, steady_state
from klmlab.linalg import null_space
from klmlab.measures import fidelity, negativity, population, purity
from klmlab.model import SystemParams, build_model, target_states

FIGURE_IDS = ("fig2", "fig3a", "fig3b", "fig4", "fig5")
PARAM_KEYS = ("Delta", "delta", "omega_mw", "gamma", "m", "u_rr", "stark_compensation")
CONFIG_KEYS = {
    "command", "figure_id", "params", "physical", "initial_state", "grid", "model",
    "output_path", "output_format", "jobs", "varied", "sweep_mode", "unit_convention",
    "manifest",
}
FIGURE_T_MAX = {"fig2": 5000.0, "fig3a": 20000.0, "fig4": 30000.0, "fig5": 50000.0}
DEFAULT_POINTS = 500


class UsageError(KLMLabError):
    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(message if key is None else f"{key}: {message}")


@dataclass
class RunConfig:
    command: str
    figure_id: Optional[str] = None
    params: dict = field(default_factory=dict)
    physical: Optional[dict] = None
    initial_state: Optional[str] = None
    grid: dict = field(default_factory=dict)
    model: str = "full"
    output_path: Optional[str] = None
    output_format: Optional[str] = None
    jobs: int = 1
    varied: dict = field(default_factory=dict)
    sweep_mode: str = "time"
    unit_convention: str = "angular"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    # ------------------------------------------------------------ resolution

    def system_params(self) -> SystemParams:
        base = {"Delta": 50.0} if self.figure_id == "fig3b" else {}
        base.update(self.params)
        if self.figure_id == "fig5":
            base.pop("m", None)
        try:
            return SystemParams(**base)
        except ValidationError as exc:
            raise UsageError(str(exc), _blame(str(exc))) from None

    def time_grid(self) -> TimeGrid:
        t_max = self.grid.get("t_max", FIGURE_T_MAX.get(self.figure_id, 5000.0))
        n = self.grid.get("n_points", DEFAULT_POINTS)
        try:
            return TimeGrid(float(t_max), int(n))
        except ValidationError as exc:
            raise UsageError(str(exc), "grid") from None

    def init(self) -> str:
        if self.initial_state is not None:
            return self.initial_state
        return GROUND_INIT if self.figure_id in ("fig4", "fig5") else FIG2_INIT

    def physical_sets(self) -> list[tuple[str, PhysicalParams]]:
        angular = self.unit_convention == "angular"
        if self.physical is not None:
            sets = [("custom", PhysicalParams(**self.physical))]
        elif self.figure_id == "fig5":
            sets = [("set2", PARAMETER_SET_2)]
        else:
            sets = [("set1", PARAMETER_SET_1), ("set2", PARAMETER_SET_2)]
        return [(lbl, dataclasses.replace(p, angular_convention=angular)) for lbl, p in sets]


def _blame(message: str) -> Optional[str]:
    head = message.split(" ", 1)[0]
    if head in PARAM_KEYS:
        return head
    for key in PARAM_KEYS:
        if f" {key} " in f" {message} ":
            return key
    return None


# ------------------------------------------------------------------ parsing


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("model parameters (units of the laser Rabi frequency)")
    g.add_argument("--config", help="JSON config or run manifest; flags override its values")
    g.add_argument("--Delta", type=float, help="laser detuning Delta/Omega (default 70; fig3b 50)")
    g.add_argument("--delta", type=float, help="microwave detuning delta/Omega (default 0.02)")
    g.add_argument("--omega-mw", type=float, help="microwave Rabi frequency (default delta/m)")
    g.add_argument("--gamma", type=float, help="Rydberg decay rate gamma/Omega (default 0.05)")
    g.add_argument("--m", type=float, help="KLM weight m (default 1; fig5 default 0.5,2,3)")
    g.add_argument("--urr", type=float, help="Rydberg interaction U_rr/Omega (default 2*Delta - 2/Delta)")
    g.add_argument("--no-stark-compensation", action="store_true",
                   help="keep the single-atom light shifts in the full Hamiltonian")
    g.add_argument("--unit-convention", choices=("angular", "cyclic"),
                   help="reading of bare MHz values for fig4/fig5 (default angular)")
    r = p.add_argument_group("run")
    r.add_argument("--t-max", type=float, help="final Omega*t (default 5000; fig3a 2e4, fig4 3e4, fig5 5e4)")
    r.add_argument("--points", type=int, help=f"time-grid points (default {DEFAULT_POINTS})")
    r.add_argument("--model", choices=("full", "effective"), help="master equation (default full)")
    r.add_argument("--init", help="initial state diag:w00,w01,w10,w11 or pure:LABEL "
                                  f"(default {FIG2_INIT}; fig4/fig5 {GROUND_INIT})")
    r.add_argument("--out", help="output path (default <command>.<format>)")
    r.add_argument("--format", choices=("csv", "json"), help="output format (default csv; steady json)")
    r.add_argument("--jobs", type=int, help="worker processes (default $KLMLAB_JOBS or 1)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="klmlab",
        description="Dissipative KLM-state preparation with two Rydberg atoms.",
    )
    parser.add_argument("--version", action="version", version=f"klmlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("evolve", parents=[common], help="time series for one parameter point")
    sub.add_parser("steady", parents=[common], help="steady state of the master equation")
    sw = sub.add_parser("sweep", parents=[common], help="parameter sweep")
    sw.add_argument("--vary", action="append", default=[], metavar="NAME=V1,V2,...",
                    help="parameter values to sweep (repeatable; first is slowest)")
    sw.add_argument("--steady", action="store_true", help="steady-state fidelity instead of time series")
    fg = sub.add_parser("figure", parents=[common], help="reproduce one figure's data")
    fg.add_argument("figure_id", choices=FIGURE_IDS)
    return parser


def _load_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config: {exc}", "config") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object", "config")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise UsageError("unknown config key", sorted(unknown)[0])
    data.pop("manifest", None)
    unknown = set(data.get("params", {})) - set(PARAM_KEYS)
    if unknown:
        raise UsageError("unknown parameter", sorted(unknown)[0])
    return data


def _parse_vary(items: Sequence[str]) -> dict:
    out = {}
    for item in items:
        name, sep, values = item.partition("=")
        if not sep:
            raise UsageError(f"expected NAME=V1,V2,... got {item!r}", "vary")
        try:
            out[name] = [float(v) for v in values.split(",")]
        except ValueError:
            raise UsageError(f"bad value list {values!r}", name) from None
    return out


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Merge a JSON config file (``--config``) with command-line flags."""
    args = build_parser().parse_args(argv)
    data = _load_file(args.config) if args.config else {}

    if "command" in data and data["command"] != args.command:
        raise UsageError(f"config says {data['command']!r} but {args.command!r} was requested", "command")
    data["command"] = args.command
    if args.command == "figure":
        if data.get("figure_id") not in (None, args.figure_id):
            raise UsageError("conflicts with the figure on the command line", "figure_id")
        data["figure_id"] = args.figure_id
    elif data.get("figure_id") is not None:
        raise UsageError("only valid with the figure command", "figure_id")

    params = dict(data.get("params") or {})
    for flag, key in (("Delta", "Delta"), ("delta", "delta"), ("omega_mw", "omega_mw"),
                      ("gamma", "gamma"), ("m", "m"), ("urr", "u_rr")):
        value = getattr(args, flag)
        if value is not None:
            params[key] = value
    if args.no_stark_compensation:
        params["stark_compensation"] = False
    data["params"] = params

    grid = dict(data.get("grid") or {})
    if args.t_max is not None:
        grid["t_max"] = args.t_max
    if args.points is not None:
        grid["n_points"] = args.points
    data["grid"] = grid

    for flag, key in (("model", "model"), ("init", "initial_state"), ("out", "output_path"),
                      ("format", "output_format"), ("unit_convention", "unit_convention")):
        value = getattr(args, flag)
        if value is not None:
            data[key] = value

    if args.jobs is not None:
        data["jobs"] = args.jobs
    elif "jobs" not in data:
        data["jobs"] = int(os.environ.get("KLMLAB_JOBS", "1"))

    if args.command == "sweep":
        varied = dict(data.get("varied") or {})
        varied.update(_parse_vary(args.vary))
        data["varied"] = varied
        if args.steady:
            data["sweep_mode"] = "steady"

    config = RunConfig(**data)
    _validate(config)
    return config


def _validate(c: RunConfig) -> None:
    if c.model not in ("full", "effective"):
        raise UsageError(f"must be 'full' or 'effective', got {c.model!r}", "model")
    if c.output_format not in (None, "csv", "json"):
        raise UsageError(f"must be 'csv' or 'json', got {c.output_format!r}", "output_format")
    if c.sweep_mode not in ("time", "steady"):
        raise UsageError(f"must be 'time' or 'steady', got {c.sweep_mode!r}", "sweep_mode")
    if c.unit_convention not in ("angular", "cyclic"):
        raise UsageError(f"must be 'angular' or 'cyclic', got {c.unit_convention!r}", "unit_convention")
    if c.jobs < 1:
        raise UsageError("must be >= 1", "jobs")
    if set(c.grid) - {"t_max", "n_points"}:
        raise UsageError("unknown grid key", sorted(set(c.grid) - {"t_max", "n_points"})[0])
    if c.command == "sweep" and not c.varied:
        raise UsageError("sweep needs at least one --vary", "varied")
    if c.figure_id in ("fig4", "fig5"):
        for key in ("Delta", "gamma"):
            if key in c.params:
                raise UsageError(f"set by the physical parameter set for {c.figure_id}", key)
    params = c.system_params()
    if c.figure_id == "fig5":
        for m in _fig5_m_values(c):
            if m == 0 and params.delta != 0:
                raise UsageError("m = 0 with delta != 0: delta = m * omega_mw cannot hold", "m")
    c.time_grid()
    try:
        initial_state(c.init(), params)
    except ValidationError as exc:
        raise UsageError(str(exc), "initial_state") from None
    if c.command == "sweep":
        try:
            _sweep_spec(c)
        except ValidationError as exc:
            raise UsageError(str(exc), "varied") from None


def _fig5_m_values(c: RunConfig) -> list[float]:
    return [float(c.params["m"])] if "m" in c.params else list(FIG5_M_VALUES)


# ------------------------------------------------------------------ execution


def _sweep_spec(c: RunConfig) -> SweepSpec:
    steady = c.sweep_mode == "steady"
    return SweepSpec(
        fixed=c.system_params(),
        varied=list(c.varied.items()),
        model=c.model,
        initial_state=c.init(),
        grid=None if steady else c.time_grid(),
        outputs=FIG2_OUTPUTS + ("fidelity",),
    )


def _steady_result(c: RunConfig) -> dict:
    params = c.system_params()
    L = build_liouvillian(*build_model(params, c.model))
    rho = steady_state(L)
    states = target_states(params.m)
    return {
        "fidelity": fidelity(rho, states["E1"]),
        "negativity": negativity(rho),
        "purity": purity(rho),
        "populations": {k: population(rho, v) for k, v in states.items()},
        "null_space_dimension": len(null_space(L.matrix)),
        "spectral_gap": spectral_gap(L),
        "model": c.model,
    }


def run(c: RunConfig) -> tuple[object, list[str]]:
    """Compute the result of ``c``; returns (Table or dict, failure notes)."""
    params = c.system_params()
    if c.command == "steady":
        return _steady_result(c), []
    if c.command == "evolve":
        spec = SweepSpec(fixed=params, model=c.model, initial_state=c.init(), grid=c.time_grid(),
                         outputs=FIG2_OUTPUTS + ("fidelity",))
        return run_time_series(spec, c.jobs), []
    if c.command == "sweep":
        spec = _sweep_spec(c)
        if spec.grid is None:
            table = run_steady_sweep(spec, c.jobs)
            return table, [f"{r[:-2]}: {r[-1]}" for r in table.rows if r[-1] != "ok"]
        return run_time_series(spec, c.jobs), []
    fig = c.figure_id
    if fig == "fig2":
        return figure2(params, c.time_grid(), c.init(), c.model), []
    if fig == "fig3a":
        return figure3a(FIG3A_DELTAS, params, c.time_grid(), c.init(), c.jobs), []
    if fig == "fig3b":
        table = figure3b(params=params, jobs=c.jobs)
        fails = [f"{r[:2]}: {r[3]}" for r in table.rows if r[3] != "ok"]
        return table.select(["gamma_over_omega", "delta_over_omega", "fidelity"]), fails
    if fig == "fig4":
        return figure4(c.physical_sets(), params, c.time_grid(), c.init(), c.jobs), []
    if fig == "fig5":
        return figure5(_fig5_m_values(c), c.physical_sets()[0][1], params, c.time_grid(),
                       c.init(), c.jobs), []
    raise UsageError(f"unknown figure {fig!r}", "figure_id")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return None if math.isnan(x) else float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _serialize(result, fmt: str) -> str:
    if isinstance(result, Table):
        if fmt == "csv":
            return result.to_csv()
        return json.dumps(_jsonable({"columns": result.columns, "rows": result.rows}), indent=1)
    if fmt == "json":
        return json.dumps(_jsonable(result), indent=2)
    flat = {k: v for k, v in result.items() if not isinstance(v, (dict, str))}
    flat.update({f"pop_{k}": v for k, v in result["populations"].items()})
    return Table(list(flat), [tuple(flat.values())]).to_csv()


def _default_output(c: RunConfig, fmt: str) -> str:
    stem = c.figure_id if c.command == "figure" else c.command
    return f"{stem}.{fmt}"


def execute(c: RunConfig) -> int:
    """Run ``c`` and write the output and its manifest. Returns the exit status."""
    fmt = c.output_format or ("json" if c.command == "steady" else "csv")
    out = Path(c.output_path or _default_output(c, fmt))
    manifest_path = out.with_name(out.name + ".manifest.json")
    written: list[Path] = []
    start = time.perf_counter()
    try:
        result, failures = run(c)
        text = _serialize(result, fmt)
        resolved = dataclasses.replace(c, output_path=str(out), output_format=fmt)
        manifest = resolved.to_dict()
        manifest["manifest"] = {
            "tool": "klmlab",
            "tool_version": __version__,
            "wall_time_s": time.perf_counter() - start,
            "outputs": [str(out)],
            "resolved_params": c.system_params().resolved(),
            "failures": failures,
        }
        for path, content in ((out, text), (manifest_path, json.dumps(_jsonable(manifest), indent=2))):
            tmp = path.with_name(path.name + ".tmp")
            written.append(tmp)
            tmp.write_text(content)
        for path in (out, manifest_path):
            os.replace(path.with_name(path.name + ".tmp"), path)
            written.append(path)
    except (KLMLabError, OSError) as exc:
        for path in written:
            path.unlink(missing_ok=True)
        _report_error(exc)
        return 2 if isinstance(exc, UsageError) else 1
    return 0


def _report_error(exc: Exception) -> None:
    record = {"status": "error", "error": type(exc).__name__, "message": str(exc)}
    if getattr(exc, "key", None):
        record["key"] = exc.key
    print(json.dumps(record), file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config = parse_config(argv)
    except UsageError as exc:
        _report_error(exc)
        return 2
    return execute(config)


if __name__ == "__main__":
    sys.exit(main())
