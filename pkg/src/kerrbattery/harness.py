"""Scenarios, figure presets, parameter sweeps and result files."""

from __future__ import annotations

import csv
import io
import itertools
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dynamics import TimeGrid, evolve, evolve_expm_oracle
from .errors import ConfigError, KerrBatteryError, RegimeWarning
from .fock import HilbertSpec
from .meanfield import meanfield_evolve
from .model import DEFAULT_ORACLE_CAP, ModelParams, regime_notes
from .observables import ObservableTrajectory, TrajectoryObserver, find_optimum

KINDS = ("kerr", "harmonic", "qubit")

# Figure parameter sets, in units of omega0.
PRESETS = {
    "fig2": dict(delta=0.2, gamma=0.3, g=0.2, F=0.5),
    "fig3b": dict(delta=0.2, gamma=1.0, g=0.2, F=0.5),
    "fig3c": dict(delta=0.0, gamma=0.05, g=0.2, F=0.1),
}

# Our own choice of Kerr strengths for the default sweep.
DEFAULT_U_GRID = (0.0, 0.005, 0.05, 0.1, 0.3)
U_GRID_NOTE = "default U grid {0, 0.005, 0.05, 0.1, 0.3} is an artifact choice"

DEFAULT_T_END = 10.0  # in units of the charging time g t / pi
DEFAULT_TRUNCATION = 25
WORKERS_ENV = "KERRBATTERY_WORKERS"

TRAJECTORY_COLUMNS = (
    "t", "T", "E_B", "E_A", "W", "P_B", "ratio",
    "trace_err", "min_eig", "tail_pop_a", "tail_pop_b",
)
SWEEP_COLUMNS = (
    "U", "gamma", "F", "E_max", "t_max", "T_max", "W_at_tmax", "ratio_at_tmax",
    "P_B_max", "t_at_P_B_max", "tainted", "truncated", "failed",
)


# -- scenarios --------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """One simulation setup.

    ``kind="harmonic"`` zeroes ``U``; ``kind="qubit"`` zeroes ``U`` and cuts
    the battery to two levels; ``kind="kerr"`` needs at least three battery
    levels for the Kerr term to do anything.
    """

    kind: str
    params: ModelParams
    spec: HilbertSpec = HilbertSpec()
    grid: TimeGrid | None = None
    label: str = ""
    rtol: float = 1e-8
    atol: float = 1e-10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind in ("harmonic", "qubit") and self.params.U != 0.0:
            object.__setattr__(self, "params", self.params.replace(U=0.0))
        if self.kind == "qubit" and self.spec.dim_battery != 2:
            object.__setattr__(self, "spec", HilbertSpec(self.spec.dim_charger, 2))
        if self.kind == "kerr" and self.spec.dim_battery < 3:
            raise ConfigError("a Kerr battery needs dim_battery >= 3")
        if self.grid is None:
            if self.params.g <= 0:
                raise ConfigError("t_end must be given when g = 0")
            grid = TimeGrid.from_charging_time(DEFAULT_T_END, self.params.g)
            object.__setattr__(self, "grid", grid)
        if not self.rtol > 0 or not self.atol > 0:
            raise ConfigError("need rtol > 0 and atol > 0")

    def with_params(self, **changes) -> "Scenario":
        return replace(self, params=self.params.replace(**changes))

    def with_kind(self, kind: str, **spec_changes) -> "Scenario":
        spec = self.spec
        if kind != "qubit" and spec.dim_battery == 2:
            spec = HilbertSpec(spec.dim_charger, DEFAULT_TRUNCATION)
        if spec_changes:
            spec = replace(spec, **spec_changes)
        return replace(self, kind=kind, spec=spec)


def preset(name: str, kind: str = "kerr", U: float = 0.0, **overrides) -> Scenario:
    """Scenario for a named figure parameter set.

    ``overrides`` may hold any :class:`ModelParams` field plus
    ``dim_charger``, ``dim_battery``, ``t_end`` and ``n_samples``.
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    config = dict(PRESETS[name], kind=kind, U=U)
    config.update(overrides)
    return scenario_from_config(config, label=name)


# -- flat key=value configs ---------------------------------------------------

CONFIG_KEYS = {
    "kind": str,
    "omega0": float,
    "delta": float,
    "g": float,
    "F": float,
    "U": float,
    "gamma": float,
    "dim_charger": int,
    "dim_battery": int,
    "t_end": float,
    "n_samples": int,
    "rtol": float,
    "atol": float,
    "output": str,
}


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    config = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in config:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            config[key] = CONFIG_KEYS[key](value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
    return config


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc


def scenario_from_config(config: dict, label: str = "") -> Scenario:
    unknown = set(config) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        params = ModelParams(
            **{k: float(config[k]) for k in ("omega0", "delta", "g", "F", "U", "gamma") if k in config}
        )
        kind = config.get("kind", "kerr")
        dim_b = config.get("dim_battery", 2 if kind == "qubit" else DEFAULT_TRUNCATION)
        spec = HilbertSpec(int(config.get("dim_charger", DEFAULT_TRUNCATION)), int(dim_b))
        n_samples = int(config.get("n_samples", 400))
        if "t_end" in config:
            grid = TimeGrid(float(config["t_end"]), n_samples)
        elif params.g > 0:
            grid = TimeGrid.from_charging_time(DEFAULT_T_END, params.g, n_samples)
        else:
            raise ConfigError("t_end must be given when g = 0")
        return Scenario(
            kind=kind,
            params=params,
            spec=spec,
            grid=grid,
            label=label,
            rtol=float(config.get("rtol", 1e-8)),
            atol=float(config.get("atol", 1e-10)),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def format_config(s: Scenario, output: str | None = None) -> str:
    """Inverse of :func:`parse_config` for a scenario."""
    p = s.params
    lines = [f"# {s.label}" if s.label else None, f"kind = {s.kind}"]
    lines += [f"{k} = {getattr(p, k)!r}" for k in ("omega0", "delta", "g", "F", "U", "gamma")]
    lines += [
        f"dim_charger = {s.spec.dim_charger}",
        f"dim_battery = {s.spec.dim_battery}",
        f"t_end = {s.grid.t_end!r}",
        f"n_samples = {s.grid.n_samples}",
        f"rtol = {s.rtol!r}",
        f"atol = {s.atol!r}",
    ]
    if output:
        lines.append(f"output = {output}")
    return "\n".join(line for line in lines if line is not None) + "\n"


# -- running ------------------------------------------------------------------


def run_scenario(s: Scenario, *, eig_diagnostics: bool = True) -> ObservableTrajectory:
    """Evolve from vacuum and reduce every sample to observables.

    States are streamed through the observer rather than stored, so memory
    stays flat at the full 25x25 truncation.
    """
    notes = regime_notes(s.params, s.spec)
    obs = TrajectoryObserver(s.params, s.spec, s.grid.n_samples)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        states = evolve(
            s.params,
            s.spec,
            s.grid,
            rtol=s.rtol,
            atol=s.atol,
            keep_states=False,
            observer=obs,
            eig_diagnostics=eig_diagnostics,
            guard_battery_tail=s.kind != "qubit",
        )
    if states.truncated:
        notes.append("truncation guard fired: top Fock level population above 1e-4")
    return obs.finish(states, label=s.label or s.kind, notes=notes)


@dataclass
class SweepRow:
    U: float
    gamma: float
    F: float
    E_max: float = np.nan
    t_max: float = np.nan
    T_max: float = np.nan
    W_at_tmax: float = np.nan
    ratio_at_tmax: float = np.nan
    P_B_max: float = np.nan
    t_at_P_B_max: float = np.nan
    tainted: bool = False
    truncated: bool = False
    failed: bool = False
    error: str = ""


def summarize(traj: ObservableTrajectory, U: float, gamma: float, F: float) -> SweepRow:
    t_max, E_max = find_optimum(traj)
    i = int(np.searchsorted(traj.times, t_max))
    j = int(np.nanargmax(traj.P_B))
    return SweepRow(
        U=U,
        gamma=gamma,
        F=F,
        E_max=E_max,
        t_max=t_max,
        T_max=float(traj.T[i]),
        W_at_tmax=float(traj.W[i]),
        ratio_at_tmax=float(traj.ratio[i]),
        P_B_max=float(traj.P_B[j]),
        t_at_P_B_max=float(traj.times[j]),
        tainted=traj.tainted,
        truncated=traj.truncated,
    )


@dataclass
class SweepResult:
    rows: list
    notes: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def row(self, U: float, gamma: float | None = None, F: float | None = None) -> SweepRow:
        for r in self.rows:
            if r.U == U and (gamma is None or r.gamma == gamma) and (F is None or r.F == F):
                return r
        raise KeyError((U, gamma, F))

    @property
    def tainted(self) -> bool:
        return any(r.tainted or r.failed for r in self.rows)


def _sweep_row(args) -> SweepRow:
    s, U, gamma, F, eig_diagnostics = args
    try:
        traj = run_scenario(s.with_params(U=U, gamma=gamma, F=F), eig_diagnostics=eig_diagnostics)
    except (KerrBatteryError, ArithmeticError) as exc:
        return SweepRow(U, gamma, F, tainted=True, failed=True, error=f"{type(exc).__name__}: {exc}")
    return summarize(traj, U, gamma, F)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {n}")
        return n
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def sweep(
    base: Scenario,
    u_values,
    gamma_values=None,
    f_values=None,
    *,
    workers: int | None = None,
    eig_diagnostics: bool = True,
) -> SweepResult:
    """Run the Cartesian product of ``U x gamma x F`` values.

    Missing ``gamma_values``/``f_values`` default to the base scenario's.
    Rows come back in input order regardless of worker count, and a failing
    row is recorded as failed rather than aborting the sweep.
    """
    gamma_values = [base.params.gamma] if gamma_values is None else list(gamma_values)
    f_values = [base.params.F] if f_values is None else list(f_values)
    u_values = list(u_values)
    if not (u_values and gamma_values and f_values):
        raise ConfigError("sweep value lists must be nonempty")
    jobs = [
        (base, float(U), float(gm), float(F), eig_diagnostics)
        for U, gm, F in itertools.product(u_values, gamma_values, f_values)
    ]
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(jobs) == 1:
        rows = [_sweep_row(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    notes = []
    if base.kind == "kerr" and sorted(u_values) == list(DEFAULT_U_GRID):
        notes.append(U_GRID_NOTE)
    return SweepResult(rows, notes)


@dataclass
class QubitLimitReport:
    large_U: float
    max_deviation: float
    times: np.ndarray
    E_B_kerr: np.ndarray
    E_B_qubit: np.ndarray


def qubit_limit_check(
    base: Scenario, large_U: float = 50.0, *, dim_battery: int = 4, eig_diagnostics: bool = False
) -> QubitLimitReport:
    """Compare a strongly nonlinear Kerr battery with the two-level battery.

    For ``U >> omega0`` the second battery level sits far off resonance, so
    only a few battery levels matter; ``dim_battery`` sets that truncation
    (the Kerr stored energy converges quickly in it).
    """
    kerr = replace(base, kind="kerr", spec=HilbertSpec(base.spec.dim_charger, dim_battery))
    kerr = kerr.with_params(U=large_U)
    qubit = base.with_kind("qubit")
    t_kerr = run_scenario(kerr, eig_diagnostics=eig_diagnostics)
    t_qubit = run_scenario(qubit, eig_diagnostics=eig_diagnostics)
    dev = float(np.max(np.abs(t_kerr.E_B - t_qubit.E_B)))
    return QubitLimitReport(large_U, dev, t_kerr.times, t_kerr.E_B, t_qubit.E_B)


@dataclass
class CompareReport:
    meanfield_max_dev: float
    oracle_max_dev: float | None
    note: str = ""


def compare(s: Scenario) -> CompareReport:
    """Full master equation against the mean-field curve and, when the
    truncation is small enough, against exact matrix-exponential propagation."""
    full = run_scenario(s, eig_diagnostics=False)
    mf = meanfield_evolve(s.params, s.grid, rtol=s.rtol, atol=s.atol)
    mf_dev = float(np.max(np.abs(full.E_B - mf.E_B)))
    if s.spec.dim > DEFAULT_ORACLE_CAP:
        return CompareReport(mf_dev, None, f"oracle skipped: joint dimension {s.spec.dim} > {DEFAULT_ORACLE_CAP}")
    ours = evolve(s.params, s.spec, s.grid, rtol=s.rtol, atol=s.atol, eig_diagnostics=False)
    exact = evolve_expm_oracle(s.params, s.spec, s.grid)
    oracle_dev = max(float(np.max(np.abs(a - b))) for a, b in zip(ours.states, exact.states))
    return CompareReport(mf_dev, oracle_dev)


# -- output -------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    x = float(x)
    return "" if np.isnan(x) else "%.12g" % x


def _table(result):
    if isinstance(result, ObservableTrajectory):
        d = result.diagnostics
        n = len(result.times)
        blank = np.full(n, np.nan)
        diag = [blank] * 4 if d is None else [d.trace_err, d.min_eig, d.tail_pop_a, d.tail_pop_b]
        cols = [result.times, result.T, result.E_B, result.E_A, result.W, result.P_B, result.ratio, *diag]
        return TRAJECTORY_COLUMNS, [[_fmt(c[i]) for c in cols] for i in range(n)]
    if isinstance(result, SweepResult):
        rows = [[_fmt(getattr(r, name)) for name in SWEEP_COLUMNS] for r in result.rows]
        return SWEEP_COLUMNS, rows
    raise TypeError(f"cannot serialize {type(result).__name__}")


def _write(path, text: str) -> None:
    if str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def format_csv(result) -> str:
    header, rows = _table(result)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def emit_csv(result, path) -> None:
    """Write a trajectory or sweep as CSV; NaN becomes an empty field."""
    _write(path, format_csv(result))


def emit_plotdata(result, path) -> None:
    """Same series as :func:`emit_csv`, whitespace-separated with a ``#`` header."""
    header, rows = _table(result)
    lines = ["# " + " ".join(header)]
    lines += [" ".join(v if v else "nan" for v in row) for row in rows]
    _write(path, "\n".join(lines) + "\n")


def parse_csv(source) -> dict:
    """Read a file written by :func:`emit_csv` back into float columns."""
    if isinstance(source, str) and "\n" in source:
        text = source
    else:
        try:
            with open(source, newline="") as fh:
                text = fh.read()
        except OSError as exc:
            raise OSError(exc.errno, f"cannot read {source}: {exc.strerror}") from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    data = [[float(v) if v else np.nan for v in row] for row in reader]
    arr = np.array(data, dtype=float).reshape(len(data), len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


def sweep_row_dict(row: SweepRow) -> dict:
    return asdict(row)
