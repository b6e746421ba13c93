"""Execute validated scenarios and collect pass/fail checks."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import discrete as dsc
from . import fields1d as fld
from . import mechanics as mech
from .config import ScenarioConfig
from .errors import ConfigError, ExpressionError, HerglotzError, ScenarioError
from .expr import time_function_from_expression
from .noether import drift_report


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(math.isfinite(self.value) and self.value <= self.tolerance)

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "pass": self.passed}


@dataclass
class Summary:
    scenario: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "checks": [c.to_dict() for c in self.checks]}

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _expression_of_t(text: str, params):
    try:
        return time_function_from_expression(text, params)
    except ExpressionError as exc:
        raise ConfigError(str(exc)) from exc


# -- mechanics -------------------------------------------------------------------


def _initial(cfg: ScenarioConfig, spec) -> mech.MechState:
    ini = cfg.get("initial")
    if len(ini["q"]) != spec.n_dof or len(ini["v"]) != spec.n_dof:
        raise ConfigError(f"initial q and v need {spec.n_dof} components")
    return mech.MechState(ini.get("t", 0.0), ini["q"], ini["v"], ini.get("S", 0.0))


def run_mechanics(cfg: ScenarioConfig, out: Path) -> Summary:
    spec = cfg.lagrangian()
    init = _initial(cfg, spec)
    gens = cfg.generators(spec.n_dof)
    traj = mech.integrate(spec, init, cfg.get("t_end"), cfg.get("h"))
    traj.to_csv(out / "trajectory.csv")
    summary = Summary(cfg.scenario)
    threshold = cfg.get("threshold", 1e-6)
    for gen in gens:
        rep = drift_report(spec, traj, gen, threshold)
        rep.to_json(out / f"noether_{gen.name}.json")
        summary.checks.append(Check(gen.name, rep.drift_rel, threshold))
    for entry in cfg.get("closed_form", []):
        exact = _expression_of_t(entry["expression"], cfg.parameters)
        comp = entry["component"]
        if comp == "S":
            series = traj.S
        else:
            i = int(comp[1:]) - 1
            if i >= spec.n_dof:
                raise ConfigError(f"closed_form component {comp} out of range")
            series = (traj.q if comp[0] == "q" else traj.v)[:, i]
        ref = np.array([float(exact(t)) for t in traj.t])
        summary.checks.append(Check(entry["name"], float(np.max(np.abs(series - ref))), entry["tolerance"]))
    return summary


# -- fields ----------------------------------------------------------------------


def field_setup(cfg: ScenarioConfig, nx_scale: int = 1):
    """Model, grid and initial state; ``nx_scale`` refines both dx and dt."""
    model = cfg.field_model()
    g = cfg.get("grid")
    nx = g["nx"] * nx_scale
    t_end = cfg.get("t_end")
    dx = (g["x_max"] - g["x_min"]) / nx
    if "dt" in g:
        dt = g["dt"] / nx_scale
    else:
        # largest dt at or below the requested Courant number that divides t_end
        n = math.ceil(t_end / (g["courant"] * dx / model.wave_speed) - 1e-9)
        dt = t_end / n
    grid = fld.Grid1D(g["x_min"], g["x_max"], nx, dt, g["boundary"])
    grid.check_cfl(model.wave_speed)
    params = {k: v for k, v in cfg.get("initial").items() if k != "profile"}
    phi0, phit0 = fld.profile(cfg.get("initial")["profile"], grid, model, **params)
    return model, grid, fld.initial_state(grid, model, phi0, phit0)


def _law(series: np.ndarray, t: np.ndarray, model, ref: float, floor: float) -> float:
    """``max |X(t) e^{-f(t)} - ref| / max(|ref|, floor)``."""
    scaled = series * np.exp(-model.f(t))
    return float(np.max(np.abs(scaled - ref)) / max(abs(ref), floor))


def field_check_values(cfg: ScenarioConfig, run: fld.FieldRun) -> dict[str, float]:
    model, t = run.model, run.t
    E, P, Q = run.series("E"), run.series("P"), run.series("Q")
    ref = cfg.get("reference")
    E_ref = float(_expression_of_t(ref, cfg.parameters)(0.0)) if ref else float(E[0])
    q_ratio = Q[-1] / Q[0] if Q[0] != 0 else (0.0 if Q[-1] == 0 else math.inf)
    return {
        "energy_law": _law(E, t, model, E_ref, 1e-300),
        "momentum_law": _law(P, t, model, float(P[0]), 1.0),
        "charge_law": _law(Q, t, model, float(Q[0]), 1e-300) if Q[0] != 0 else float(np.max(np.abs(Q))),
        "charge_ratio": abs(q_ratio - math.exp(-model.gamma * (t[-1] - t[0]))) if Q[0] != 0 else float(np.max(np.abs(Q))),
        "charge_abs": float(np.max(np.abs(Q))),
        "continuity_residual": float(np.max(run.series("continuity_residual_max"))),
        "identity_residual": float(np.max(run.series("noether_identity_residual_max"))),
    }


def run_field(cfg: ScenarioConfig, out: Path) -> Summary:
    model, grid, state = field_setup(cfg)
    t_end = cfg.get("t_end")
    n_steps = int(round(t_end / grid.dt))
    record = cfg.get("record_every", 1)
    snap = max(1, n_steps // 10)
    run = fld.evolve(model, grid, state, t_end, record_every=record, snapshot_every=snap)
    fld.write_snapshots_csv(run.snapshots, grid, out / "field.csv")
    fld.write_diagnostics_csv(run.diagnostics, out / "diagnostics.csv")
    values = field_check_values(cfg, run)
    summary = Summary(cfg.scenario)
    for c in cfg.checks:
        if c["name"] not in values:
            raise ConfigError(f"unknown field check {c['name']!r}; choose from {sorted(values)}")
        summary.checks.append(Check(c["name"], values[c["name"]], c["tolerance"]))
    return summary


# -- discrete --------------------------------------------------------------------


def _reference_step(h: float, h_ref: float) -> float:
    return h / max(1, math.ceil(h / h_ref - 1e-9))


def discrete_setup(cfg: ScenarioConfig, K_scale: int = 1):
    spec = cfg.lagrangian()
    t_a, t_b = cfg.get("t_a"), cfg.get("t_b")
    if not t_b > t_a:
        raise ConfigError("t_b must exceed t_a")
    q_a = np.asarray(cfg.get("q_a"), dtype=float)
    s_a = cfg.get("s_a", 0.0)
    K = cfg.get("K") * K_scale
    h = (t_b - t_a) / K
    h_ref = _reference_step(h, cfg.get("reference_h", 1e-3))
    if cfg.get("q_b") == "shoot":
        traj = mech.integrate(spec, mech.MechState(t_a, q_a, cfg.get("shoot_velocity"), s_a), t_b, h_ref)
        q_b = traj.q[-1]
    else:
        q_b = np.asarray(cfg.get("q_b"), dtype=float)
    if q_a.size != spec.n_dof or q_b.size != spec.n_dof:
        raise ConfigError(f"q_a and q_b need {spec.n_dof} components")
    return spec, q_a, q_b, s_a, K, h, h_ref


def solve_discrete(cfg: ScenarioConfig, K_scale: int = 1):
    spec, q_a, q_b, s_a, K, h, h_ref = discrete_setup(cfg, K_scale)
    path = dsc.solve_stationary(
        spec, q_a, q_b, s_a, K, h,
        tol=cfg.get("tol", 1e-10),
        max_iter=cfg.get("max_iter", 50),
        damping=cfg.get("damping", 1.0),
        t_a=cfg.get("t_a"),
    )
    return spec, path, (q_a, q_b, s_a, h_ref)


def run_discrete(cfg: ScenarioConfig, out: Path) -> Summary:
    spec, path, (q_a, q_b, s_a, h_ref) = solve_discrete(cfg)
    path.to_csv(out / "path.csv")
    values = {"stationarity": float(np.max(np.abs(dsc.adjoint_gradient(spec, path))))}
    names = {c["name"] for c in cfg.checks}
    if "shooting_reference" in names:
        ref = mech.shoot(spec, path.t_a, q_a, s_a, float(path.t[-1]), q_b, h_ref, v_guess=cfg.get("shoot_velocity"))
        ref.to_csv(out / "shooting_reference.csv")
        values["shooting_reference"] = dsc.interior_deviation(path, ref.t, ref.q)
    summary = Summary(cfg.scenario)
    for c in cfg.checks:
        if c["name"] not in values:
            raise ConfigError(f"unknown discrete check {c['name']!r}; choose from ['shooting_reference', 'stationarity']")
        summary.checks.append(Check(c["name"], values[c["name"]], c["tolerance"]))
    return summary


RUNNERS = {
    "mechanics": run_mechanics,
    "field-string": run_field,
    "field-kg": run_field,
    "discrete": run_discrete,
}


def run(cfg: ScenarioConfig, out_dir) -> Summary:
    """Run one scenario writing artifacts and ``summary.json`` into ``out_dir``.

    Solver failures surface as :class:`ScenarioError`; configuration problems
    detected late stay :class:`ConfigError`.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        summary = RUNNERS[cfg.kind](cfg, out)
    except ConfigError:
        raise
    except (HerglotzError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise ScenarioError(f"{cfg.scenario}: {type(exc).__name__}: {exc}") from exc
    summary.write(out / "summary.json")
    return summary


# -- convergence -----------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceTable:
    step: np.ndarray
    errors: np.ndarray
    orders: np.ndarray

    def rows(self):
        for i, e in enumerate(self.errors):
            yield self.step[i], e, (self.orders[i - 1] if i >= 1 else math.nan)

    def write(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["h", "error", "order"])
            for h, e, p in self.rows():
                w.writerow([_fmt(h), _fmt(e), "" if math.isnan(p) else _fmt(p)])


def _table(steps, finals, compare) -> ConvergenceTable:
    errors = np.array([compare(a, b) for a, b in zip(finals, finals[1:])])
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = np.log2(errors[:-1] / errors[1:])
    return ConvergenceTable(np.asarray(steps[:-1], dtype=float), errors, orders)


def convergence(cfg: ScenarioConfig, levels: int) -> ConvergenceTable:
    """Self-convergence study: each level halves the step; errors against the next level."""
    if levels < 3:
        raise ConfigError("convergence needs levels >= 3")
    try:
        if cfg.kind == "mechanics":
            spec = cfg.lagrangian()
            init = _initial(cfg, spec)
            steps = [cfg.get("h") / 2**i for i in range(levels)]
            finals = [mech.terminal_vector(mech.integrate(spec, init, cfg.get("t_end"), h)) for h in steps]
            return _table(steps, finals, lambda a, b: float(np.max(np.abs(a - b))))
        if cfg.kind.startswith("field-"):
            steps, finals = [], []
            for i in range(levels):
                model, grid, state = field_setup(cfg, 2**i)
                run = fld.evolve(model, grid, state, cfg.get("t_end"), record_every=10**9)
                steps.append(grid.dx)
                finals.append(run.final.phi)
            return _table(steps, finals, lambda a, b: float(np.max(np.abs(a - b[::2]))))
        steps, finals = [], []
        for i in range(levels):
            _, path, _ = solve_discrete(cfg, 2**i)
            steps.append(path.h)
            finals.append(path.q)
        return _table(steps, finals, lambda a, b: float(np.max(np.abs(a[1:-1] - b[2:-2:2]))))
    except ConfigError:
        raise
    except (HerglotzError, ValueError, ArithmeticError) as exc:
        raise ScenarioError(f"{cfg.scenario}: {type(exc).__name__}: {exc}") from exc
