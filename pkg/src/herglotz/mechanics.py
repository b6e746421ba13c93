"""Initial-value integration of action-dependent Lagrangian systems.

The coupled system is the generalized Euler-Lagrange equation

    dL/dq - d/dt dL/dv + dL/dS * dL/dv = 0

together with ``dS/dt = L``. Expanding the total time derivative by the chain
rule gives ``M qdd = r`` with ``M = d2L/dvdv``; the action ``S`` is carried as
an extra state component so the whole problem is a plain ODE of dimension
``2N + 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import NonFiniteLagrangian, SingularMassMatrix, StepFailure
from .lagrangian import DerivativeBundle, LagrangianSpec, differentiate

MAX_CONDITION = 1e12
MAX_STEPS = 10**8


@dataclass(frozen=True)
class MechState:
    t: float
    q: np.ndarray
    v: np.ndarray
    S: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", np.atleast_1d(np.asarray(self.q, dtype=float)))
        object.__setattr__(self, "v", np.atleast_1d(np.asarray(self.v, dtype=float)))
        if self.q.shape != self.v.shape:
            raise ValueError("q and v must have the same length")
        if not (np.isfinite(self.t) and np.isfinite(self.S) and np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.v))):
            raise ValueError("MechState entries must be finite")


@dataclass
class Trajectory:
    """Uniformly sampled solution; row ``k`` is the state at ``t[k]``."""

    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    S: np.ndarray
    h: float
    integrator: str = "rk4"

    def __len__(self):
        return len(self.t)

    def state(self, k: int) -> MechState:
        return MechState(float(self.t[k]), self.q[k].copy(), self.v[k].copy(), float(self.S[k]))

    @property
    def samples(self) -> Iterator[MechState]:
        return (self.state(k) for k in range(len(self)))

    @property
    def final(self) -> MechState:
        return self.state(len(self) - 1)

    def to_csv(self, path) -> None:
        write_trajectory_csv(self, path)


def _bundle(spec, state: MechState) -> DerivativeBundle:
    return differentiate(spec, state.t, state.q, state.v, state.S)


def _solve_mass(M: np.ndarray, r: np.ndarray) -> np.ndarray:
    try:
        Minv = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        raise SingularMassMatrix("d2L/dvdv is singular") from None
    # 1-norm condition number; N is small so the explicit inverse is cheap
    cond = np.abs(M).sum(axis=0).max() * np.abs(Minv).sum(axis=0).max()
    if not cond <= MAX_CONDITION:
        raise SingularMassMatrix(f"d2L/dvdv is singular (condition number {cond:.3g})")
    return Minv @ r


def _accel_from_bundle(b: DerivativeBundle, v: np.ndarray) -> np.ndarray:
    r = b.dL_dq - b.d2L_dvdt - b.d2L_dvdq @ v - b.d2L_dvdS * b.value + b.dL_dS * b.dL_dv
    return _solve_mass(b.d2L_dvdv, r)


def accelerations(spec: LagrangianSpec, state: MechState) -> np.ndarray:
    """Solve the generalized Euler-Lagrange equation for ``qdd`` at ``state``."""
    return _accel_from_bundle(_bundle(spec, state), state.v)


def el_residual(spec: LagrangianSpec, state: MechState, qdd) -> np.ndarray:
    """``dL/dq - d/dt dL/dv + dL/dS dL/dv`` with the given accelerations and ``dS/dt = L``."""
    b = _bundle(spec, state)
    qdd = np.atleast_1d(np.asarray(qdd, dtype=float))
    ddt_p = b.d2L_dvdt + b.d2L_dvdq @ state.v + b.d2L_dvdv @ qdd + b.d2L_dvdS * b.value
    return b.dL_dq - ddt_p + b.dL_dS * b.dL_dv


def _rhs(spec: LagrangianSpec, t: float, y: np.ndarray, n: int) -> np.ndarray:
    q, v, S = y[:n], y[n : 2 * n], y[2 * n]
    if not math.isfinite(y.sum()):
        raise StepFailure(f"non-finite state at t={t}")
    if spec.admissible is not None and not spec.admissible(t, q, v, S):
        raise StepFailure(f"state left the admissible domain at t={t}")
    try:
        b = differentiate(spec, t, q, v, S)
    except NonFiniteLagrangian as exc:
        raise StepFailure(str(exc)) from exc
    out = np.empty_like(y)
    out[:n] = v
    out[n : 2 * n] = _accel_from_bundle(b, v)
    out[2 * n] = b.value
    return out


def sample_count(t0: float, t_end: float, h: float) -> int:
    return int(math.floor((t_end - t0) / h * (1.0 + 1e-12) + 1e-9)) + 1


def integrate(spec: LagrangianSpec, init: MechState, t_end: float, h: float) -> Trajectory:
    """Fixed-step classical fourth-order Runge-Kutta on ``(q, v, S)``.

    Returns ``floor((t_end - t0)/h) + 1`` samples at ``t0 + k*h``.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    if not t_end > init.t:
        raise ValueError("t_end must exceed the initial time")
    n = spec.n_dof
    if init.q.size != n:
        raise ValueError(f"initial state has {init.q.size} coordinates, spec expects {n}")
    count = sample_count(init.t, t_end, h)
    if count - 1 > MAX_STEPS:
        raise ValueError("too many steps requested")

    ts = init.t + h * np.arange(count)
    ys = np.empty((count, 2 * n + 1))
    y = np.concatenate([init.q, init.v, [init.S]])
    ys[0] = y
    for k in range(count - 1):
        t = ts[k]
        k1 = _rhs(spec, t, y, n)
        k2 = _rhs(spec, t + 0.5 * h, y + 0.5 * h * k1, n)
        k3 = _rhs(spec, t + 0.5 * h, y + 0.5 * h * k2, n)
        k4 = _rhs(spec, t + h, y + h * k3, n)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ys[k + 1] = y
    if not np.all(np.isfinite(ys[-1])):
        raise StepFailure("integration produced non-finite values")
    return Trajectory(ts, ys[:, :n].copy(), ys[:, n : 2 * n].copy(), ys[:, 2 * n].copy(), h)


@dataclass(frozen=True)
class ConvergenceResult:
    h: np.ndarray
    errors: np.ndarray
    orders: np.ndarray
    nominal: float
    band: float = 0.3

    @property
    def order(self) -> float:
        return float(self.orders[-1])

    @property
    def passed(self) -> bool:
        return abs(self.order - self.nominal) <= self.band


def terminal_vector(traj: Trajectory) -> np.ndarray:
    return np.concatenate([traj.q[-1], traj.v[-1], [traj.S[-1]]])


def convergence_order(
    spec: LagrangianSpec,
    init: MechState,
    t_end: float,
    h_list: Sequence[float],
    reference: np.ndarray | None = None,
    nominal: float = 4.0,
) -> ConvergenceResult:
    """Observed order from terminal-state errors under step halving.

    Without ``reference`` the errors are differences between consecutive
    levels (Richardson self-convergence), so ``len(h_list) - 1`` errors and
    ``len(h_list) - 2`` orders are produced.
    """
    h_list = [float(h) for h in h_list]
    if len(h_list) < 3:
        raise ValueError("convergence_order needs at least three step sizes")
    for a, b in zip(h_list, h_list[1:]):
        if not math.isclose(a / b, 2.0, rel_tol=1e-9):
            raise ValueError("step sizes must halve successively")
    finals, times = [], []
    for h in h_list:
        traj = integrate(spec, init, t_end, h)
        finals.append(terminal_vector(traj))
        times.append(traj.t[-1])
    if max(times) - min(times) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError("step sizes do not all land on the same terminal time")
    if reference is None:
        errors = np.array([np.max(np.abs(a - b)) for a, b in zip(finals, finals[1:])])
    else:
        errors = np.array([np.max(np.abs(f - reference)) for f in finals])
    orders = np.log2(errors[:-1] / errors[1:])
    return ConvergenceResult(np.array(h_list), errors, orders, nominal)


def shoot(
    spec: LagrangianSpec,
    t_a: float,
    q_a,
    s_a: float,
    t_b: float,
    q_b,
    h: float,
    v_guess=None,
    tol: float = 1e-12,
    max_iter: int = 30,
) -> Trajectory:
    """Boundary-value reference by Newton iteration on the initial velocity."""
    q_a = np.atleast_1d(np.asarray(q_a, dtype=float))
    q_b = np.atleast_1d(np.asarray(q_b, dtype=float))
    n = q_a.size
    v = np.zeros(n) if v_guess is None else np.atleast_1d(np.asarray(v_guess, dtype=float)).copy()

    def miss(v0):
        traj = integrate(spec, MechState(t_a, q_a, v0, s_a), t_b, h)
        return traj.q[-1] - q_b, traj

    for _ in range(max_iter):
        r, traj = miss(v)
        if np.max(np.abs(r)) <= tol:
            return traj
        J = np.empty((n, n))
        for j in range(n):
            dv = 1e-6 * max(1.0, abs(v[j]))
            e = np.zeros(n)
            e[j] = dv
            J[:, j] = (miss(v + e)[0] - miss(v - e)[0]) / (2 * dv)
        v = v - np.linalg.solve(J, r)
    r, traj = miss(v)
    if np.max(np.abs(r)) > max(tol, 1e-9):
        raise StepFailure(f"shooting did not converge (miss {np.max(np.abs(r)):.3e})")
    return traj


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = traj.q.shape[1]
    header = ["t"] + [f"q{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)] + ["S"]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(traj)):
            row = [traj.t[k], *traj.q[k], *traj.v[k], traj.S[k]]
            w.writerow([_fmt(x) for x in row])


def read_trajectory_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = (data.shape[1] - 2) // 2
    t = data[:, 0]
    h = float(t[1] - t[0]) if len(t) > 1 else 0.0
    return Trajectory(t, data[:, 1 : n + 1], data[:, n + 1 : 2 * n + 1], data[:, -1], h)
