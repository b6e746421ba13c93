"""Generalized Noether charges along mechanics trajectories.

For a generator ``(xi, eta)`` of a one-parameter family acting on ``(t, q)``
the charge is

    Q = [sum_i p_i eta_i + L xi - sum_i p_i v_i xi] * exp(-f(t)),

with ``p = dL/dv`` and ``f`` the gauge function. With one independent
variable the canonical gauge condition holds identically, so no gauge fixing
enters here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .lagrangian import LagrangianSpec, gradient
from .mechanics import MechState, Trajectory

ZERO_FLOOR = 1e-30


@dataclass(frozen=True)
class SymmetryGenerator:
    """Infinitesimal generator; ``xi(t, q)`` is scalar, ``eta(t, q)`` has length N.

    ``q`` is passed as a sequence of coordinates, each either a float or an
    array over samples, so vectorised expressions evaluate a whole trajectory
    in one call.
    """

    xi: Callable
    eta: Callable
    name: str = "generator"


def time_translation(n_dof: int, name: str = "time_translation") -> SymmetryGenerator:
    return SymmetryGenerator(lambda t, q: 1.0, lambda t, q: [0.0] * n_dof, name)


def coordinate_translation(i: int, n_dof: int, name: str | None = None) -> SymmetryGenerator:
    """Shift of coordinate ``i`` (zero-based): ``xi = 0``, ``eta = e_i``."""

    def eta(t, q):
        out = [0.0] * n_dof
        out[i] = 1.0
        return out

    return SymmetryGenerator(lambda t, q: 0.0, eta, name or f"translation_q{i + 1}")


def _evaluate_generator(gen: SymmetryGenerator, t: np.ndarray, q: np.ndarray):
    """Return ``xi`` of shape (K,) and ``eta`` of shape (K, N) over samples."""
    cols = [q[:, i] for i in range(q.shape[1])]
    xi = np.broadcast_to(np.asarray(gen.xi(t, cols), dtype=float), t.shape)
    eta_raw = gen.eta(t, cols)
    if len(eta_raw) != q.shape[1]:
        raise ValueError(f"generator {gen.name!r} has {len(eta_raw)} eta components, expected {q.shape[1]}")
    eta = np.stack([np.broadcast_to(np.asarray(e, dtype=float), t.shape) for e in eta_raw], axis=-1)
    return xi, eta


def charge_series(spec: LagrangianSpec, t, q, v, S, gen: SymmetryGenerator) -> np.ndarray:
    """Vectorised charge over arrays of samples."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    q = np.asarray(q, dtype=float).reshape(t.size, spec.n_dof)
    v = np.asarray(v, dtype=float).reshape(t.size, spec.n_dof)
    S = np.atleast_1d(np.asarray(S, dtype=float))
    L, _, _, p, _ = gradient(spec, t, q, v, S)
    xi, eta = _evaluate_generator(gen, t, q)
    bracket = np.sum(p * eta, axis=-1) + L * xi - np.sum(p * v, axis=-1) * xi
    weight = np.exp(-np.broadcast_to(np.asarray(spec.gauge.f(t), dtype=float), t.shape))
    return bracket * weight


def charge(spec: LagrangianSpec, state: MechState, gen: SymmetryGenerator) -> float:
    return float(charge_series(spec, [state.t], state.q[None, :], state.v[None, :], [state.S], gen)[0])


@dataclass
class NoetherReport:
    generator_name: str
    t: np.ndarray
    series: np.ndarray
    threshold: float
    Q0: float = field(init=False)
    drift_abs: float = field(init=False)
    drift_rel: float = field(init=False)

    def __post_init__(self):
        self.Q0 = float(self.series[0])
        self.drift_abs = float(np.max(np.abs(self.series - self.Q0)))
        self.drift_rel = self.drift_abs / max(abs(self.Q0), ZERO_FLOOR)

    @property
    def conserved(self) -> bool:
        return self.drift_rel <= self.threshold

    @property
    def verdict(self) -> str:
        return "conserved" if self.conserved else "not conserved"

    def to_dict(self) -> dict:
        return {
            "generator_name": self.generator_name,
            "Q0": self.Q0,
            "drift_abs": self.drift_abs,
            "drift_rel": self.drift_rel,
            "verdict": self.verdict,
            "series": [[float(a), float(b)] for a, b in zip(self.t, self.series)],
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")


def drift_report(
    spec: LagrangianSpec, traj: Trajectory, gen: SymmetryGenerator, threshold: float
) -> NoetherReport:
    if len(traj) == 0:
        raise ValueError("trajectory is empty")
    series = charge_series(spec, traj.t, traj.q, traj.v, traj.S, gen)
    return NoetherReport(gen.name, np.asarray(traj.t, dtype=float).copy(), series, threshold)


def symmetry_scan(
    spec: LagrangianSpec, traj: Trajectory, gens: Sequence[SymmetryGenerator], threshold: float
) -> list[NoetherReport]:
    return [drift_report(spec, traj, g, threshold) for g in gens]
