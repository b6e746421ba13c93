"""Direct variational solution of the discretized Herglotz problem.

The action is advanced by the explicit rectangle rule with forward-difference
velocities,

    S_{k+1} = S_k + h L(t_k, q_k, (q_{k+1} - q_k)/h, S_k),

and the terminal value ``S_K`` is made stationary with respect to the interior
knots ``q_1 .. q_{K-1}``. The gradient is accumulated backwards through the
recurrence; each step contributes a factor ``1 + h dL/dS``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

from .errors import NoConvergence, NonFiniteLagrangian, SingularJacobian
from .lagrangian import LagrangianSpec, gradient


@dataclass
class DiscretePath:
    """Knots ``q[k]`` at ``t_a + k h`` and the actions ``S[k]`` they induce.

    ``S`` is always recomputed from ``q`` (see :meth:`with_knots`), never
    edited independently.
    """

    spec: LagrangianSpec
    t_a: float
    h: float
    q: np.ndarray  # (K + 1, N)
    S: np.ndarray  # (K + 1,)

    @property
    def K(self) -> int:
        return len(self.q) - 1

    @property
    def t(self) -> np.ndarray:
        return self.t_a + self.h * np.arange(self.K + 1)

    @classmethod
    def from_knots(cls, spec: LagrangianSpec, q, s_a: float, h: float, t_a: float = 0.0) -> "DiscretePath":
        q = np.asarray(q, dtype=float)
        if q.ndim == 1:
            q = q[:, None]
        if q.shape[1] != spec.n_dof:
            raise ValueError(f"knots have {q.shape[1]} coordinates, spec expects {spec.n_dof}")
        if q.shape[0] < 3:
            raise ValueError("need K >= 2")
        if not h > 0:
            raise ValueError("step h must be positive")
        return cls(spec, float(t_a), float(h), q, _forward(spec, t_a, h, q, s_a))

    def with_knots(self, q) -> "DiscretePath":
        return DiscretePath.from_knots(self.spec, q, float(self.S[0]), self.h, self.t_a)

    @property
    def S_K(self) -> float:
        return float(self.S[-1])

    def to_csv(self, path) -> None:
        n = self.q.shape[1]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "t"] + [f"q{i + 1}" for i in range(n)] + ["S"])
            for k in range(self.K + 1):
                row = [format(float(x), ".17g") for x in (self.t[k], *self.q[k], self.S[k])]
                w.writerow([str(k)] + row)


def _forward(spec, t_a, h, q, s_a) -> np.ndarray:
    K = len(q) - 1
    S = np.empty(K + 1)
    S[0] = s_a
    for k in range(K):
        val = spec.value(t_a + k * h, q[k], (q[k + 1] - q[k]) / h, S[k])
        S[k + 1] = S[k] + h * val
    if not np.all(np.isfinite(S)):
        raise NonFiniteLagrangian("discrete action is not finite")
    return S


def discrete_action(spec: LagrangianSpec, path: DiscretePath) -> float:
    """Terminal action ``S_K`` of ``path`` recomputed from its knots."""
    return float(_forward(spec, path.t_a, path.h, path.q, path.S[0])[-1])


def adjoint_gradient(spec: LagrangianSpec, path: DiscretePath) -> np.ndarray:
    """``dS_K/dq_j`` for the interior knots ``j = 1 .. K-1``; shape ``(K-1, N)``.

    With ``lam_K = 1`` and ``lam_k = lam_{k+1} (1 + h L_S,k)``,

        dS_K/dq_j = lam_{j+1} (h L_q,j - L_v,j) + lam_j L_v,j-1.
    """
    h, K = path.h, path.K
    q = path.q
    S = _forward(spec, path.t_a, h, q, path.S[0])
    v = (q[1:] - q[:-1]) / h
    _, _, Lq, Lv, LS = gradient(spec, path.t[:-1], q[:-1], v, S[:-1])
    lam = np.empty(K + 1)
    lam[K] = 1.0
    for k in range(K - 1, -1, -1):
        lam[k] = lam[k + 1] * (1.0 + h * LS[k])
    j = np.arange(1, K)
    return lam[j + 1, None] * (h * Lq[j] - Lv[j]) + lam[j, None] * Lv[j - 1]


class _Problem:
    def __init__(self, spec, q_a, q_b, s_a, K, h, t_a):
        self.spec, self.s_a, self.h, self.t_a = spec, s_a, h, t_a
        self.q_a, self.q_b, self.K = q_a, q_b, K
        self.n = spec.n_dof

    def path(self, x) -> DiscretePath:
        q = np.vstack([self.q_a, x.reshape(self.K - 1, self.n), self.q_b])
        return DiscretePath.from_knots(self.spec, q, self.s_a, self.h, self.t_a)

    def residual(self, x) -> np.ndarray:
        return adjoint_gradient(self.spec, self.path(x)).ravel()

    def jacobian(self, x, g0) -> np.ndarray:
        """Finite differences of the gradient.

        Knot ``j`` only enters gradient rows ``j-1 .. j+1`` directly, but the
        action weights couple all rows, so the full columns are formed.
        """
        m = x.size
        J = np.empty((m, m))
        for i in range(m):
            e = 1e-6 * max(1.0, abs(x[i]))
            xp = x.copy()
            xm = x.copy()
            xp[i] += e
            xm[i] -= e
            J[:, i] = (self.residual(xp) - self.residual(xm)) / (2 * e)
        return J


def solve_stationary(
    spec: LagrangianSpec,
    q_a,
    q_b,
    s_a: float,
    K: int,
    h: float,
    tol: float = 1e-10,
    max_iter: int = 50,
    damping: float = 1.0,
    t_a: float = 0.0,
    quasi_newton_fallback: bool = True,
) -> DiscretePath:
    """Stationary path of ``S_K`` by damped Newton iteration from the straight line.

    Each Newton step starts at length ``damping`` and is halved until the
    gradient max-norm decreases. Convergence means ``max |grad| <= tol``. A
    singular finite-difference Jacobian switches to Broyden's method when
    ``quasi_newton_fallback`` is set, else :class:`SingularJacobian` is raised.
    """
    if K < 2:
        raise ValueError("need K >= 2")
    if not (h > 0 and tol > 0 and 0 < damping <= 1):
        raise ValueError("need h > 0, tol > 0 and 0 < damping <= 1")
    q_a = np.atleast_1d(np.asarray(q_a, dtype=float))
    q_b = np.atleast_1d(np.asarray(q_b, dtype=float))
    prob = _Problem(spec, q_a, q_b, float(s_a), K, float(h), float(t_a))
    frac = np.arange(1, K)[:, None] / K
    x = ((1 - frac) * q_a + frac * q_b).ravel()

    g = prob.residual(x)
    for _ in range(max_iter):
        if np.max(np.abs(g)) <= tol:
            return prob.path(x)
        J = prob.jacobian(x, g)
        try:
            cond = np.linalg.cond(J)
            if not np.isfinite(cond) or cond > 1e14:
                raise np.linalg.LinAlgError
            dx = np.linalg.solve(J, g)
        except np.linalg.LinAlgError:
            if not quasi_newton_fallback:
                raise SingularJacobian("finite-difference Jacobian of the gradient is singular") from None
            return _broyden(prob, x, tol, max_iter)
        x, g = _line_search(prob, x, g, dx, damping)
    if np.max(np.abs(g)) <= tol:
        return prob.path(x)
    raise NoConvergence(
        f"gradient norm {np.max(np.abs(g)):.3e} > tol {tol:.1e} after {max_iter} iterations",
        path=prob.path(x),
        residual=float(np.max(np.abs(g))),
    )


def _line_search(prob: _Problem, x, g, dx, alpha, max_halvings: int = 30):
    """Backtrack from ``alpha`` until the gradient max-norm decreases.

    If no tried step decreases it the smallest one is taken, so the iteration
    budget still bounds the work.
    """
    norm0 = np.max(np.abs(g))
    for _ in range(max_halvings):
        x_new = x - alpha * dx
        try:
            g_new = prob.residual(x_new)
        except NonFiniteLagrangian:
            g_new = None
        if g_new is not None and np.max(np.abs(g_new)) < (1 - 1e-4 * alpha) * norm0:
            return x_new, g_new
        alpha *= 0.5
    if g_new is None:
        raise NoConvergence("line search left the domain of the Lagrangian", path=prob.path(x), residual=float(norm0))
    return x_new, g_new


def _broyden(prob: _Problem, x0, tol, max_iter) -> DiscretePath:
    # the outcome is checked below, so intermediate overflow warnings are noise
    with np.errstate(all="ignore"):
        sol = optimize.root(prob.residual, x0, method="broyden1", options={"fatol": tol, "maxiter": max_iter * 10})
    g = prob.residual(sol.x)
    res = float(np.max(np.abs(g)))
    if res > tol:
        raise NoConvergence(f"quasi-Newton fallback stalled at {res:.3e}", path=prob.path(sol.x), residual=res)
    return prob.path(sol.x)


def interior_deviation(path: DiscretePath, t_ref, q_ref) -> float:
    """Max knot deviation from a reference sampled at (at least) the knot times."""
    t_ref = np.asarray(t_ref, dtype=float)
    q_ref = np.asarray(q_ref, dtype=float).reshape(len(t_ref), -1)
    idx = np.searchsorted(t_ref, path.t - 1e-9 * max(1.0, path.h))
    if np.any(idx >= len(t_ref)) or np.any(np.abs(t_ref[np.minimum(idx, len(t_ref) - 1)] - path.t) > 1e-9):
        raise ValueError("reference is not sampled at the knot times")
    return float(np.max(np.abs(path.q[1:-1] - q_ref[idx[1:-1]])))


def step_count(t_a: float, t_b: float, h: float) -> int:
    K = int(round((t_b - t_a) / h))
    if not math.isclose(t_a + K * h, t_b, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("K h must span [t_a, t_b]")
    return K
