"""Lagrangian specifications, gauge data and derivative bundles.

A Lagrangian here is a plain Python callable ``L(t, q, v, S)`` where ``q`` and
``v`` are indexable sequences of length ``n_dof``. It must be written with the
elementary functions from :mod:`herglotz.ad` (or plain arithmetic) so it can be
evaluated on jets as well as on floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ad import Jet, seed
from .errors import NonFiniteLagrangian

TOL_GRAD = 1e-6


def _zero(*x):
    return 0.0


def _zero_gradient(*x):
    return np.zeros(len(x))


@dataclass(frozen=True)
class GaugeSpec:
    """Gauge function ``f`` and its gradient ``gamma`` over the independent coordinates.

    Both take the coordinates positionally: ``f(t)`` for mechanics and
    ``f(t, x)`` for 1+1D fields. ``gamma`` returns one component per
    coordinate and must equal the gradient of ``f``; see :func:`check_gauge`.
    """

    f: Callable[..., float] = _zero
    gamma: Callable[..., Sequence[float]] = _zero_gradient

    @classmethod
    def linear_in_time(cls, rate: float, dim: int = 1) -> "GaugeSpec":
        """Gauge ``f = rate·t`` with constant gradient ``(rate, 0, ...)``."""

        def f(*x):
            return rate * x[0]

        def gamma(*x):
            g = np.zeros(dim)
            g[0] = rate
            return g

        return cls(f, gamma)


@dataclass(frozen=True)
class LagrangianSpec:
    n_dof: int
    eval: Callable
    gauge: GaugeSpec = field(default_factory=GaugeSpec)
    name: str = "custom"
    # optional (t, q, v, S) -> bool; False marks an inadmissible state
    admissible: Callable | None = None

    def __post_init__(self):
        if self.n_dof < 1:
            raise ValueError("n_dof must be positive")

    def __call__(self, t, q, v, S):
        return self.eval(t, q, v, S)

    def value(self, t, q, v, S) -> float:
        val = float(_call(self, t, np.asarray(q, dtype=float), np.asarray(v, dtype=float), S))
        if not np.isfinite(val):
            raise NonFiniteLagrangian(f"L is not finite at t={t}, q={q}, v={v}, S={S}")
        return val


@dataclass(frozen=True)
class DerivativeBundle:
    value: float
    dL_dt: float
    dL_dq: np.ndarray
    dL_dv: np.ndarray
    dL_dS: float
    d2L_dvdv: np.ndarray
    d2L_dvdq: np.ndarray  # [i, j] = d2L / dv_i dq_j
    d2L_dvdt: np.ndarray
    d2L_dvdS: np.ndarray


def _call(spec, *args):
    """Evaluate ``spec`` mapping Python arithmetic faults to :class:`NonFiniteLagrangian`."""
    try:
        # non-finite results are checked explicitly by the callers
        with np.errstate(all="ignore"):
            return spec.eval(*args)
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise NonFiniteLagrangian(f"L cannot be evaluated: {exc}") from exc


def _pack(t, q, v, S):
    return np.concatenate(([t], np.ravel(q), np.ravel(v), [S])).astype(float)


def differentiate(spec: LagrangianSpec, t, q, v, S) -> DerivativeBundle:
    """All first and the needed second partials of ``L`` at one point.

    Computed exactly (to rounding) by one evaluation on second-order jets
    seeded in ``(t, q, v, S)``.
    """
    n = spec.n_dof
    x = seed(_pack(t, q, v, S), order=2)
    out = _call(spec, x[0], x[1 : n + 1], x[n + 1 : 2 * n + 1], x[2 * n + 1])
    if not isinstance(out, Jet):
        # L independent of every argument
        m = 2 * n + 2
        out = Jet(float(out), np.zeros(m), np.zeros((m, m)))
    g, H = out.grad, out.hess
    # NaN/inf in any entry propagates into the sum
    if not math.isfinite(out.value + g.sum() + H.sum()):
        raise NonFiniteLagrangian(f"non-finite L or partials at t={t}, q={q}, v={v}, S={S}")
    iq = slice(1, n + 1)
    iv = slice(n + 1, 2 * n + 1)
    iS = 2 * n + 1
    Hvv = H[iv, iv]
    return DerivativeBundle(
        value=float(out.value),
        dL_dt=float(g[0]),
        dL_dq=g[iq].copy(),
        dL_dv=g[iv].copy(),
        dL_dS=float(g[iS]),
        d2L_dvdv=0.5 * (Hvv + Hvv.T),
        d2L_dvdq=H[iv, iq].copy(),
        d2L_dvdt=H[iv, 0].copy(),
        d2L_dvdS=H[iv, iS].copy(),
    )


def gradient(spec: LagrangianSpec, t, q, v, S):
    """Value and first partials ``(L, dL_dt, dL_dq, dL_dv, dL_dS)`` via first-order jets.

    Accepts batched inputs: ``t`` and ``S`` of shape ``(B,)``, ``q`` and ``v``
    of shape ``(B, N)``.
    """
    n = spec.n_dof
    t = np.asarray(t, dtype=float)
    S = np.asarray(S, dtype=float)
    q = np.asarray(q, dtype=float).reshape(t.shape + (n,))
    v = np.asarray(v, dtype=float).reshape(t.shape + (n,))
    packed = np.concatenate([t[..., None], q, v, S[..., None]], axis=-1)
    x = seed(packed, order=1)
    out = _call(spec, x[0], x[1 : n + 1], x[n + 1 : 2 * n + 1], x[2 * n + 1])
    if not isinstance(out, Jet):
        out = Jet(np.broadcast_to(out, t.shape).astype(float), np.zeros(t.shape + (2 * n + 2,)))
    val = np.broadcast_to(out.value, t.shape)
    g = np.broadcast_to(out.grad, t.shape + (2 * n + 2,))
    if not (np.all(np.isfinite(val)) and np.all(np.isfinite(g))):
        raise NonFiniteLagrangian("non-finite L or partials in batch evaluation")
    return val, g[..., 0], g[..., 1 : n + 1], g[..., n + 1 : 2 * n + 1], g[..., 2 * n + 1]


@dataclass(frozen=True)
class GaugeReport:
    max_deviation: np.ndarray  # per component
    tolerance: float
    passed: bool


def check_gauge(gauge: GaugeSpec, points, tol: float = TOL_GRAD, step: float = 1e-5) -> GaugeReport:
    """Compare ``gamma`` against a central-difference gradient of ``f``.

    A component passes when ``|gamma - df| <= tol * (1 + |gamma|)`` at every
    point; the reported deviation is the raw ``max |gamma - df|``.
    """
    pts = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
    if not pts:
        raise ValueError("points must be nonempty")
    d = pts[0].size
    dev = np.zeros(d)
    ok = True
    for p in pts:
        gam = np.atleast_1d(np.asarray(gauge.gamma(*p), dtype=float))
        for mu in range(d):
            e = np.zeros(d)
            e[mu] = step * max(1.0, abs(p[mu]))
            df = (gauge.f(*(p + e)) - gauge.f(*(p - e))) / (2 * e[mu])
            err = abs(gam[mu] - df)
            dev[mu] = max(dev[mu], err)
            ok &= err <= tol * (1.0 + abs(gam[mu]))
    return GaugeReport(dev, tol, bool(ok))


def canonical_gauge_defect(gamma, ds) -> np.ndarray:
    """Left side ``gamma_nu div(s) - gamma_mu d_nu s^mu`` of the canonical gauge.

    ``ds[mu, nu]`` holds ``d s^mu / d x^nu``. With one independent variable
    this vanishes identically, so mechanics never needs gauge fixing.
    """
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    ds = np.atleast_2d(np.asarray(ds, dtype=float))
    return gamma * np.trace(ds) - gamma @ ds
