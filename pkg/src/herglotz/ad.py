"""Forward-mode automatic differentiation with second-order jets.

A :class:`Jet` carries a value together with its gradient and (optionally)
Hessian with respect to ``n`` seed variables. Values may be numpy arrays, in
which case the gradient has shape ``value.shape + (n,)`` and the Hessian
``value.shape + (n, n)``; this lets one Lagrangian evaluation differentiate a
whole batch of knots at once.

Elementary functions (:func:`sin`, :func:`cos`, ...) dispatch on their
argument so that the same Lagrangian code runs on floats, arrays and jets.
"""

from __future__ import annotations

import math
from numbers import Number

import numpy as np

__all__ = [
    "Jet",
    "seed",
    "sin",
    "cos",
    "tan",
    "exp",
    "log",
    "sqrt",
    "tanh",
]


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Jet:
    """Truncated Taylor expansion ``value + grad·dx + ½ dxᵀ·hess·dx``.

    ``hess`` is ``None`` for first-order jets; mixing first- and second-order
    jets in one expression is not supported.
    """

    __slots__ = ("value", "grad", "hess")
    __array_ufunc__ = None

    def __init__(self, value, grad, hess=None):
        self.value = value
        self.grad = grad
        self.hess = hess

    # -- helpers -----------------------------------------------------------
    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        v = np.asarray(other, dtype=float) if not isinstance(other, Number) else other
        g = np.zeros(np.shape(v) + self.grad.shape[-1:])
        h = None if self.hess is None else np.zeros(np.shape(v) + self.hess.shape[-2:])
        return Jet(v, g, h)

    def _chain(self, f0, f1, f2):
        """Apply a scalar function given its value and first two derivatives."""
        if isinstance(f1, np.ndarray):
            f1 = f1[..., None]
            f2 = np.asarray(f2)[..., None, None]
            grad = f1 * self.grad
            hess = None if self.hess is None else f1[..., None] * self.hess + f2 * _outer(self.grad, self.grad)
        else:
            grad = f1 * self.grad
            hess = None if self.hess is None else f1 * self.hess + f2 * _outer(self.grad, self.grad)
        return Jet(f0, grad, hess)

    # -- arithmetic --------------------------------------------------------
    def __neg__(self):
        return Jet(-self.value, -self.grad, None if self.hess is None else -self.hess)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet):
            hess = None if self.hess is None else self.hess + other.hess
            return Jet(self.value + other.value, self.grad + other.grad, hess)
        if isinstance(other, Number) or np.ndim(other) == 0:
            return Jet(self.value + other, self.grad, self.hess)
        return self + self._lift(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self.value, other.value
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                ax = np.asarray(a)[..., None]
                bx = np.asarray(b)[..., None]
            else:
                ax, bx = a, b
            grad = ax * other.grad + bx * self.grad
            hess = None
            if self.hess is not None:
                cross = _outer(self.grad, other.grad)
                if isinstance(ax, np.ndarray):
                    ax, bx = ax[..., None], bx[..., None]
                hess = ax * other.hess + bx * self.hess + cross + np.swapaxes(cross, -1, -2)
            return Jet(a * b, grad, hess)
        if isinstance(other, Number):
            return Jet(
                self.value * other,
                self.grad * other,
                None if self.hess is None else self.hess * other,
            )
        c = np.asarray(other, dtype=float)
        return Jet(
            self.value * c,
            self.grad * c[..., None],
            None if self.hess is None else self.hess * c[..., None, None],
        )

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.value
        return self._chain(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        if not isinstance(other, Number):
            other = np.asarray(other, dtype=float)
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(log(self) * p)
        if p == 2:
            return self * self
        if p == 1:
            return self
        if p == 0:
            return self._lift(np.ones_like(self.value))
        v = self.value
        return self._chain(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def __rpow__(self, base):
        return exp(self * math.log(base))

    def __repr__(self):
        return f"Jet(value={self.value!r}, grad={self.grad!r})"


def seed(values, order: int = 2):
    """Return jets for independent variables ``values`` (last axis = variables).

    ``values`` has shape ``(n,)`` for a single point or ``(..., n)`` for a
    batch. The result is a list of ``n`` jets, the ``i``-th seeded with a unit
    gradient in direction ``i``.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    batch = values.shape[:-1]
    eye = np.eye(n)
    if not batch:
        hess = np.zeros((n, n)) if order >= 2 else None
        return [Jet(float(values[i]), eye[i], hess) for i in range(n)]
    jets = []
    for i in range(n):
        grad = np.zeros(batch + (n,))
        grad[..., i] = 1.0
        hess = np.zeros(batch + (n, n)) if order >= 2 else None
        jets.append(Jet(values[..., i], grad, hess))
    return jets


def _make(name, f0, f1, f2):
    def fn(x):
        if isinstance(x, Jet):
            v = x.value
            return x._chain(f0(v), f1(v), f2(v))
        return f0(x)

    fn.__name__ = name
    return fn


sin = _make("sin", np.sin, np.cos, lambda v: -np.sin(v))
cos = _make("cos", np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v))
tan = _make(
    "tan",
    np.tan,
    lambda v: 1.0 / np.cos(v) ** 2,
    lambda v: 2.0 * np.tan(v) / np.cos(v) ** 2,
)
exp = _make("exp", np.exp, np.exp, np.exp)
log = _make("log", np.log, lambda v: 1.0 / v, lambda v: -1.0 / v**2)
sqrt = _make(
    "sqrt",
    np.sqrt,
    lambda v: 0.5 / np.sqrt(v),
    lambda v: -0.25 / (v * np.sqrt(v)),
)
tanh = _make(
    "tanh",
    np.tanh,
    lambda v: 1.0 - np.tanh(v) ** 2,
    lambda v: -2.0 * np.tanh(v) * (1.0 - np.tanh(v) ** 2),
)
