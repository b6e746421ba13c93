"""Built-in Lagrangians, addressable by name."""

from __future__ import annotations

import math
from typing import Callable

from .ad import cos, sin
from .lagrangian import GaugeSpec, LagrangianSpec


def damped_oscillator(m: float = 1.0, k: float = 1.0, gamma: float = 0.0) -> LagrangianSpec:
    """``L = m v²/2 - k q²/2 - (gamma/m) S``; motion ``m qdd + gamma qd + k q = 0``."""

    def L(t, q, v, S):
        return 0.5 * m * v[0] * v[0] - 0.5 * k * q[0] * q[0] - (gamma / m) * S

    return LagrangianSpec(1, L, GaugeSpec.linear_in_time(-gamma / m), "damped-oscillator")


def free_particle_dissipative(m: float = 1.0, gamma: float = 0.0) -> LagrangianSpec:
    def L(t, q, v, S):
        return 0.5 * m * v[0] * v[0] - (gamma / m) * S

    return LagrangianSpec(1, L, GaugeSpec.linear_in_time(-gamma / m), "free-particle-dissipative")


def spherical_pendulum(m: float = 1.0, l: float = 1.0, g: float = 9.81, gamma: float = 0.0) -> LagrangianSpec:
    """Coordinates ``q = (theta, phi)``; polar angle measured from the downward vertical."""
    rate = gamma / (m * l)

    def L(t, q, v, S):
        s = sin(q[0])
        return (
            0.5 * m * l * l * (v[0] * v[0] + s * s * v[1] * v[1])
            + m * g * l * cos(q[0])
            - rate * S
        )

    def admissible(t, q, v, S):
        return not (abs(math.sin(q[0])) < 1e-12 and v[1] != 0.0)

    return LagrangianSpec(2, L, GaugeSpec.linear_in_time(-rate), "spherical-pendulum", admissible)


MECHANICS = {
    "damped-oscillator": (damped_oscillator, ("m", "k", "gamma")),
    "free-particle-dissipative": (free_particle_dissipative, ("m", "gamma")),
    "spherical-pendulum": (spherical_pendulum, ("m", "l", "g", "gamma")),
}


def _field_models() -> dict[str, tuple[Callable, tuple[str, ...]]]:
    from .fields1d import DampedString, DissipativeKG

    return {
        "damped-string": (DampedString, ("mu", "tension", "gamma")),
        "dissipative-kg": (DissipativeKG, ("mass", "gamma")),
    }


def names() -> list[str]:
    return list(MECHANICS) + list(_field_models())


def lookup(name: str, **params):
    """Instantiate catalog entry ``name`` with keyword parameters.

    Mechanics entries return a :class:`LagrangianSpec`; field entries return
    the corresponding field model.
    """
    table = {**MECHANICS, **_field_models()}
    if name not in table:
        raise KeyError(f"unknown Lagrangian {name!r}; choose from {sorted(table)}")
    factory, keys = table[name]
    return factory(**{k: params[k] for k in keys if k in params})


def parameter_names(name: str) -> tuple[str, ...]:
    table = {**MECHANICS, **_field_models()}
    return table[name][1]
