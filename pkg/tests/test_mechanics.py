import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from herglotz import ad, catalog
from herglotz.errors import SingularMassMatrix, StepFailure
from herglotz.lagrangian import LagrangianSpec
from herglotz.mechanics import (
    MechState,
    accelerations,
    convergence_order,
    el_residual,
    integrate,
    read_trajectory_csv,
    sample_count,
    shoot,
)


def oscillator_exact(m, k, gamma, q0, v0, T):
    """Closed-form underdamped q, v and the action by adaptive quadrature."""
    beta = gamma / (2 * m)
    w = math.sqrt(k / m - beta**2)
    A, B = q0, (v0 + beta * q0) / w

    def q(t):
        return math.exp(-beta * t) * (A * math.cos(w * t) + B * math.sin(w * t))

    def v(t):
        e = math.exp(-beta * t)
        return e * (-beta * (A * math.cos(w * t) + B * math.sin(w * t)) + w * (-A * math.sin(w * t) + B * math.cos(w * t)))

    c = gamma / m
    # dS/dt = K - U - c S  =>  S(T) = int_0^T e^{-c (T - s)} (K - U)(s) ds
    S, _ = sp_integrate.quad(
        lambda s: math.exp(-c * (T - s)) * (0.5 * m * v(s) ** 2 - 0.5 * k * q(s) ** 2), 0, T, epsabs=1e-13, epsrel=1e-12, limit=200
    )
    return q(T), v(T), S


# -- accelerations and residuals --------------------------------------------------


def test_damped_particle_acceleration():
    spec = catalog.free_particle_dissipative(m=1.0, gamma=0.5)
    assert accelerations(spec, MechState(0.0, [0.3], [2.0], 0.7))[0] == pytest.approx(-1.0, abs=1e-15)


def test_free_particle_does_not_accelerate():
    spec = catalog.damped_oscillator(m=2.0, k=0.0, gamma=0.0)
    assert accelerations(spec, MechState(1.0, [5.0], [3.0], 2.0))[0] == 0.0


def test_pendulum_equatorial_accelerations():
    m, l, g, gamma, w = 1.0, 1.0, 9.81, 0.1, 2.0
    spec = catalog.spherical_pendulum(m, l, g, gamma)
    state = MechState(0.0, [math.pi / 2, 0.3], [0.0, w], 0.4)
    qdd = accelerations(spec, state)
    # at the equator: theta_dd = sin cos phi_d^2 - g/l sin = -g/l
    assert qdd[0] == pytest.approx(-g / l, abs=1e-12)
    assert qdd[1] == pytest.approx(-(gamma / (m * l)) * w, abs=1e-12)
    assert np.max(np.abs(el_residual(spec, state, qdd))) <= 1e-9


def test_pendulum_accelerations_match_hand_derived_equations():
    m, l, g, gamma = 1.2, 0.8, 9.81, 0.3
    spec = catalog.spherical_pendulum(m, l, g, gamma)
    th, ph, thd, phd = 0.9, 0.1, -0.4, 1.3
    qdd = accelerations(spec, MechState(0.0, [th, ph], [thd, phd], 0.2))
    rate = gamma / (m * l)
    # m l^2 thdd = m l^2 sin cos phd^2 - m g l sin - rate m l^2 thd
    thdd = math.sin(th) * math.cos(th) * phd**2 - g / l * math.sin(th) - rate * thd
    # d/dt(m l^2 sin^2 phd) = -rate m l^2 sin^2 phd
    phdd = -2 * math.cos(th) / math.sin(th) * thd * phd - rate * phd
    np.testing.assert_allclose(qdd, [thdd, phdd], rtol=1e-12)


def test_residual_of_oscillator():
    spec = catalog.damped_oscillator(1.0, 1.0, 0.1)
    state = MechState(0.0, [1.0], [0.0], 0.0)
    assert el_residual(spec, state, [-1.0])[0] == pytest.approx(0.0, abs=1e-15)
    assert el_residual(spec, state, [0.0])[0] == pytest.approx(-1.0)


def test_residual_vanishes_at_computed_accelerations():
    rng = np.random.default_rng(1)
    spec = catalog.spherical_pendulum(gamma=0.4)
    for _ in range(20):
        st = MechState(rng.uniform(0, 2), rng.uniform(0.3, 2.8, 2), rng.normal(size=2), rng.normal())
        assert np.max(np.abs(el_residual(spec, st, accelerations(spec, st)))) <= 1e-9


def test_pole_is_not_a_mass_matrix_failure():
    spec = catalog.spherical_pendulum(gamma=0.1)
    b = accelerations(spec, MechState(0.0, [1e-3, 0.0], [0.1, 0.0], 0.0))
    assert np.all(np.isfinite(b))


def test_velocity_linear_lagrangian_is_singular():
    spec = LagrangianSpec(1, lambda t, q, v, S: q[0] * v[0] - 0.5 * q[0] * q[0])
    with pytest.raises(SingularMassMatrix):
        accelerations(spec, MechState(0.0, [1.0], [1.0], 0.0))


def test_ill_conditioned_mass_matrix():
    spec = LagrangianSpec(2, lambda t, q, v, S: 0.5 * v[0] * v[0] + 0.5e-14 * v[1] * v[1])
    with pytest.raises(SingularMassMatrix):
        accelerations(spec, MechState(0.0, [0.0, 0.0], [1.0, 1.0], 0.0))


def test_state_must_be_finite():
    with pytest.raises(ValueError):
        MechState(0.0, [math.nan], [0.0])
    with pytest.raises(ValueError):
        MechState(0.0, [1.0, 2.0], [0.0])


# -- integration --------------------------------------------------------------------


def test_damped_particle_closed_form():
    spec = catalog.free_particle_dissipative(m=1.0, gamma=0.5)
    traj = integrate(spec, MechState(0.0, [0.0], [1.0], 0.0), 5.0, 1e-3)
    assert len(traj) == 5001
    assert traj.t[-1] == pytest.approx(5.0)
    assert traj.q[-1, 0] == pytest.approx(2.0 * (1 - math.exp(-2.5)), abs=1e-8)
    assert traj.q[-1, 0] == pytest.approx(1.8358, abs=1e-4)


def test_harmonic_period():
    spec = catalog.damped_oscillator(1.0, 1.0, 0.0)
    traj = integrate(spec, MechState(0.0, [1.0], [0.0]), 2 * math.pi, 2 * math.pi / 1000)
    assert traj.q[-1, 0] == pytest.approx(1.0, abs=1e-7)


def test_initial_action_rate():
    spec = catalog.damped_oscillator(1.0, 1.0, 0.1)
    traj = integrate(spec, MechState(0.0, [1.0], [0.0]), 0.1, 1e-3)
    assert traj.S[0] == 0.0
    assert spec.value(0.0, [1.0], [0.0], 0.0) == -0.5
    # forward difference of S approaches L(0)
    assert (traj.S[1] - traj.S[0]) / 1e-3 == pytest.approx(-0.5, abs=1e-3)


def test_samples_are_uniform_and_increasing():
    spec = catalog.damped_oscillator(1.0, 1.0, 0.1)
    traj = integrate(spec, MechState(0.5, [1.0], [0.0]), 1.73, 0.01)
    assert len(traj) == sample_count(0.5, 1.73, 0.01) == 124
    dt = np.diff(traj.t)
    assert np.all(dt > 0)
    assert np.max(np.abs(dt - 0.01)) <= 1e-12 * 0.01 * 200
    assert traj.integrator == "rk4"
    assert traj.final.t == traj.t[-1]


def test_integrate_preconditions():
    spec = catalog.damped_oscillator()
    init = MechState(0.0, [1.0], [0.0])
    with pytest.raises(ValueError):
        integrate(spec, init, 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate(spec, init, 0.0, 0.1)
    with pytest.raises(ValueError):
        integrate(spec, MechState(0.0, [1.0, 0.0], [0.0, 0.0]), 1.0, 0.1)


def test_pole_with_azimuthal_velocity_fails():
    spec = catalog.spherical_pendulum(gamma=0.1)
    with pytest.raises(StepFailure):
        integrate(spec, MechState(0.0, [0.0, 0.0], [0.0, 1.0]), 1.0, 0.01)


def test_non_finite_lagrangian_during_integration():
    spec = LagrangianSpec(1, lambda t, q, v, S: 0.5 * v[0] * v[0] - ad.sqrt(q[0]))
    with pytest.raises(StepFailure):
        # pulled towards q = 0, where sqrt leaves its domain
        integrate(spec, MechState(0.0, [0.5], [-1.0]), 2.0, 0.01)


def test_matches_closed_form_oscillator_with_action():
    m, k, gamma = 1.0, 1.0, 0.1
    spec = catalog.damped_oscillator(m, k, gamma)
    traj = integrate(spec, MechState(0.0, [1.0], [0.0]), 5.0, 1e-2)
    q, v, S = oscillator_exact(m, k, gamma, 1.0, 0.0, 5.0)
    np.testing.assert_allclose([traj.q[-1, 0], traj.v[-1, 0], traj.S[-1]], [q, v, S], atol=1e-9)


def test_convergence_order_with_closed_form_reference():
    m, k, gamma = 1.0, 1.0, 0.1
    spec = catalog.damped_oscillator(m, k, gamma)
    ref = np.array(oscillator_exact(m, k, gamma, 1.0, 0.0, 5.0))
    res = convergence_order(spec, MechState(0.0, [1.0], [0.0]), 5.0, [0.1, 0.05, 0.025], reference=ref)
    assert res.passed, res.orders
    assert res.order == pytest.approx(4.0, abs=0.3)


def test_self_convergence_order():
    spec = catalog.spherical_pendulum(gamma=0.2)
    res = convergence_order(spec, MechState(0.0, [1.0, 0.0], [0.0, 1.0]), 2.0, [0.04, 0.02, 0.01, 0.005])
    assert len(res.errors) == 3 and len(res.orders) == 2
    assert res.passed, res.orders


def test_convergence_order_needs_three_halving_steps():
    spec = catalog.damped_oscillator()
    init = MechState(0.0, [1.0], [0.0])
    with pytest.raises(ValueError):
        convergence_order(spec, init, 1.0, [0.1, 0.05])
    with pytest.raises(ValueError):
        convergence_order(spec, init, 1.0, [0.1, 0.03, 0.01])


def _classical_pendulum_rk4(g, l, y, h, n):
    def f(y):
        th, ph, thd, phd = y
        s, c = math.sin(th), math.cos(th)
        return np.array([thd, phd, s * c * phd**2 - g / l * s, -2 * c / s * thd * phd])

    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def test_conservative_reduction_matches_classical_equations():
    g, l = 9.81, 1.0
    spec = catalog.spherical_pendulum(1.0, l, g, 0.0)
    traj = integrate(spec, MechState(0.0, [1.0, 0.0], [0.2, 1.0]), 2.0, 1e-3)
    y = _classical_pendulum_rk4(g, l, np.array([1.0, 0.0, 0.2, 1.0]), 1e-3, 2000)
    np.testing.assert_allclose(np.concatenate([traj.q[-1], traj.v[-1]]), y, atol=1e-10)


def test_action_derivative_reproduces_lagrangian():
    spec = catalog.spherical_pendulum(gamma=0.2)
    errs = []
    for h in (1e-2, 5e-3):
        traj = integrate(spec, MechState(0.0, [1.0, 0.0], [0.0, 1.0]), 2.0, h)
        S = traj.S
        dS = (S[:-4] - 8 * S[1:-3] + 8 * S[3:-1] - S[4:]) / (12 * h)
        L = np.array([spec.value(traj.t[k], traj.q[k], traj.v[k], S[k]) for k in range(2, len(S) - 2)])
        errs.append(np.max(np.abs(dS - L)))
    assert errs[1] <= 1e-4
    assert math.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.3)


def test_time_reversibility_of_free_motion():
    spec = catalog.free_particle_dissipative(m=1.0, gamma=0.0)
    fwd = integrate(spec, MechState(0.0, [0.3], [1.7], 0.0), 3.0, 1e-2)
    end = fwd.final
    back = integrate(spec, MechState(0.0, end.q, -end.v, 0.0), 3.0, 1e-2)
    assert back.q[-1, 0] == pytest.approx(0.3, abs=1e-9)
    assert -back.v[-1, 0] == pytest.approx(1.7, abs=1e-9)


def test_shooting_hits_target():
    spec = catalog.damped_oscillator(1.0, 1.0, 0.1)
    traj = shoot(spec, 0.0, [1.0], 0.0, 2.0, [0.25], 1e-2)
    assert traj.q[-1, 0] == pytest.approx(0.25, abs=1e-12)
    assert traj.q[0, 0] == 1.0


def test_csv_round_trip(tmp_path):
    spec = catalog.spherical_pendulum(gamma=0.1)
    traj = integrate(spec, MechState(0.0, [1.0, 0.0], [0.0, 1.0]), 0.2, 0.01)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,q1,q2,v1,v2,S"
    back = read_trajectory_csv(path)
    np.testing.assert_array_equal(back.q, traj.q)
    np.testing.assert_array_equal(back.S, traj.S)
    np.testing.assert_array_equal(back.t, traj.t)
