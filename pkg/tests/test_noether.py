import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from herglotz import catalog
from herglotz.lagrangian import GaugeSpec, LagrangianSpec
from herglotz.mechanics import MechState, integrate
from herglotz.noether import (
    NoetherReport,
    SymmetryGenerator,
    charge,
    charge_series,
    coordinate_translation,
    drift_report,
    symmetry_scan,
    time_translation,
)

small = st.floats(min_value=-3, max_value=3, allow_nan=False)

M, L_ARM, G, GAMMA = 1.0, 1.0, 9.81, 0.1


@pytest.fixture(scope="module")
def pendulum():
    spec = catalog.spherical_pendulum(M, L_ARM, G, GAMMA)
    return spec, integrate(spec, MechState(0.0, [1.0, 0.0], [0.0, 1.0]), 5.0, 1e-3)


def bogus(n_dof):
    return SymmetryGenerator(lambda t, q: 0.0, lambda t, q: list(q), "bogus")


def test_oscillator_time_translation_charge_at_rest():
    spec = catalog.damped_oscillator(1.0, 1.0, 0.1)
    assert charge(spec, MechState(0.0, [1.0], [0.0], 0.0), time_translation(1)) == pytest.approx(-0.5)


@given(small, small, small, st.floats(min_value=0, max_value=5))
def test_oscillator_charge_matches_weighted_energy(q, v, S, t):
    m, k, gamma = 1.3, 0.7, 0.2
    spec = catalog.damped_oscillator(m, k, gamma)
    expected = -(0.5 * m * v * v + 0.5 * k * q * q + (gamma / m) * S) * math.exp(gamma * t / m)
    got = charge(spec, MechState(t, [q], [v], S), time_translation(1))
    assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)


@given(small, small, small)
def test_conservative_time_charge_is_minus_hamiltonian(q, v, S):
    spec = catalog.damped_oscillator(2.0, 3.0, 0.0)
    H = 0.5 * 2.0 * v * v + 0.5 * 3.0 * q * q
    assert charge(spec, MechState(0.7, [q], [v], S), time_translation(1)) == pytest.approx(-H, rel=1e-12, abs=1e-12)


def test_particle_momentum_charge_is_exactly_conserved():
    m, gamma, v0 = 2.0, 0.5, 1.5
    spec = catalog.free_particle_dissipative(m, gamma)
    traj = integrate(spec, MechState(0.0, [0.0], [v0]), 4.0, 1e-2)
    gen = coordinate_translation(0, 1)
    series = charge_series(spec, traj.t, traj.q, traj.v, traj.S, gen)
    # closed form v = v0 exp(-gamma t / m) makes m v exp(gamma t / m) = m v0
    np.testing.assert_allclose(m * v0 * np.exp(-gamma * traj.t / m) * np.exp(gamma * traj.t / m), m * v0)
    np.testing.assert_allclose(series, m * v0, rtol=1e-10)
    rep = drift_report(spec, traj, gen, 1e-9)
    assert rep.conserved and rep.Q0 == pytest.approx(m * v0)


def test_pendulum_azimuthal_charge(pendulum):
    spec, traj = pendulum
    rep = drift_report(spec, traj, coordinate_translation(1, 2, "azimuthal"), 1e-5)
    assert rep.verdict == "conserved"
    assert rep.drift_rel <= 1e-6
    # closed-form oracle on the unweighted momentum
    p_phi = M * L_ARM**2 * np.sin(traj.q[:, 0]) ** 2 * traj.v[:, 1]
    rate = GAMMA / (M * L_ARM)
    np.testing.assert_allclose(p_phi, p_phi[0] * np.exp(-rate * traj.t), rtol=1e-6)


def test_pendulum_time_translation_charge(pendulum):
    spec, traj = pendulum
    rep = drift_report(spec, traj, time_translation(2), 1e-6)
    assert rep.conserved
    th, thd, phd = traj.q[:, 0], traj.v[:, 0], traj.v[:, 1]
    E = 0.5 * M * L_ARM**2 * (thd**2 + np.sin(th) ** 2 * phd**2) - M * G * L_ARM * np.cos(th)
    rate = GAMMA / (M * L_ARM)
    np.testing.assert_allclose(rep.series, -(E + rate * traj.S) * np.exp(rate * traj.t), rtol=1e-12)


def test_bogus_generator_is_not_conserved():
    spec = catalog.damped_oscillator(1.0, 1.0, 0.1)
    traj = integrate(spec, MechState(0.0, [1.0], [0.0]), 10.0, 1e-2)
    rep = drift_report(spec, traj, bogus(1), 1e-6)
    assert rep.verdict == "not conserved"
    assert rep.drift_abs > 0.1


def test_symmetry_scan(pendulum):
    spec, traj = pendulum
    gens = [time_translation(2), coordinate_translation(1, 2), bogus(2)]
    reports = symmetry_scan(spec, traj, gens, 1e-5)
    assert [r.verdict for r in reports] == ["conserved", "conserved", "not conserved"]
    assert [r.generator_name for r in reports] == [g.name for g in gens]
    assert symmetry_scan(spec, traj, [], 1e-5) == []
    a, b = symmetry_scan(spec, traj, [gens[0], gens[0]], 1e-5)
    np.testing.assert_array_equal(a.series, b.series)
    assert a.to_dict() == b.to_dict()


def test_gauge_shift_rescales_charges(pendulum):
    spec, traj = pendulum
    c = 0.7
    f0, gamma = spec.gauge.f, spec.gauge.gamma
    shifted = LagrangianSpec(spec.n_dof, spec.eval, GaugeSpec(lambda t: f0(t) + c, gamma), spec.name)
    for gen in (time_translation(2), coordinate_translation(1, 2), bogus(2)):
        a = drift_report(spec, traj, gen, 1e-5)
        b = drift_report(shifted, traj, gen, 1e-5)
        np.testing.assert_allclose(b.series, a.series * math.exp(-c), rtol=1e-14)
        assert a.verdict == b.verdict
        if a.Q0 != 0.0:
            assert b.drift_rel == pytest.approx(a.drift_rel, rel=1e-12)


def test_zero_charge_is_conserved():
    spec = catalog.spherical_pendulum(gamma=0.1)
    traj = integrate(spec, MechState(0.0, [1.0, 0.0], [0.3, 0.0]), 1.0, 1e-2)
    rep = drift_report(spec, traj, coordinate_translation(1, 2), 1e-9)
    assert rep.Q0 == 0.0 and rep.drift_abs == 0.0 and rep.conserved


def test_report_consistency_and_export(tmp_path):
    t = np.array([0.0, 1.0, 2.0])
    rep = NoetherReport("g", t, np.array([2.0, 2.1, 1.8]), 0.05)
    assert rep.drift_abs == pytest.approx(0.2)
    assert rep.drift_rel == pytest.approx(0.1)
    assert rep.verdict == "not conserved"
    path = tmp_path / "r.json"
    rep.to_json(path)
    data = json.loads(path.read_text())
    assert set(data) == {"generator_name", "Q0", "drift_abs", "drift_rel", "verdict", "series"}
    assert data["series"][1] == [1.0, 2.1]


def test_empty_trajectory_rejected():
    spec = catalog.damped_oscillator()
    from herglotz.mechanics import Trajectory

    empty = Trajectory(np.array([]), np.zeros((0, 1)), np.zeros((0, 1)), np.array([]), 0.1)
    with pytest.raises(ValueError):
        drift_report(spec, empty, time_translation(1), 1e-6)


def test_time_dependent_generator_from_expression():
    from herglotz.expr import generator_from_expression

    # eta = t gives the bracket p * t; without a boundary term it is not conserved
    spec = catalog.free_particle_dissipative(m=2.0, gamma=0.0)
    gen = SymmetryGenerator(generator_from_expression("0", 1), lambda t, q: [t], "boost")
    traj = integrate(spec, MechState(0.0, [0.5], [1.2]), 3.0, 1e-2)
    rep = drift_report(spec, traj, gen, 1e-9)
    np.testing.assert_allclose(rep.series, 2.0 * 1.2 * traj.t, rtol=1e-12)
    assert not rep.conserved
