import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from qtrunc.errors import DimensionMismatch, NonFiniteField, SchemaError
from qtrunc.propagate import (
    ControlField,
    Propagator,
    basis_state,
    final_distance,
    h0_derivative_check,
    leakage_profile,
    load_field,
    propagate,
    propagate_backward,
    save_field,
)
from qtrunc.system import load_system
from qtrunc.verify import random_field


def two_level(delta, b):
    return load_system(
        {
            "name": "two-level",
            "spectrum": {"kind": "table", "energies": [1.0, 1.0 + delta]},
            "coupling": {"kind": "tridiagonal", "super": [b]},
            "certificate": {"k": 1, "C": 100.0, "d": 10.0, "verified_up_to": 2},
        }
    )


def rabi(delta, b, u, t):
    """Closed-form evolution of |0> under [[1, u b], [u b, 1 + delta]]."""
    omega = math.hypot(delta / 2, u * b)
    phase = np.exp(-1j * (1 + delta / 2) * t)
    c0 = phase * (math.cos(omega * t) + 1j * (delta / 2) / omega * math.sin(omega * t))
    c1 = phase * (-1j * u * b / omega * math.sin(omega * t))
    return np.array([c0, c1])


@pytest.mark.parametrize("delta,b,u", [(0.0, 1.0, 0.7), (0.6, 0.5, 1.3), (2.0, 0.8, -0.4)])
def test_two_level_matches_rabi(delta, b, u):
    system = two_level(delta, b)
    field = ControlField.constant(u, 2.5, 250)
    traj = propagate(system, 2, field, basis_state(system, 2, system.first_index))
    for t, psi in zip(traj.times, traj.states):
        np.testing.assert_allclose(psi, rabi(delta, b, u, t), atol=1e-9)


def test_piecewise_field_matches_expm(rotor):
    field = random_field(3, 2.0, 1.0, 40)
    N = 8
    psi = basis_state(rotor, N, 1)
    H0, H1 = rotor.h0(N), rotor.h1(N)
    ref = psi.copy()
    for u in field.samples:
        ref = expm(-1j * field.dt * (H0 + u * H1)) @ ref
    got = propagate(rotor, N, field, psi, record_stride=field.steps).final
    np.testing.assert_allclose(got, ref, atol=1e-12)


def test_free_evolution_is_a_phase(rotor):
    field = ControlField.constant(0.0, 1.7, 17)
    traj = propagate(rotor, 5, field, basis_state(rotor, 5, 3))
    np.testing.assert_allclose(traj.final[2], np.exp(-1j * 9 * 1.7), atol=1e-12)
    assert np.allclose(traj.populations[:, 2], 1)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), K=st.floats(0.1, 6.0), N=st.integers(2, 25))
def test_unitarity(seed, K, N):
    from qtrunc.system import builtin_rotor

    rotor = builtin_rotor()
    traj = propagate(rotor, N, random_field(seed, K, math.pi, 200), basis_state(rotor, N, 1))
    assert np.max(np.abs(traj.norms - 1)) <= 1e-10


def test_time_reversal(oscillator):
    field = random_field(11, 2.0, math.pi, 300)
    psi0 = basis_state(oscillator, 20, 2)
    psiT = propagate(oscillator, 20, field, psi0, record_stride=300).final
    back = propagate_backward(oscillator, 20, field, psiT)
    np.testing.assert_allclose(back, psi0, atol=1e-12)


def test_derivative_residual_converges(rotor):
    N = 12
    psi0 = basis_state(rotor, N, 1)
    residuals = []
    for steps in (100, 200, 400, 800):
        t = (np.arange(steps) + 0.5) * (math.pi / steps)
        field = ControlField(math.pi / steps, 1.2 * np.sin(2 * t))
        residuals.append(h0_derivative_check(propagate(rotor, N, field, psi0), field, rotor))
    assert all(b < a for a, b in zip(residuals, residuals[1:]))
    assert residuals[-1] < residuals[0] / 16  # second order


def test_running_l1_and_energy():
    field = ControlField(0.5, np.array([1.0, -2.0, 0.0, 3.0]))
    np.testing.assert_allclose(field.running_l1(), [0, 0.5, 1.5, 1.5, 3.0])
    assert field.K == 3.0
    assert field.energy() == pytest.approx(0.5 * 14)
    assert field.T == 2.0


def test_field_validation():
    with pytest.raises(NonFiniteField):
        ControlField(0.1, np.array([0.0, np.nan]))
    with pytest.raises(ValueError):
        ControlField(0.0, np.array([1.0]))


def test_dimension_mismatch(rotor):
    with pytest.raises(DimensionMismatch):
        propagate(rotor, 4, ControlField.constant(0.1, 1, 10), np.ones(5) / math.sqrt(5))


def test_leakage_and_distance(rotor):
    field = random_field(0, 2.0, math.pi, 200)
    traj = propagate(rotor, 10, field, basis_state(rotor, 10, 1))
    prof = leakage_profile(traj)
    assert prof.shape == (10,) and prof[0] == pytest.approx(1.0)
    target = basis_state(rotor, 10, 1)
    d, d2 = final_distance(traj, target), final_distance(traj, target, squared=True)
    ov = abs(traj.final[0])
    assert d == pytest.approx(1 - ov) and d2 == pytest.approx(1 - ov**2)


@pytest.mark.parametrize("suffix", [".csv", ".json"])
def test_field_round_trip(tmp_path, suffix):
    field = random_field(5, 3.0, math.pi, 123)
    path = tmp_path / f"field{suffix}"
    save_field(path, field)
    back = load_field(path)
    assert back.steps == field.steps
    assert back.dt == pytest.approx(field.dt, rel=1e-15)
    np.testing.assert_array_equal(back.samples, field.samples)


def test_nonuniform_csv_preserves_l1(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("# comment\nt,u\n0,1.0\n0.25,-2.0\n0.75,0.5\n1.0,\n")
    field = load_field(path)
    assert field.dt == pytest.approx(0.25)
    np.testing.assert_allclose(field.samples, [1.0, -2.0, -2.0, 0.5])
    assert field.K == pytest.approx(0.25 + 1.0 + 0.125)


def test_incommensurate_grid_rejected(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("t,u\n0,1\n0.3,2\n1.0,\n")
    with pytest.raises(SchemaError):
        load_field(path)


def test_propagator_factor_cache(rotor):
    prop = Propagator(rotor, 6)
    a = prop.decompose(0.3)
    assert prop.decompose(0.3) is a
