import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_unitary
from hilbert_sim.errors import ConstitutiveError, InputShapeError, ModeError
from hilbert_sim.kinematics import MaterialGrid
from hilbert_sim.qubit import (
    PRESETS,
    SIGMA_X,
    ConstitutivePreset,
    FibreField,
    accumulated_angle,
    build_hamiltonian,
    commuting_exact_step,
    fibre_step,
    hamiltonian_matrix,
    mul2,
    pauli_exponential,
    sigma_x_rotation,
    unitarity_defect,
)

coef = st.floats(-3.0, 3.0, allow_nan=False)


def taylor_expm(A, terms=30):
    out = np.eye(A.shape[0], dtype=complex)
    term = np.eye(A.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


@given(coef, coef, coef, coef, st.floats(1e-4, 0.5))
def test_closed_form_matches_taylor_series(a0, ax, ay, az, dt):
    H = hamiltonian_matrix(a0, ax, ay, az)
    np.testing.assert_allclose(pauli_exponential(a0, ax, ay, az, dt), taylor_expm(-1j * dt * H), atol=1e-13)


@given(coef, coef, coef, coef, st.floats(0.0, 100.0))
def test_closed_form_is_unitary(a0, ax, ay, az, dt):
    assert unitarity_defect(pauli_exponential(a0, ax, ay, az, dt)) < 1e-13


def test_zero_vector_part_is_pure_phase():
    U = pauli_exponential(0.3, 0.0, 0.0, 0.0, 2.0)
    np.testing.assert_allclose(U, np.exp(-0.6j) * np.eye(2), atol=1e-15)


def test_composition_in_time():
    c = (0.2, 1.1, -0.4, 0.7)
    np.testing.assert_allclose(
        mul2(pauli_exponential(*c, 0.3), pauli_exponential(*c, 0.45)), pauli_exponential(*c, 0.75), atol=1e-14
    )


def test_sigma_x_angle_round_trip():
    ang = np.linspace(-3.0, 3.0, 13)
    np.testing.assert_allclose(accumulated_angle(sigma_x_rotation(ang)), ang, atol=1e-14)


def test_presets_have_documented_values():
    p = ConstitutivePreset("paper-example", mu=2.0, coupling_length=0.5)
    g0, gx, gy, gz = p.coefficients(1.0, -4.0)
    assert (float(g0), float(gx), float(gy), float(gz)) == (0.0, 6.0, 0.0, 0.0)
    assert ConstitutivePreset("flat", 2.0, 0.5).coefficients(1.3, 9.0)[1] == 2.0
    g0, gx, _, gz = ConstitutivePreset("stretch-coupled", 1.0, 1.0, gain=2.0).coefficients(1.5, 0.0)
    assert (float(g0), float(gz)) == (1.0, 1.0)
    assert set(PRESETS) == {"paper-example", "flat", "curvature-phase", "stretch-coupled"}


def test_preset_guards():
    with pytest.raises(ConstitutiveError):
        ConstitutivePreset("nope", 1.0, 1.0)
    p = ConstitutivePreset("paper-example", 1.0, 1.0)
    with pytest.raises(ConstitutiveError):
        build_hamiltonian(p, np.array([1.0, 0.0]), np.zeros(2))
    with pytest.raises(ConstitutiveError):
        build_hamiltonian(p, np.ones(2), np.array([np.nan, 0.0]))


def test_flat_preset_gives_rabi_oscillation():
    g = MaterialGrid(5, 1.0)
    p = ConstitutivePreset("flat", mu=1.3, coupling_length=1.0)
    f = FibreField.initial(g, "up")
    dt = 0.05
    for k in range(1, 41):
        f = fibre_step(f, np.ones(5), np.zeros(5), p, dt)
        np.testing.assert_allclose(f.p_up, np.sin(1.3 * k * dt) ** 2, atol=1e-13)
    np.testing.assert_allclose(f.fidelity, 1 - f.p_up, atol=1e-13)


def _drive(t):
    # smooth non-commuting history; kappa keeps its sign so |kappa| has no kink
    return 1.0 + 0.1 * np.sin(t) * np.linspace(0.5, 1.5, 5), (1.5 + np.cos(2 * t)) * np.linspace(0.5, 2, 5)


def _evolve(dt, T=1.0):
    g = MaterialGrid(5, 1.0)
    p = ConstitutivePreset("stretch-coupled", mu=1.5, coupling_length=0.4, gain=3.0)
    f = FibreField.initial(g, "plus-i")
    n = int(round(T / dt))
    for k in range(n):
        c0, k0 = _drive(k * dt)
        c1, k1 = _drive((k + 1) * dt)
        f = fibre_step(f, 0.5 * (c0 + c1), 0.5 * (k0 + k1), p, dt)
    return f.U


def test_second_order_in_time_for_noncommuting_hamiltonian():
    ref = _evolve(1 / 1280)
    errs = [np.max(np.abs(_evolve(dt) - ref)) for dt in (1 / 20, 1 / 40, 1 / 80)]
    for a, b in zip(errs, errs[1:]):
        assert 3.5 < a / b < 4.5


def test_left_invariance_of_propagator_update():
    rng = np.random.default_rng(4)
    g = MaterialGrid(7, 1.0)
    p = ConstitutivePreset("curvature-phase", 1.0, 0.3)
    c, k = rng.uniform(0.9, 1.1, 7), rng.normal(size=7)
    f = FibreField.initial(g, "up")
    V = fibre_step(f, c, k, p, 0.1).U
    U0 = np.stack([random_unitary(rng) for _ in range(7)])
    moved = fibre_step(f.with_state(f.psi, U0), c, k, p, 0.1).U
    np.testing.assert_allclose(moved, V @ U0, atol=1e-14)


def test_partition_invariance_is_bitwise():
    rng = np.random.default_rng(5)
    g = MaterialGrid(101, 1.0)
    p = ConstitutivePreset("stretch-coupled", 1.0, 0.5)
    c, k = rng.uniform(0.9, 1.1, 101), rng.normal(size=101)
    f = FibreField.initial(g, "plus")
    one = fibre_step(f, c, k, p, 0.01, workers=1)
    many = fibre_step(f, c, k, p, 0.01, workers=4)
    assert one.U.tobytes() == many.U.tobytes()
    assert one.psi.tobytes() == many.psi.tobytes()


def test_state_tracks_propagator():
    g = MaterialGrid(5, 1.0)
    p = ConstitutivePreset("stretch-coupled", 1.0, 1.0)
    f = FibreField.initial(g, "minus-i")
    for _ in range(50):
        f = fibre_step(f, np.full(5, 1.05), np.linspace(-1, 1, 5), p, 0.1)
    assert np.max(f.consistency_defect()) < 1e-13
    assert np.max(f.norm_drift()) < 1e-13


def test_commuting_exact_mode():
    g = MaterialGrid(5, 1.0)
    p = ConstitutivePreset("paper-example", 1.0, 1.0)
    f = FibreField.initial(g, "up")
    hist = np.tile(np.linspace(1.0, 2.0, 5), (3, 1))
    out, ang = commuting_exact_step(f, hist, 0.5, p)
    np.testing.assert_allclose(ang, np.linspace(1.0, 2.0, 5))
    np.testing.assert_allclose(out.U[2], pauli_exponential(0, 1.5, 0, 0, 1.0), atol=1e-15)
    with pytest.raises(ModeError):
        commuting_exact_step(f, hist, 0.5, ConstitutivePreset("stretch-coupled", 1.0, 1.0))
    with pytest.raises(InputShapeError):
        commuting_exact_step(f, hist[:, :3], 0.5)


def test_initial_states_are_normalised():
    g = MaterialGrid(5, 1.0)
    for name in ("up", "down", "plus", "minus", "plus-i", "minus-i"):
        f = FibreField.initial(g, name)
        assert np.max(f.norm_drift()) < 1e-15
    f = FibreField.initial(g, (3.0, 4.0j))
    assert f.p_up[0] == pytest.approx(16 / 25)


def test_sigma_x_hamiltonian_matrix():
    np.testing.assert_array_equal(hamiltonian_matrix(0, 1, 0, 0), SIGMA_X)
    assert math.isclose(float(np.trace(hamiltonian_matrix(0.5, 1, 2, 3)).real), 1.0)
