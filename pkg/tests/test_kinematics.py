import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hilbert_sim.errors import DegenerateDeformationError, InputShapeError
from hilbert_sim.kinematics import (
    CauchyGreenRecord,
    MaterialGrid,
    Placement,
    cauchy_green,
    compute_curvature,
    compute_deformation_gradient,
    jet_record,
    macro_scalars,
    nodal_derivative,
)


@pytest.mark.parametrize("n", [4, 3, 100, 0, -5])
def test_grid_rejects_even_or_small(n):
    with pytest.raises(InputShapeError):
        MaterialGrid(n, 1.0)


@given(st.integers(2, 500).map(lambda k: 2 * k + 1), st.floats(1e-3, 1e3))
def test_grid_last_node_hits_length(n, ell):
    g = MaterialGrid(n, ell)
    assert g.s[-1] == pytest.approx(ell, rel=2.3e-16, abs=0)
    assert g.weights.sum() == pytest.approx(ell, rel=1e-13)
    assert g.s[g.mid] == pytest.approx(ell / 2, rel=1e-15)


def test_circular_arc_has_constant_curvature():
    g = MaterialGrid(41, 2.0)
    k = 0.7
    c = compute_curvature(k * g.s, g)
    np.testing.assert_allclose(c.kappa, k, rtol=1e-13)
    np.testing.assert_allclose(c.radius, 1 / k, rtol=1e-13)


def test_nodal_derivative_is_exact_on_quadratics():
    g = MaterialGrid(11, 1.0)
    f = 3.0 * g.s**2 - g.s + 2.0
    np.testing.assert_allclose(nodal_derivative(f, g.spacing), 6.0 * g.s - 1.0, atol=1e-12)


def test_nodal_derivative_second_order():
    errs = []
    for n in (21, 41, 81):
        g = MaterialGrid(n, 1.0)
        errs.append(np.max(np.abs(nodal_derivative(np.sin(3 * g.s), g.spacing) - 3 * np.cos(3 * g.s))))
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert 3.5 < errs[1] / errs[2] < 4.5


def test_nodal_derivative_handles_matrix_stacks():
    g = MaterialGrid(9, 1.0)
    f = np.einsum("i,jk->ijk", g.s**2, np.arange(4.0).reshape(2, 2))
    d = nodal_derivative(f, g.spacing)
    assert d.shape == f.shape
    np.testing.assert_allclose(d[:, 1, 1], 2 * g.s * 3.0, atol=1e-12)


def test_placement_reconstructs_straight_stretched_rod():
    g = MaterialGrid(21, 1.0)
    p = Placement.flat(g, eps=-0.05)
    assert p.end_distance == pytest.approx(0.95, rel=1e-14)
    assert np.all(p.z == 0)


def test_placement_rejects_collapsed_stretch():
    g = MaterialGrid(5, 1.0)
    with pytest.raises(DegenerateDeformationError):
        Placement.from_angles(g, np.zeros(5), np.array([0, 0, -1.0, 0, 0]))


def test_deformation_gradient_and_cauchy_green():
    g = MaterialGrid(7, 1.0)
    rng = np.random.default_rng(0)
    th = rng.uniform(-1, 1, 7)
    eps = rng.uniform(-0.2, 0.2, 7)
    F = compute_deformation_gradient(Placement.from_angles(g, th, eps))
    M = F.matrix()
    tangent = M[:, :, 0]
    np.testing.assert_allclose(np.linalg.norm(tangent, axis=1), 1 + eps, rtol=1e-14)
    np.testing.assert_allclose(np.linalg.det(M), F.det(), rtol=1e-13)
    C = cauchy_green(F)
    np.testing.assert_allclose(C.c, np.einsum("nij,nij->n", tangent[:, :, None], tangent[:, :, None]), rtol=1e-14)


def test_undeformed_invariants():
    rec = CauchyGreenRecord(np.ones(3))
    np.testing.assert_array_equal(rec.i1, 3.0)
    np.testing.assert_array_equal(rec.i2, 3.0)
    np.testing.assert_array_equal(rec.i3, 1.0)


def test_macro_scalars_on_flat_rod():
    g = MaterialGrid(11, 1.0)
    c, kappa = macro_scalars(Placement.flat(g, eps=0.1))
    np.testing.assert_allclose(c, 1.21)
    np.testing.assert_array_equal(kappa, 0.0)


def test_jet_record_shapes_and_grid_check():
    g = MaterialGrid(9, 1.0)
    p = Placement.flat(g)
    U = np.tile(np.eye(2, dtype=complex), (9, 1, 1))
    jet = jet_record(p, U)
    assert jet.position.shape == (9, 2)
    assert jet.dU.shape == (9, 2, 2)
    np.testing.assert_array_equal(jet.dU, 0)
    with pytest.raises(InputShapeError):
        jet_record(p, U[:7])
