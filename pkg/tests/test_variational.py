import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aniso_levels.grid import CartesianGrid
from aniso_levels.harmonics import COMPLEX_FROM_REAL
from aniso_levels.potential import PotentialField
from aniso_levels.radial import RadialGrid, isotropic_spectrum
from aniso_levels.variational import (
    build_coupling_matrix, comparison_assumption, ground_on_grid, hylleraas_undheim_bounds,
    matrix_element, p_basis, shell_coupling_matrix, verify_excited_inequality,
    verify_ground_inequality,
)
from conftest import gaussian, harmonic


def oscillator_M(omega):
    wbar = math.sqrt(sum(w * w for w in omega) / len(omega))
    return np.diag([(w * w - wbar * wbar) / (2 * wbar) for w in omega])


@pytest.fixture(scope="module")
def ho_setup(ho112_field):
    iso = isotropic_spectrum(ho112_field, RadialGrid(12.0, 2000))
    grid = CartesianGrid(3, 8.0, 64)
    dv = ho112_field.delta(grid.points()).reshape(grid.shape)
    return iso, grid, dv


def test_spec_example_matrix(ho_setup, ho112_field):
    iso, grid, dv = ho_setup
    shell = shell_coupling_matrix(ho112_field, iso.p_candidate)
    np.testing.assert_allclose(shell.M, oscillator_M((1, 1, 2)), atol=1e-5)
    cart = build_coupling_matrix(p_basis(iso.p_candidate, grid), dv)
    np.testing.assert_allclose(cart.M, oscillator_M((1, 1, 2)), atol=1e-5)
    # the lowest eigenvalue is doubly degenerate: a* lies in the xy plane
    np.testing.assert_allclose(shell.eigenvalues, [-1 / (2 * math.sqrt(2))] * 2 + [1 / math.sqrt(2)],
                               atol=1e-5)
    assert abs(shell.a_star[2]) < 1e-8
    assert shell.quadratic_form(shell.a_star) == pytest.approx(shell.eigenvalues[0])


@pytest.mark.parametrize("omega", [(0.8, 1.1, 1.5), (1.0, 2.0, 1.0)])
def test_oscillator_matrix_general(omega):
    field = PotentialField(harmonic(omega), table_r_max=20, table_points=4001)
    iso = isotropic_spectrum(field, RadialGrid(12.0, 1500))
    M = shell_coupling_matrix(field, iso.p_candidate)
    np.testing.assert_allclose(M.M, oscillator_M(omega), atol=2e-5)
    assert abs(M.trace_residual) <= 1e-12 * M.norm


def test_ground_element_vanishes(ho_setup):
    iso, grid, dv = ho_setup
    u0 = ground_on_grid(iso.ground, grid)
    assert abs(matrix_element(u0, dv, u0, grid.cell_volume)) <= 1e-6 * 3.5
    assert np.sum(u0**2) * grid.cell_volume == pytest.approx(1.0)


def test_p_basis_orthonormal(ho_setup):
    iso, grid, _ = ho_setup
    pb = p_basis(iso.p_candidate, grid)
    assert pb.orthonormality_error() <= 1e-6
    assert pb.orthogonality_to(ground_on_grid(iso.ground, grid)) <= 1e-6


def test_complex_basis_same_spectrum(ho_setup, ho112_field):
    iso, _, _ = ho_setup
    M = shell_coupling_matrix(ho112_field, iso.p_candidate)
    C = M.complex_basis()
    np.testing.assert_allclose(C, C.conj().T, atol=1e-14)
    np.testing.assert_allclose(np.linalg.eigvalsh(C), M.eigenvalues, atol=1e-12)
    np.testing.assert_allclose(COMPLEX_FROM_REAL @ COMPLEX_FROM_REAL.conj().T, np.eye(3), atol=1e-15)


@given(st.floats(-14.0, -6.0), st.lists(st.floats(0.6, 1.2), min_size=3, max_size=3),
       st.lists(st.floats(-0.6, 0.6), min_size=3, max_size=3))
def test_trace_zero_and_negative_eigenvalue(depth, width, center):
    field = PotentialField(gaussian([{"depth": depth, "width": width, "center": center},
                                     {"depth": depth / 2, "width": 0.9, "center": [-c for c in center]}]),
                           table_r_max=12, table_points=1201)
    iso = isotropic_spectrum(field, RadialGrid(10.0, 400), n_channels=2, n_states=2)
    if iso.p_candidate is None:
        return
    M = shell_coupling_matrix(field, iso.p_candidate)
    scale = abs(iso.ground.energy)
    floor = 1e-12 * scale
    assert abs(M.trace_residual) <= max(1e-8 * M.norm, floor)
    assert M.eigenvalues[0] <= max(1e-12 * M.norm, floor)


def test_isotropic_matrix_zero(ho_iso_field):
    iso = isotropic_spectrum(ho_iso_field, RadialGrid(12.0, 1000))
    assert np.abs(shell_coupling_matrix(ho_iso_field, iso.p_candidate).M).max() <= 1e-12


@given(st.floats(-10, 10), st.floats(0, 10), st.floats(-3, 3), st.floats(-3, 3))
def test_hu_eigenvalues_bracket_diagonal(e0, gap, cross, shift):
    hu = hylleraas_undheim_bounds(e0, e0 + gap, cross, shift)
    diag = np.sort(np.diag(hu.matrix))
    assert hu.eigenvalues[0] <= diag[0] + 1e-12
    assert hu.eigenvalues[1] >= diag[1] - 1e-12
    assert hu.eigenvalues.sum() == pytest.approx(diag.sum(), abs=1e-9)
    if cross == 0:
        np.testing.assert_array_equal(hu.eigenvalues, diag)


def test_hu_requires_order():
    with pytest.raises(ValueError):
        hylleraas_undheim_bounds(1.0, 0.5, 0.0, 0.0)


def test_ground_verdicts():
    assert verify_ground_inequality(-1.0, 1e-3, -1.2, 1e-3).status == "holds"
    v = verify_ground_inequality(-1.0, 1e-3, -0.9, 1e-3)
    assert v.status == "violated" and v.bug
    assert verify_ground_inequality(-1.0, 1e-3, -1.2, 1e-3, reliable=False).status == "inconclusive"
    # within the error bars counts as holding
    assert verify_ground_inequality(-1.0, 0.05, -0.98, 0.0).status == "holds"


def test_excited_verdicts():
    args = dict(n_bound_iso=3, n_bound_full=3, e1_bar=-1.0, e1_bar_error=1e-3, e1=-1.2, e1_error=1e-3,
                cross_max=1.0, threshold=1e-6)
    assert verify_excited_inequality("p_state", symmetry_guaranteed=True, **args).status == "holds"
    assert verify_excited_inequality("p_state", symmetry_guaranteed=False, **args).status == "not_applicable"
    # the s branch needs no symmetry
    assert verify_excited_inequality("s_state", symmetry_guaranteed=False, **args).status == "holds"
    assert verify_excited_inequality("higher_channel", symmetry_guaranteed=True, **args).status == "not_applicable"
    rescued = {**args, "cross_max": 1e-9}
    assert verify_excited_inequality("p_state", symmetry_guaranteed=False, **rescued).status == "holds"
    few = {**args, "n_bound_full": 1}
    assert verify_excited_inequality("p_state", symmetry_guaranteed=True, **few).status == "not_applicable"
    bad = {**args, "e1": -0.5}
    v = verify_excited_inequality("m1_state", symmetry_guaranteed=True, **bad)
    assert v.status == "violated" and v.bug
    assert verify_excited_inequality("odd", symmetry_guaranteed=True, **args).status == "not_applicable"
    assert verify_excited_inequality("p_state", symmetry_guaranteed=True, reliable=False,
                                     **args).status == "inconclusive"


def test_comparison_assumption_one_sided():
    u0 = np.ones(4) / 2.0
    ok = comparison_assumption(u0, np.array([0.0, 0, 0, 0]), np.array([1.0, 1, 1, 1]), 1.0)
    assert ok.satisfied and ok.expectation == pytest.approx(-1.0)
    no = comparison_assumption(u0, np.array([2.0, 2, 2, 2]), np.zeros(4), 1.0)
    assert not no.satisfied and "no conclusion" in no.conclusion


def test_matrix_element_shapes():
    with pytest.raises(ValueError):
        matrix_element(np.ones(3), np.ones(3), np.ones(4), 1.0)
    assert matrix_element(np.ones(3), 2 * np.ones(3), np.ones(3), 0.5) == pytest.approx(3.0)
