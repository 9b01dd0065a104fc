import numpy as np
import pytest
from hypothesis import given, strategies as st

from aniso_levels.grid import CartesianGrid
from aniso_levels.potential import PotentialField
from aniso_levels.radial import RadialGrid, isotropic_spectrum
from aniso_levels.symmetry import (
    INVARIANCE_TOL, PointGroupTag, cross_element_check, generators, group_elements, parse_group,
    selection_rule, verify_invariance,
)
from aniso_levels.variational import ground_on_grid, p_basis
from conftest import gaussian, harmonic

CUBIC = ["T", "Td", "Th", "O", "Oh", "I", "Ih"]


def all_finite_tags():
    tags = [PointGroupTag(k) for k in CUBIC]
    for n in range(1, 7):
        tags += [PointGroupTag(k, n) for k in ("C", "Cv", "Ch", "D", "Dh", "Dd", "C2d", "D2d")]
        tags.append(PointGroupTag("S", 2 * n))
    return tags


def invariant_vector_free(tag):
    # Reynolds projector onto invariant vectors is the group average
    els = group_elements(tag)
    return np.allclose(sum(els) / len(els), 0.0, atol=1e-12)


# -- table pinned verdict by verdict

@pytest.mark.parametrize("name", CUBIC)
def test_cubic_groups_true(name):
    assert selection_rule(name, 3).guaranteed_zero


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("family", ["C{}h", "D{}", "D{}h", "D{}d"])
def test_axial_families_true(family, n):
    assert selection_rule(family.format(n), 3).guaranteed_zero


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_improper_rotation_groups_true(n):
    assert selection_rule(f"S{2 * n}", 3).guaranteed_zero


@pytest.mark.parametrize("name,expected", [
    ("Cs", False), ("C1h", False), ("D1h", False), ("C2v", False), ("S2", True), ("Ci", True),
    ("D1d", True), ("C1", False), ("C4", False), ("C3v", False), ("Dinfh", True), ("D∞h", True),
    ("Cinfv", False), ("D1", False),
])
def test_named_cases(name, expected):
    assert selection_rule(name, 3).guaranteed_zero is expected


@pytest.mark.parametrize("n,expected", [(1, False), (2, True), (3, True), (6, True)])
def test_planar_groups(n, expected):
    assert selection_rule(f"C{n}(2d)", 2).guaranteed_zero is expected
    assert selection_rule(f"D_{n}^(2d)", 2).guaranteed_zero is expected


def test_dimension_mismatch_and_unknown():
    with pytest.raises(ValueError):
        selection_rule("C2(2d)", 3)
    with pytest.raises(ValueError):
        selection_rule("Oh", 2)
    for bad in ["X4", "S3", "C0", "Q", "C2d"]:
        with pytest.raises(ValueError):
            parse_group(bad)


@pytest.mark.parametrize("tag", all_finite_tags(), ids=str)
def test_table_matches_group_theory_oracle(tag):
    assert selection_rule(tag, tag.dimension).guaranteed_zero is invariant_vector_free(tag)


@pytest.mark.parametrize("name,order", [("T", 12), ("Td", 24), ("Th", 24), ("O", 24), ("Oh", 48),
                                        ("I", 60), ("Ih", 120), ("D4h", 16), ("D3d", 12), ("S4", 4),
                                        ("C3v", 6), ("D5(2d)", 10)])
def test_group_orders(name, order):
    els = group_elements(name)
    assert len(els) == order
    for g in els:
        np.testing.assert_allclose(g @ g.T, np.eye(g.shape[0]), atol=1e-12)


def test_continuous_groups_oracle():
    for name, expected in [("Cinfv", False), ("Dinfh", True)]:
        gens = generators(name)
        # an invariant vector must be fixed by every generator
        stacked = np.vstack([g - np.eye(3) for g in gens])
        has_fixed = np.linalg.svd(stacked, compute_uv=False)[-1] < 1e-12
        assert selection_rule(name, 3).guaranteed_zero is (not has_fixed) is expected


@given(st.sampled_from(all_finite_tags() + [PointGroupTag("Cinfv"), PointGroupTag("Dinfh")]))
def test_parse_serialise_roundtrip(tag):
    assert parse_group(str(tag)) == tag
    assert str(parse_group(str(tag))) == str(tag)


# -- numerical invariance

def test_declared_symmetry_of_oscillator():
    field = PotentialField(harmonic((1, 1, 2)), table_r_max=5, table_points=101)
    assert verify_invariance(field, "Dinfh") <= 1e-12
    assert verify_invariance(field, "D4h") <= 1e-12
    assert verify_invariance(field, "Oh") > 1e-3


def test_axis_option():
    field = PotentialField(harmonic((2, 1, 1)), table_r_max=5, table_points=101)
    assert verify_invariance(field, "D4h") > 1e-3
    assert verify_invariance(field, "D4h", axis=(1, 0, 0)) <= 1e-12


def test_off_centre_gaussian_rejects_inversion():
    field = PotentialField(gaussian([{"depth": -5.0, "width": 1.0, "center": [0.5, 0.0, 0.0]}]),
                           table_r_max=5, table_points=101)
    assert verify_invariance(field, "S2") > INVARIANCE_TOL


def test_dimension_checked():
    field = PotentialField(harmonic((1, 2)), table_r_max=5, table_points=101)
    with pytest.raises(ValueError):
        verify_invariance(field, "Oh")
    assert verify_invariance(field, "D2(2d)") <= 1e-12


# -- cross elements on the shared grid

def _cross(spec, L=6.0, n=40):
    field = PotentialField(spec, table_r_max=12, table_points=2401)
    iso = isotropic_spectrum(field, RadialGrid(10.0, 800))
    grid = CartesianGrid(3, L, n)
    u0 = ground_on_grid(iso.ground, grid)
    pb = p_basis(iso.p_candidate, grid)
    dv = field.delta(grid.points()).reshape(grid.shape)
    return cross_element_check(u0, pb, dv, grid.cell_volume), iso


def test_cross_elements_vanish_with_inversion():
    w = {"depth": -8.0, "width": [1.0, 0.7, 0.9], "center": [0.5, 0.3, -0.2]}
    pair = [w, {**w, "center": [-0.5, -0.3, 0.2]}]
    value, iso = _cross(gaussian(pair))
    assert value <= 1e-6 * abs(iso.ground.energy)


def test_cross_elements_zero_for_isotropic():
    value, _ = _cross(harmonic((1, 1, 1)))
    assert value <= 1e-12


def test_cross_elements_nonzero_for_displaced_tilted_well():
    rot = np.linalg.qr(np.random.default_rng(3).standard_normal((3, 3)))[0]
    rot *= np.sign(np.linalg.det(rot))
    w = {"depth": -8.0, "width": [1.2, 0.7, 0.9], "center": [0.6, -0.2, 0.3], "rotation": rot.tolist()}
    value, iso = _cross(gaussian([w]))
    assert value > 1e-6 * (abs(iso.ground.energy) + abs(iso.excited.energy))
