import numpy as np
import pytest

from critmeasure import CellFn, Mesh1D, project_dg0, refine_nested, uniform
from critmeasure.mesh import common_refinement, fine_to_coarse, is_nested


def test_uniform_single_cell():
    m = uniform(1)
    assert m.n_cells == 1
    np.testing.assert_allclose(m.edges, [0.0, 1.0])
    assert m.h == 1.0


def test_uniform_four_cells():
    m = uniform(4)
    np.testing.assert_allclose(m.edges, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert m.h == 0.25
    assert m.quasi_uniformity == pytest.approx(1.0)


def test_uniform_finest_plotted_width():
    assert uniform(4096).h == pytest.approx(1.0 / 4096, rel=1e-15)


def test_uniform_rejects_zero():
    with pytest.raises(ValueError):
        uniform(0)


def test_uniform_cell_widths_equal():
    m = uniform(7)
    np.testing.assert_allclose(m.widths, 1.0 / 7, rtol=1e-15)


def test_refine_bisection_matches_uniform():
    np.testing.assert_array_equal(refine_nested(uniform(2), 2).edges, uniform(4).edges)


def test_refine_identity():
    m = refine_nested(uniform(3), 1)
    np.testing.assert_array_equal(m.edges, uniform(3).edges)


def test_refine_two_by_three():
    m = refine_nested(uniform(2), 3)
    np.testing.assert_allclose(m.edges, np.arange(7) / 6, atol=1e-16)


def test_refine_rejects_zero_factor():
    with pytest.raises(ValueError):
        refine_nested(uniform(2), 0)


def test_refine_decreases_h():
    m = uniform(5)
    for factor in (2, 3, 8):
        assert refine_nested(m, factor).h < m.h


def test_refine_preserves_coarse_edges_bitwise():
    m = Mesh1D([0.0, 0.3, 0.55, 1.0])
    f = refine_nested(m, 4)
    for e in m.edges:
        assert e in f.edges


def test_edges_validation():
    with pytest.raises(ValueError):
        Mesh1D([0.0, 0.5, 0.5, 1.0])
    with pytest.raises(ValueError):
        Mesh1D([0.0, 0.7, 0.2, 1.0])
    with pytest.raises(ValueError):
        Mesh1D([0.1, 0.5, 1.0])
    with pytest.raises(ValueError):
        Mesh1D([0.0, 0.5, 0.9])


def test_nesting_detection_and_map():
    coarse = uniform(3)
    fine = refine_nested(coarse, 4)
    assert is_nested(coarse, fine)
    assert not is_nested(fine, coarse)
    assert not is_nested(uniform(3), uniform(4))
    np.testing.assert_array_equal(fine_to_coarse(coarse, fine), np.repeat([0, 1, 2], 4))


def test_common_refinement_contains_both():
    a, b = uniform(3), uniform(4)
    u = common_refinement(a, b)
    assert is_nested(a, u)
    assert is_nested(b, u)
    assert u.n_cells == 6  # edges at multiples of 1/12 that occur in either


def test_nesting_roundtrip_reproduces_cell_values():
    rng = np.random.default_rng(7)
    for n, factor in ((3, 2), (5, 4), (8, 7)):
        m = uniform(n)
        u = CellFn(m, rng.standard_normal(n))
        fine = refine_nested(m, factor)
        down = project_dg0(project_dg0(u, fine), m)
        np.testing.assert_allclose(down.values, u.values, rtol=1e-14)


def test_cell_of_boundary_points():
    m = uniform(4)
    assert m.cell_of(0.0) == 0
    assert m.cell_of(1.0) == 3
    assert m.cell_of(0.25) == 1
