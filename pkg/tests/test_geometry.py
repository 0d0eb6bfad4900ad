import numpy as np
import pytest
from numpy.testing import assert_allclose

from ndtns.elements.quadrature import triangle_rule
from ndtns.geometry import (
    DegenerateGeometryError,
    InvalidMeshInput,
    build_cook_mesh,
    build_quarter_annulus,
    build_unit_square,
    element_geometry,
    facet_frame,
    facet_geometry,
    make_triangulation,
    mesh_from_json,
    mesh_to_json,
    uniform_refine,
)


def mesh_area(mesh, degree=6):
    rule = triangle_rule(degree)
    _, _, det = element_geometry(mesh, rule.points)
    return float((det * rule.weights).sum())


def test_unit_square_topology(square2):
    assert square2.n_elements == 8
    assert square2.n_vertices == 9
    # Euler: V - E + F = 1 for a disk
    assert square2.n_vertices - square2.n_facets + square2.n_elements == 1
    assert len(square2.boundary_facets) == 8
    assert_allclose(mesh_area(square2), 1.0, rtol=1e-14)


def test_every_interior_facet_has_opposite_signs(square2):
    for f in square2.interior_facets:
        t0, t1 = square2.facet_elements[f]
        s0 = square2.element_signs[t0][square2.element_facets[t0] == f]
        s1 = square2.element_signs[t1][square2.element_facets[t1] == f]
        assert s0 * s1 == -1


def test_cook_area_and_point_a():
    mesh = build_cook_mesh(4)
    # trapezoid with parallel sides 44 and 16 at distance 48
    assert_allclose(mesh_area(mesh), 0.5 * (44 + 16) * 48, rtol=1e-13)
    assert_allclose(mesh.vertices[mesh.points["A"]], [48.0, 60.0])
    scaled = build_cook_mesh(4, scale=0.01)
    assert_allclose(scaled.vertices[scaled.points["A"]], [0.48, 0.60])


@pytest.mark.parametrize("diagonal", ["up", "down"])
def test_cook_diagonals_cover_same_area(diagonal):
    mesh = build_cook_mesh(3, diagonal=diagonal)
    assert mesh.n_elements == 18
    assert_allclose(mesh_area(mesh), 1440.0, rtol=1e-13)


def test_invalid_inputs():
    with pytest.raises(InvalidMeshInput):
        build_cook_mesh(0)
    with pytest.raises(InvalidMeshInput):
        build_cook_mesh(2, diagonal="sideways")
    with pytest.raises(InvalidMeshInput):
        build_quarter_annulus(r_in=1.0, r_out=0.5)
    with pytest.raises(DegenerateGeometryError):
        make_triangulation([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]])
    with pytest.raises(InvalidMeshInput):
        make_triangulation([[0, 0], [1, 0], [0, 1]], [[0, 1, 5]])


def test_quarter_annulus_area_converges_with_curved_edges():
    exact = np.pi * (1.0 - 0.25) / 4.0
    errs = [abs(mesh_area(build_quarter_annulus(level=l), 8) - exact) for l in range(3)]
    # quadratic geometry: area error decays at least like h^4
    assert errs[1] < errs[0] / 10 and errs[2] < errs[1] / 10
    assert errs[0] < 1e-4


def test_quarter_annulus_markers(annulus0):
    for name in ("inner", "outer", "sym_x", "sym_y"):
        assert len(annulus0.boundary_markers[name]) > 0
    for f in annulus0.boundary_markers["sym_x"]:
        assert_allclose(annulus0.vertices[annulus0.facets[f]][:, 1], 0.0)


def test_refined_curved_vertices_lie_on_circles():
    mesh = build_quarter_annulus(level=2)
    for name, radius in (("inner", 0.5), ("outer", 1.0)):
        ids = mesh.facets[mesh.boundary_markers[name]].ravel()
        assert_allclose(np.linalg.norm(mesh.vertices[ids], axis=1), radius, atol=1e-14)
        for f in mesh.boundary_markers[name]:
            X, _ = facet_geometry(mesh, f, np.linspace(0, 1, 7))
            # quadratic interpolation of a circle: tiny radial deviation
            assert np.abs(np.linalg.norm(X, axis=1) - radius).max() < 1e-4


def test_uniform_refine_quadruples(square2):
    fine = uniform_refine(square2)
    assert fine.n_elements == 4 * square2.n_elements
    assert_allclose(mesh_area(fine), 1.0, rtol=1e-14)
    assert len(fine.boundary_markers["left"]) == 2 * len(square2.boundary_markers["left"])


def test_facet_frame_orthonormal(square2):
    for f in range(square2.n_facets):
        n, t, signs = facet_frame(square2, f)
        assert_allclose([n @ n, t @ t, n @ t], [1.0, 1.0, 0.0], atol=1e-14)
        assert len(signs) == (2 if square2.facet_elements[f, 1] >= 0 else 1)


def test_boundary_normals_point_outward(square2):
    centre = np.array([0.5, 0.5])
    for f in square2.boundary_facets:
        X, tang = facet_geometry(square2, f, np.array([0.5]))
        nu = np.array([tang[0, 1], -tang[0, 0]])
        assert nu @ (X[0] - centre) > 0


def test_json_round_trip(annulus0):
    back = mesh_from_json(mesh_to_json(annulus0))
    assert_allclose(back.vertices, annulus0.vertices)
    assert np.array_equal(back.triangles, annulus0.triangles)
    assert set(back.curved_edges) == set(annulus0.curved_edges)
    assert_allclose(mesh_area(back, 8), mesh_area(annulus0, 8), rtol=1e-14)
