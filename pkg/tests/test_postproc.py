import math
from types import SimpleNamespace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import make_disc, random_local_state
from ndtns.elements.quadrature import triangle_rule
from ndtns.geometry import build_quarter_annulus, element_geometry
from ndtns.material import MaterialParams, piola_stress
from ndtns.postproc import (
    CSV_HEADER,
    ErrorReport,
    eoc,
    evaluate_fields,
    jacobian_report,
    l2_norm,
    postprocess_displacement,
    vertex_value,
)


def cubic_field(X):
    x, y = X[..., 0], X[..., 1]
    u = np.stack([x**3 - 2 * x * y + 0.3, x * y**2 + y**2 - 0.1 * x], axis=-1)
    grad = np.stack([np.stack([3 * x**2 - 2 * y, -2 * x], -1), np.stack([y**2 - 0.1, 2 * x * y + 2 * y], -1)], -2)
    return u, grad


class AnalyticDisc(SimpleNamespace):
    """Minimal discretization exposing analytic fields for the postprocessor."""

    def evaluate_fields(self, state, rule=None):
        rule = rule or triangle_rule(self.error_degree)
        X, _, det = element_geometry(self.mesh, rule.points)
        u, grad = cubic_field(X)
        return {"X": X, "w": rule.weights[None] * det, "u": u, "F": np.eye(2) + grad}


def test_postprocessing_reproduces_polynomials_of_degree_k_plus_one(square2):
    disc = AnalyticDisc(mesh=square2, k=2, error_degree=8)
    ustar = postprocess_displacement(disc, None)
    rule = triangle_rule(6)
    X, _, _ = element_geometry(square2, rule.points)
    vals = np.stack([ustar.at_reference(e, rule.points) for e in range(square2.n_elements)])
    assert_allclose(vals, cubic_field(X)[0], atol=1e-12)
    v = vertex_value(ustar, square2, 4)
    assert_allclose(v, cubic_field(square2.vertices[4])[0], atol=1e-12)


def test_postprocessed_mean_matches_discrete_displacement(rng, annulus0):
    disc = make_disc(annulus0)
    state = disc.initial_state()
    state.coupling += 0.01 * rng.standard_normal(state.coupling.shape)
    state.internal += 0.01 * rng.standard_normal(state.internal.shape)
    ustar = postprocess_displacement(disc, state)
    rule = triangle_rule(disc.error_degree)
    f = evaluate_fields(disc, state, rule)
    vals = np.stack([ustar.at_reference(e, rule.points) for e in range(annulus0.n_elements)])
    assert_allclose(np.einsum("eq,eqi->ei", f["w"], vals), np.einsum("eq,eqi->ei", f["w"], f["u"]), atol=1e-14)


def test_vertex_value_requires_an_element(square2):
    ustar = postprocess_displacement(AnalyticDisc(mesh=square2, k=1, error_degree=6), None)
    with pytest.raises(ValueError):
        vertex_value(ustar, square2, 99)


def test_spherical_stress_recovery(rng, annulus0):
    disc = make_disc(annulus0, reduced=True)
    state = disc.initial_state()
    state.internal[:] = random_local_state(disc, rng)[:, disc.nc:]
    f = evaluate_fields(disc, state)
    P = piola_stress(f["F"], f["p"], MaterialParams())
    # the recovered spherical part is the pointwise trace of the constitutive stress
    assert_allclose(np.trace(f["P"], axis1=-2, axis2=-1), np.trace(P, axis1=-2, axis2=-1), atol=1e-12)


def test_eoc():
    hs = [0.4, 0.2, 0.1]
    rates = eoc([1.0, 0.25, 0.0625], hs)
    assert math.isnan(rates[0])
    assert_allclose(rates[1:], [2.0, 2.0])
    assert math.isnan(eoc([1.0, None], hs[:2])[1])


def test_area_norm_on_curved_mesh():
    mesh = build_quarter_annulus(level=1)
    disc = make_disc(mesh)
    ones = np.ones(disc.vol["w"].shape[:1] + (len(triangle_rule(disc.error_degree).weights),))
    assert_allclose(l2_norm(disc, ones), math.sqrt(math.pi * 0.75 / 4), rtol=1e-6)


def test_jacobian_report_at_reference(annulus0):
    disc = make_disc(annulus0)
    assert_allclose(jacobian_report(disc, disc.initial_state()), [1.0, 1.0, 1.0, 1.0], rtol=1e-14)


def test_error_report_formats():
    rep = ErrorReport()
    rep.add(0.5, {f"err_{f}": 4e-2 for f in ("u", "p", "F", "P", "ustar")})
    rep.add(0.25, {f"err_{f}": 1e-2 for f in ("u", "p", "F", "P", "ustar")})
    rep.add(0.125, failed_xi=0.73)
    assert rep.failed
    lines = rep.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[0].startswith("h,err_u,eoc_u")
    assert lines[2].split(",")[2] == "2.00"
    assert "F 0.73" in lines[3]
    assert "F 0.73" in rep.to_table()
    assert_allclose(rep.eocs("u")[1], 2.0)
    assert math.isnan(rep.eocs("u")[2])
