import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import make_disc, random_local_state
from ndtns.assembly import (
    CondensationError,
    assemble_global,
    element_residual,
    element_tangent,
    recover_internal,
    static_condense,
)
from ndtns.assembly.ndtns import normalize_tau
from ndtns.elements.dofmap import BoundaryConditions
from ndtns.elements.quadrature import triangle_rule
from ndtns.geometry import build_quarter_annulus, build_unit_square, make_triangulation
from ndtns.solver import LoadStepConfig, NewtonConfig, adaptive_load_stepping


def reference_vectors(disc, pressure=None):
    return disc.local_vectors(disc.initial_state(pressure))


# ------------------------------------------------------------------ residual
def test_reference_state_has_zero_residual(annulus0):
    disc = make_disc(annulus0, tau=3.0)
    R = element_residual(disc, reference_vectors(disc))
    assert_allclose(R, 0.0, atol=1e-13)


@pytest.mark.parametrize("reduced", [True, False])
def test_zero_pressure_residual_is_mu_identity_moment(square2, reduced):
    disc = make_disc(square2, k=2, reduced=reduced)
    R = element_residual(disc, reference_vectors(disc, pressure=0.0))
    # independent higher-order quadrature of int mu I : dF over the test
    # deformation gradients (spherical part of F carried by div u if reduced)
    b = disc.volume_basis(triangle_rule(8))
    expected = np.einsum("eq,eqad,a->ed", b["w"], b["E"], disc.params.mu * np.array([1.0, 0.0, 0.0, 1.0]))
    assert_allclose(R[:, disc.col_deps], expected, atol=1e-13)
    assert np.abs(expected).max() > 0.1
    if reduced:
        # trace-free F tests see nothing; u tests see mu * int div v
        assert_allclose(R[:, disc.col_F], 0.0, atol=1e-13)
        assert_allclose(R[:, disc.col_u], disc.params.mu * np.einsum("eq,eqf->ef", b["w"], b["div"]), atol=1e-13)
    others = np.setdiff1d(np.arange(disc.n), disc.col_deps)
    assert_allclose(R[:, others], 0.0, atol=1e-13)


def tangential_jump_traces(disc, s):
    """Physical tangential mismatch ``(u - u~)_t`` of every local basis vector
    on each edge at parameters ``s``, with the facet measure."""
    k = disc.k
    out = []
    for e in range(3):
        fb = disc.facet_basis(e, s)
        t = fb["a"] / fb["len"][..., None]
        jump = np.zeros(fb["len"].shape + (disc.n,))
        jump[..., disc.col_u] = np.einsum("eqfa,eqa->eqf", fb["u"], t)
        cols = disc.col_lam[e * (k + 1):(e + 1) * (k + 1)]
        jump[..., cols] = -fb["lam"][None] / fb["len"][..., None]
        out.append((fb["len"], jump))
    return out


@pytest.mark.parametrize("mesh", ["square", "annulus"])
def test_stabilization_residual_is_facet_mass_times_mismatch(rng, mesh):
    mesh = build_unit_square(2) if mesh == "square" else build_quarter_annulus(level=0)
    tau = 1.0
    d0 = make_disc(mesh, tau=0.0)
    d1 = make_disc(mesh, tau=tau)
    x = reference_vectors(d0)
    x[:, d0.col_u] = 0.1 * rng.standard_normal((mesh.n_elements, len(d0.col_u)))
    x[:, d0.col_lam] = 0.1 * rng.standard_normal((mesh.n_elements, len(d0.col_lam)))
    dR = element_residual(d1, x) - element_residual(d0, x)
    s, ws = np.polynomial.legendre.leggauss(12)
    s, ws = 0.5 * (s + 1), 0.5 * ws
    expected = np.zeros_like(dR)
    for length, jump in tangential_jump_traces(d0, s):
        mismatch = np.einsum("eqi,ei->eq", jump, x)
        expected += tau * np.einsum("q,eq,eq,eqi->ei", ws, length, mismatch, jump)
    if mesh.is_curved:
        # Piola factors make the traces rational on curved edges: the
        # polynomial facet rule is only accurate to quadrature error there
        assert_allclose(dR, expected, rtol=1e-3, atol=1e-3 * np.abs(expected).max())
    else:
        assert_allclose(dR, expected, atol=1e-12)
    assert np.abs(expected[:, d0.col_lam]).max() > 1e-3


def test_normalize_tau_shapes():
    assert normalize_tau(2.0, 3).shape == (3, 3)
    assert_allclose(normalize_tau(np.arange(3.0), 3)[:, 2], [0, 1, 2])
    with pytest.raises(ValueError):
        normalize_tau(np.ones(4), 3)


# ------------------------------------------------------------------- tangent
@pytest.mark.parametrize(
    "mesh,k,reduced,constraint",
    [("annulus", 2, True, "Jminus1"), ("annulus", 1, False, "logJ"), ("cook", 2, False, "Jminus1"),
     ("cook", 1, True, "logJ")],
)
def test_tangent_matches_finite_differences(rng, cook2, mesh, k, reduced, constraint):
    mesh = build_quarter_annulus(level=0) if mesh == "annulus" else cook2
    disc = make_disc(mesh, k=k, tau=2.5, reduced=reduced, constraint=constraint)
    x = random_local_state(disc, rng, scale=0.05 if constraint == "Jminus1" else 0.02)
    K = element_tangent(disc, x, eps_p=0.0)
    h = 1e-6
    for _ in range(5):
        # directions scaled like the state itself
        d = random_local_state(disc, rng, scale=1.0)
        d[:, disc.col_p[0]] -= disc.params.mu
        fd = (element_residual(disc, x + h * d) - element_residual(disc, x - h * d)) / (2 * h)
        Kd = np.einsum("eij,ej->ei", K, d)
        assert np.linalg.norm(Kd - fd) <= 1e-5 * np.linalg.norm(Kd)


def test_tangent_is_symmetric(rng, annulus0):
    disc = make_disc(annulus0, tau=1.0)
    x = random_local_state(disc, rng)
    for use_shift in (False, True):
        K = element_tangent(disc, x, use_shift=use_shift)
        assert np.abs(K - np.swapaxes(K, 1, 2)).max() <= 1e-12 * np.abs(K).max()


def test_reference_tangent_ff_block_is_mu_mass(square2):
    disc = make_disc(square2, reduced=False)
    x = reference_vectors(disc, pressure=0.0)
    K = element_tangent(disc, x, eps_p=0.0)
    b = disc.volume_basis(triangle_rule(8))
    F = b["F"].reshape(b["F"].shape[:3] + (4,))
    mass = np.einsum("eq,eqia,eqja->eij", b["w"], F, F)
    assert_allclose(K[:, disc.col_F[:, None], disc.col_F[None, :]], disc.params.mu * mass, atol=1e-13)


def test_pressure_regularization_block(rng, square2):
    disc = make_disc(square2)
    x = random_local_state(disc, rng)
    eps = 1e-7 * disc.params.mu
    blk = (element_tangent(disc, x, eps_p=eps) - element_tangent(disc, x, eps_p=0.0))
    pp = blk[:, disc.col_p[:, None], disc.col_p[None, :]]
    b = disc.volume_basis(triangle_rule(8))
    assert_allclose(pp, -eps * np.einsum("eq,qi,qj->eij", b["w"], b["p"], b["p"]), atol=1e-20)
    assert np.all(np.linalg.eigvalsh(pp) < 0)
    mask = np.ones(disc.n, bool)
    mask[disc.col_p] = False
    assert_allclose(blk[:, mask], 0.0, atol=0)


# -------------------------------------------------------------- condensation
def test_condense_block_diagonal():
    K = np.diag([3.0, 4.0, 5.0])
    r = np.array([1.0, 2.0, 3.0])
    cond = static_condense(K, r, 2)
    assert_allclose(cond.S, np.diag([3.0, 4.0]))
    assert_allclose(cond.rhs, r[:2])


def test_condense_scalar_example():
    cond = static_condense(np.array([[4.0, 2.0], [2.0, 2.0]]), np.array([1.0, 1.0]), 1)
    assert_allclose(cond.S, [[2.0]])
    assert_allclose(cond.rhs, [0.0])
    assert_allclose(recover_internal(cond, np.zeros(1)), [0.5])
    zero = static_condense(np.array([[4.0, 2.0], [2.0, 2.0]]), np.zeros(2), 1)
    assert_allclose(zero.recover(np.zeros(1)), [0.0])


def test_condense_then_recover_equals_dense_solve(rng, annulus0):
    disc = make_disc(annulus0, tau=1.0)
    x = reference_vectors(disc)
    K = element_tangent(disc, x)[3]
    # a free element has rigid and conformal null modes: anchor the coupling
    # unknowns as a boundary would
    K[: disc.nc, : disc.nc] += np.eye(disc.nc)
    r = rng.standard_normal(disc.n)
    cond = static_condense(K, r, disc.nc)
    xc = np.linalg.solve(cond.S, cond.rhs)
    full = np.r_[xc, cond.recover(xc)]
    # near-kernel conformal modes make K ill conditioned (~1e8): check the
    # normwise backward error and compare the two solutions within the
    # forward error bound of a backward stable solve
    backward = np.linalg.norm(K @ full - r) / (np.linalg.norm(K, 2) * np.linalg.norm(full) + np.linalg.norm(r))
    assert backward < 1e-10
    dense = np.linalg.solve(K, r)
    bound = 1e-14 * np.linalg.cond(K) * np.linalg.norm(dense)
    assert np.linalg.norm(full - dense) < bound


def test_condense_reports_singular_element():
    K = np.zeros((3, 3, 3))
    K[:] = np.eye(3)
    K[1, 2, 2] = 0.0
    with pytest.raises(CondensationError) as info:
        static_condense(K, np.zeros((3, 3)), 2)
    assert info.value.element == 1


# ------------------------------------------------------------- global level
def test_single_element_all_essential():
    mesh = make_triangulation([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], facet_markers={"all": [(0, 1), (1, 2), (2, 0)]})
    bc = BoundaryConditions(normal={"all": None}, tangential={"all": None})
    disc = make_disc(mesh, bc=bc)
    A, b, cond = assemble_global(disc, disc.initial_state(pressure=0.0))
    assert A.shape == (0, 0) and b.shape == (0,)
    # the residual gives the reactions of the stressed reference state
    R = element_residual(disc, reference_vectors(disc, pressure=0.0))
    assert np.abs(R[0, disc.col_u]).max() > 0.1


def test_two_element_matrix_is_symmetric_and_sparse(rng):
    mesh = make_triangulation([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]])
    disc = make_disc(mesh, tau=1.0)
    state = disc.initial_state()
    state.internal += 0.01 * rng.standard_normal(state.internal.shape)
    A, _, _ = assemble_global(disc, state, use_shift=True)
    A = A.toarray()
    assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()
    # DoFs on the two unshared facets of different elements do not couple
    dm = disc.dofmap
    f0 = [f for f in mesh.element_facets[0] if mesh.facet_elements[f, 1] < 0][0]
    f1 = [f for f in mesh.element_facets[1] if mesh.facet_elements[f, 1] < 0][0]
    k = disc.k
    rows = np.r_[np.arange(f0 * (k + 1), (f0 + 1) * (k + 1))]
    cols = np.r_[np.arange(f1 * (k + 1), (f1 + 1) * (k + 1))]
    assert_allclose(A[np.ix_(rows, cols)], 0.0, atol=0)


def test_reference_state_residual_on_annulus(annulus0):
    from ndtns.bench.problems import inflation_conditions

    disc = make_disc(annulus0, bc=inflation_conditions(2.0))
    norm, _ = disc.newton_system(disc.initial_state(), 0.0)
    assert norm < 1e-12


def mixed_conditions():
    """Clamped left and bottom edges, body force and traction on the right."""
    return BoundaryConditions(
        normal={"left": None, "bottom": None},
        tangential={"left": None, "bottom": None},
        traction={"right": lambda X: np.tile([0.02, 0.03], (len(X), 1))},
        body=lambda X: np.stack([0.1 * X[:, 1], -0.2 * X[:, 0]], axis=1),
    )


@pytest.mark.parametrize("k", [1, 2])
def test_jump_of_tangential_normal_stress_vanishes_at_solution(k):
    mesh = build_unit_square(2)
    disc = make_disc(mesh, k=k, bc=mixed_conditions())
    res = adaptive_load_stepping(disc, NewtonConfig(tol_residual=1e-12), LoadStepConfig(delta_xi_init=1.0))
    assert res.converged
    x = disc.local_vectors(res.state)
    xP = x[:, disc.col_P]
    # facet moments of P_tn against the facet Legendre functions, summed
    # over both sides of every interior facet
    s, ws = np.polynomial.legendre.leggauss(k + 3)
    s, ws = 0.5 * (s + 1), 0.5 * ws
    leg = np.polynomial.legendre.legvander(2 * s - 1, k)
    jump = {}
    for e in range(3):
        fb = disc.facet_basis(e, s)
        t = fb["a"] / fb["len"][..., None]
        n = fb["nu"] / fb["len"][..., None]
        Ptn = np.einsum("eqa,eqpab,eqb,ep->eq", t, fb["P"], n, xP)
        for T in range(mesh.n_elements):
            f = int(mesh.element_facets[T, e])
            if mesh.facet_elements[f, 1] < 0:
                continue
            # the two sides run along the facet in opposite directions, so
            # both the parametrization and the tangent of u~ flip
            flip = mesh.element_signs[T, e]
            mom = flip * np.einsum("q,q,q,qi->i", ws, fb["len"][T], Ptn[T], leg if flip > 0 else leg[::-1])
            jump[f] = jump.get(f, 0.0) + mom
    assert len(jump) == len(mesh.interior_facets)
    scale = np.abs(xP).max()
    assert scale > 1e-3
    assert max(np.abs(v).max() for v in jump.values()) < 1e-9
