import numpy as np
import pytest
from numpy.testing import assert_allclose

from ndtns.assembly.taylor_hood import TaylorHoodDiscretization
from ndtns.elements.dofmap import BoundaryConditions
from ndtns.geometry import build_cook_mesh
from ndtns.material import MaterialParams


def random_state(disc, rng, scale=0.02):
    x = disc.initial_state()
    h = disc.mesh.element_h().mean()
    x[: disc.nu] += scale * h * rng.standard_normal(disc.nu)
    x[disc.nu:] += scale * rng.standard_normal(len(x) - disc.nu)
    return x[disc.elem_dofs]


@pytest.mark.parametrize("k", [1, 2])
def test_reference_state_has_zero_residual(annulus0, k):
    disc = TaylorHoodDiscretization(annulus0, k)
    R = disc.local_residual(disc.initial_state()[disc.elem_dofs])
    assert_allclose(R, 0.0, atol=1e-13)


@pytest.mark.parametrize("k,constraint", [(1, "Jminus1"), (2, "logJ"), (2, "Jminus1")])
def test_tangent_matches_finite_differences(rng, annulus0, k, constraint):
    disc = TaylorHoodDiscretization(annulus0, k, MaterialParams(constraint=constraint))
    xl = random_state(disc, rng)
    K = disc.local_tangent(xl, eps_p=0.0)
    assert np.abs(K - np.swapaxes(K, 1, 2)).max() <= 1e-12 * np.abs(K).max()
    h = 1e-6
    for _ in range(5):
        d = random_state(disc, rng, 1.0) - disc.initial_state()[disc.elem_dofs]
        fd = (disc.local_residual(xl + h * d) - disc.local_residual(xl - h * d)) / (2 * h)
        Kd = np.einsum("eij,ej->ei", K, d)
        assert np.linalg.norm(Kd - fd) <= 1e-5 * np.linalg.norm(Kd)


def test_unsupported_order(annulus0):
    with pytest.raises(ValueError):
        TaylorHoodDiscretization(annulus0, 3)


def test_traction_load_is_total_force():
    mesh = build_cook_mesh(2, scale=0.01)
    T = np.array([0.0, 0.5])
    bc = BoundaryConditions(normal={"left": None}, tangential={"left": None},
                            traction={"right": lambda X: np.tile(T, (len(X), 1))})
    disc = TaylorHoodDiscretization(mesh, 2, bc=bc)
    R = np.zeros(disc.elem_dofs.shape)
    R[:, : disc.nub] = disc.load
    total = disc.assemble(R=R)[: disc.nu].reshape(-1, 2).sum(axis=0)
    # the right edge has length 0.16
    assert_allclose(total, 0.16 * T, rtol=1e-13)
