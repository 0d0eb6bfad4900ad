import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import make_disc
from ndtns.assembly.monolithic import MonolithicNDTNS, sigma_reversal_signs
from ndtns.elements.dofmap import BoundaryConditions
from ndtns.geometry import build_unit_square
from ndtns.solver import NewtonConfig, quasi_newton


def mixed_conditions():
    return BoundaryConditions(
        normal={"left": None, "bottom": None},
        tangential={"left": None, "bottom": None},
        traction={"right": lambda X: np.tile([0.02, 0.03], (len(X), 1))},
        body=lambda X: np.stack([0.1 * X[:, 1], -0.2 * X[:, 0]], axis=1),
    )


@pytest.mark.parametrize("k", [1, 2])
def test_hybridized_solution_equals_conforming_solution(k):
    mesh = build_unit_square(1)
    assert mesh.n_elements == 2
    disc = make_disc(mesh, k=k, reduced=False, bc=mixed_conditions())
    config = NewtonConfig(tol_residual=1e-12)
    hyb = quasi_newton(disc, disc.initial_state(), 1.0, config)
    mono = MonolithicNDTNS(disc)
    conf = quasi_newton(mono, mono.initial_state(), 1.0, config)
    assert hyb.converged and conf.converged
    xh = disc.local_vectors(hyb.state)
    xm = mono.local_vectors(conf.state)
    keep = np.setdiff1d(np.arange(disc.n), disc.col_lam)
    assert np.abs(xh[:, disc.col_P]).max() > 1e-3
    assert_allclose(xh[:, keep], xm[:, keep], atol=1e-9)


def test_conforming_system_requires_full_layout_without_tau(square2):
    with pytest.raises(ValueError):
        MonolithicNDTNS(make_disc(square2, reduced=True))
    with pytest.raises(ValueError):
        MonolithicNDTNS(make_disc(square2, reduced=False, tau=1.0))


def test_conforming_tangent_is_symmetric(square2):
    mono = MonolithicNDTNS(make_disc(square2, reduced=False, bc=mixed_conditions()))
    A = mono.tangent(mono.initial_state()).toarray()
    assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()


def test_sigma_reversal_signs():
    assert_allclose(sigma_reversal_signs(2), [1.0, -1.0, 1.0])
