import numpy as np
import pytest

from ndtns.assembly.ndtns import NDTNSDiscretization
from ndtns.elements.dofmap import BoundaryConditions
from ndtns.geometry import build_cook_mesh, build_quarter_annulus, build_unit_square
from ndtns.material import MaterialParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def square2():
    return build_unit_square(2)


@pytest.fixture
def annulus0():
    return build_quarter_annulus(level=0)


@pytest.fixture
def cook2():
    return build_cook_mesh(2, scale=0.01)


def random_local_state(disc, rng, scale=0.05):
    """Random local coefficients near the reference state.

    Coefficients are normalized by the size of their basis functions so
    that the perturbation of ``F`` and ``P`` is about ``scale`` pointwise
    (keeps ``det F > 0``).
    """
    x = scale * rng.standard_normal((disc.mesh.n_elements, disc.n))
    E = np.abs(disc.vol["E"]).max(axis=(1, 2))
    x[:, disc.col_deps] /= np.maximum(E, 1e-14) * np.sqrt(len(disc.col_deps))
    P = np.abs(disc.vol["P"]).max(axis=(1, 3, 4))
    x[:, disc.col_P] /= P * np.sqrt(len(disc.col_P))
    x[:, disc.col_lam] *= disc.mesh.element_h()[:, None]
    x[:, disc.col_p] *= 10.0
    x[:, disc.col_p[0]] += disc.params.mu
    return x


def make_disc(mesh, k=2, tau=0.0, reduced=True, bc=None, constraint="Jminus1"):
    return NDTNSDiscretization(mesh, k, MaterialParams(constraint=constraint), bc or BoundaryConditions(), tau, reduced)


# ----------------------------------------------------------- acceptance log
ACCEPTANCE_RESULTS = {}


def record_criterion(number, title, passed, detail=""):
    """Store and print the one-line verdict of an acceptance criterion."""
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_RESULTS[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
