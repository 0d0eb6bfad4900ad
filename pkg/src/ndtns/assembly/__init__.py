"""Element kernels, condensation and global systems.

The functional entry points below are thin wrappers over
:class:`NDTNSDiscretization` for callers that work with local coefficient
vectors directly.
"""
import numpy as np

from .condensation import CondensationError, CondensedSystem, recover_internal, static_condense
from .monolithic import MonolithicNDTNS
from .ndtns import HybridState, NDTNSDiscretization
from .pairing import duality_pairing_element, mesh_duality_pairing
from .small_strain import SmallStrainMCS, pressure_robustness, small_strain_element
from .taylor_hood import TaylorHoodDiscretization


def element_residual(disc, x, xi=1.0):
    """Element residual vectors ``(ne, n)`` at local coefficients ``x``."""
    return disc.local_residual(x, xi)


def element_tangent(disc, x, eps_p=None, use_shift=False):
    """Symmetric element matrices ``(ne, n, n)`` at local coefficients ``x``."""
    return disc.local_tangent(x, use_shift=use_shift, eps_p=eps_p)


def assemble_global(disc, state, xi=1.0, eps_p=None, use_shift=False):
    """Condensed global system on the free coupling DoFs.

    Essential values (``xi`` times the prescribed data) are eliminated with
    the correction moved to the right-hand side.

    Returns
    -------
    A : scipy.sparse.csr_matrix
        Symmetric matrix on the free coupling DoFs.
    b : ndarray
        Right-hand side ``-R`` condensed, corrected for essential values.
    cond : CondensedSystem
        Element condensation data for :func:`recover_internal`.
    """
    x = disc.local_vectors(state)
    R = disc.local_residual(x, xi)
    K = disc.local_tangent(x, use_shift=use_shift, eps_p=eps_p)
    A, b, cond = disc.assemble_condensed(K, -R)
    dm = disc.dofmap
    ess = np.flatnonzero(dm.essential)
    defect = disc.essential_defect(state, xi)
    free = dm.free
    return A[free][:, free], b[free] - A[free][:, ess] @ defect, cond


__all__ = [
    "CondensationError", "CondensedSystem", "HybridState", "MonolithicNDTNS", "NDTNSDiscretization",
    "SmallStrainMCS", "TaylorHoodDiscretization", "assemble_global", "duality_pairing_element",
    "element_residual", "element_tangent", "mesh_duality_pairing", "pressure_robustness",
    "recover_internal", "small_strain_element", "static_condense",
]
