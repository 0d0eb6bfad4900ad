"""Global numbering of the hybridized displacement unknowns.

Only the coupling fields carry global numbers: the normal moments of the
displacement (``k+1`` per facet) followed by the tangential facet field
(``k+1`` per facet).  Both are stored in the fixed facet orientation; an
element whose local edge runs against it sees DoF ``i`` multiplied by
``(-1)**(i+1)`` (reversed normal/tangent times the parity of the Legendre
polynomial).  Stress, strain and pressure coefficients are element-local.
"""
from dataclasses import dataclass, field

import numpy as np

from ..geometry import facet_geometry
from .polynomials import n_monomials, shifted_legendre
from .quadrature import interval_rule


class BoundaryConditionError(ValueError):
    pass


@dataclass
class BoundaryConditions:
    """Boundary and volume data at full load (``xi = 1``).

    ``normal`` and ``tangential`` map marker names to a displacement callable
    ``X -> U (n, 2)`` (or ``None`` for zero) and make the normal displacement
    moments or the tangential facet field essential.  ``traction`` maps
    markers to ``X -> T (n, 2)``; unlisted boundary parts are traction free.
    ``body`` is ``X -> B (n, 2)``.
    """

    normal: dict = field(default_factory=dict)
    tangential: dict = field(default_factory=dict)
    traction: dict = field(default_factory=dict)
    body: object = None


def reversal_signs(k):
    return np.array([(-1.0) ** (i + 1) for i in range(k + 1)])


@dataclass
class HybridDofMap:
    k: int
    reduced: bool
    n_facets: int
    elem_dofs: np.ndarray
    elem_signs: np.ndarray
    essential: np.ndarray
    essential_values: np.ndarray
    n_u_facet_local: int
    n_u_int: int
    n_F: int
    n_P: int
    n_p: int

    @property
    def n_facet_dofs(self):
        return self.k + 1

    @property
    def n_coupling(self):
        return 2 * self.n_facets * (self.k + 1)

    @property
    def n_coupling_local(self):
        return 2 * self.n_u_facet_local

    @property
    def n_internal(self):
        return self.n_u_int + self.n_F + self.n_P + self.n_p

    @property
    def n_local(self):
        return self.n_coupling_local + self.n_internal

    @property
    def free(self):
        return np.flatnonzero(~self.essential)

    def statistics(self, n_elements):
        return {
            "total_per_element": self.n_local,
            "coupling_per_element": self.n_coupling_local,
            "global_coupling": self.n_coupling,
            "global_free": int((~self.essential).sum()),
            "internal_total": self.n_internal * n_elements,
        }


def _facets_of(mesh, markers):
    out = {}
    for name, func in markers.items():
        if name not in mesh.boundary_markers or len(mesh.boundary_markers[name]) == 0:
            raise BoundaryConditionError(f"boundary marker {name!r} references no facet")
        for f in mesh.boundary_markers[name]:
            if f in out and out[f][1] is not func:
                raise BoundaryConditionError(f"facet {f} receives contradictory essential values")
            out[int(f)] = (name, func)
    return out


def facet_moments(mesh, facet, func, k, kind):
    """``int_0^1 U . v q_i ds`` with ``v`` the unnormalized normal or tangent."""
    rule = interval_rule(2 * k + 8)
    X, tang = facet_geometry(mesh, facet, rule.points)
    vec = tang if kind == "tangent" else np.column_stack([tang[:, 1], -tang[:, 0]])
    U = np.zeros_like(X) if func is None else np.asarray(func(X), dtype=float)
    return np.einsum("p,pi,p->i", rule.weights, shifted_legendre(k, rule.points), np.einsum("pc,pc->p", U, vec))


def build_dofmap(mesh, k, bc=None, reduced=True):
    """Hybrid DoF map for the mixed element of order ``k``."""
    bc = bc or BoundaryConditions()
    nfd = k + 1
    nu = mesh.n_facets * nfd
    idx = np.arange(nfd)
    rev = reversal_signs(k)
    dofs = np.empty((mesh.n_elements, 6 * nfd), dtype=np.int64)
    signs = np.empty((mesh.n_elements, 6 * nfd))
    for e in range(3):
        f = mesh.element_facets[:, e][:, None]
        s = np.where(mesh.element_signs[:, e][:, None] > 0, 1.0, rev[None, :])
        dofs[:, e * nfd:(e + 1) * nfd] = f * nfd + idx
        dofs[:, 3 * nfd + e * nfd:3 * nfd + (e + 1) * nfd] = nu + f * nfd + idx
        signs[:, e * nfd:(e + 1) * nfd] = s
        signs[:, 3 * nfd + e * nfd:3 * nfd + (e + 1) * nfd] = s
    essential = np.zeros(2 * nu, dtype=bool)
    values = np.zeros(2 * nu)
    for offset, markers, kind in ((0, bc.normal, "normal"), (nu, bc.tangential, "tangent")):
        for f, (_, func) in _facets_of(mesh, markers).items():
            sl = slice(offset + f * nfd, offset + (f + 1) * nfd)
            essential[sl] = True
            values[sl] = facet_moments(mesh, f, func, k, kind)
    nm = n_monomials(k)
    n_sig = 3 * nm if reduced else 4 * nm
    return HybridDofMap(
        k=k, reduced=reduced, n_facets=mesh.n_facets, elem_dofs=dofs, elem_signs=signs,
        essential=essential, essential_values=values, n_u_facet_local=3 * nfd,
        n_u_int=k * (k + 1), n_F=n_sig, n_P=n_sig, n_p=nm,
    )
