"""Standard displacement-pressure method for incompressible neo-Hooke.

Continuous ``P^k`` displacements with continuous ``P^1`` pressures; for
``k = 2`` this is Taylor-Hood, for ``k = 1`` the displacement space is
enriched by the cubic bubble (MINI).  The discrete Lagrangian is

.. math::

    L(u, p) = \\int_\\Omega W(F(u)) - p\\,C(\\det F(u)) - B\\cdot u
              - \\int_{\\Gamma_N} T\\cdot u

and the whole (u, p) system is solved monolithically.  Curved boundaries
are handled isoparametrically by the quadratic geometry map.

The class follows the same protocol as the hybrid discretization so that
:func:`ndtns.solver.adaptive_load_stepping` drives both.
"""
import numpy as np
import scipy.sparse as sp

from ..elements.dofmap import BoundaryConditionError, BoundaryConditions
from ..elements.quadrature import interval_rule, triangle_rule
from ..elements.reference import edge_points, lagrange_basis
from ..geometry import DegenerateGeometryError, element_geometry, facet_geometry
from ..material import MaterialParams, cof2, constraint, det2, material_tangent, piola_stress, shifted_tangent

_AXIS_TOL = 1e-10


class TaylorHoodDiscretization:
    """Monolithic ``P^k``-``P^1`` (``k = 2``) or MINI (``k = 1``) discretization.

    Parameters
    ----------
    mesh : Triangulation
    k : int
        Displacement order, 1 (MINI) or 2 (Taylor-Hood).
    params : MaterialParams
    bc : BoundaryConditions
        ``normal``/``tangential`` fix the corresponding displacement
        component.  A marker listed in only one of them must consist of
        axis-parallel facets.
    """

    def __init__(self, mesh, k=2, params=None, bc=None):
        if k not in (1, 2):
            raise ValueError("the standard method is available for k = 1 (MINI) and k = 2 (Taylor-Hood)")
        self.mesh = mesh
        self.k = k
        self.params = params or MaterialParams()
        self.bc = bc or BoundaryConditions()
        self.initial_pressure = None
        self.ubasis = lagrange_basis(k, bubble=(k == 1))
        self.pbasis = lagrange_basis(1)
        self._number_dofs()
        curved = mesh.is_curved
        self.volume_degree = 2 * k + 2 + (2 if curved else 0)
        self.facet_degree = 2 * k + 2 + (2 if curved else 0)
        self.error_degree = 2 * k + 4 + (2 if curved else 0)
        self.vol = self.volume_basis(triangle_rule(self.volume_degree))
        self._build_load()
        self._build_essential()
        self._pattern()

    # -------------------------------------------------------------- numbering
    def _number_dofs(self):
        m = self.mesh
        nv, ne = m.n_vertices, m.n_elements
        cols = [m.triangles]
        n_nodes = nv
        if self.k == 2:
            cols.append(nv + m.element_facets)
            n_nodes += m.n_facets
        else:
            cols.append((nv + np.arange(ne))[:, None])
            n_nodes += ne
        self.node_of = np.concatenate(cols, axis=1)  # (ne, nb) scalar displacement nodes
        self.n_nodes = n_nodes
        nb = self.node_of.shape[1]
        self.nu = 2 * n_nodes
        self.n_dofs = self.nu + nv
        # local layout: (node, component) then the three vertex pressures
        udofs = (2 * self.node_of[:, :, None] + np.arange(2)).reshape(ne, 2 * nb)
        self.elem_dofs = np.concatenate([udofs, self.nu + m.triangles], axis=1)
        self.nub = 2 * nb

    def node_coordinates(self):
        """Physical positions of the scalar displacement nodes."""
        m = self.mesh
        X = np.zeros((self.n_nodes, 2))
        X[:m.n_vertices] = m.vertices
        nodes = m.element_nodes()
        if self.k == 2:
            for e in range(3):
                X[m.n_vertices + m.element_facets[:, e]] = nodes[:, 3 + e]
        else:
            X[m.n_vertices:] = element_geometry(m, np.array([[1 / 3, 1 / 3]]))[0][:, 0]
        return X

    # ------------------------------------------------------------------ bases
    def volume_basis(self, rule, elements=None):
        X, G, det = element_geometry(self.mesh, rule.points, elements=elements)
        if np.any(det <= 0):
            raise DegenerateGeometryError("non-positive Jacobian determinant at a quadrature point")
        vals, grads = self.ubasis.eval(rule.points)
        Ginv = np.linalg.inv(G)
        dphi = np.einsum("qnd,eqdj->eqnj", grads, Ginv)  # physical gradients
        pv = self.pbasis.eval(rule.points, derivatives=0)
        return {"X": X, "w": rule.weights[None] * det, "phi": vals, "dphi": dphi, "q": pv}

    def _build_load(self):
        m, ne = self.mesh, self.mesh.n_elements
        load = np.zeros((ne, self.nub))
        v = self.vol
        nb = self.nub // 2
        if self.bc.body is not None:
            B = np.asarray(self.bc.body(v["X"].reshape(-1, 2)), dtype=float).reshape(v["X"].shape)
            load += np.einsum("eq,qn,eqc->enc", v["w"], v["phi"], B).reshape(ne, -1)
        rule = interval_rule(self.facet_degree)
        for name, func in self.bc.traction.items():
            for f in m.boundary_markers[name]:
                t0 = m.facet_elements[f, 0]
                e = int(np.flatnonzero(m.element_facets[t0] == f)[0])
                X, tang = facet_geometry(m, f, rule.points)
                ds = rule.weights * np.linalg.norm(tang, axis=1)
                T = np.asarray(func(X), dtype=float)
                phi = self.ubasis.eval(edge_points(e, rule.points), derivatives=0)
                load[t0] += np.einsum("p,pn,pc->nc", ds, phi, T).reshape(nb * 2)
        self.load = load

    def _build_essential(self):
        """Nodal essential values at full load and the fixed-DoF mask."""
        m = self.mesh
        fixed = np.zeros(self.n_dofs, dtype=bool)
        values = np.zeros(self.n_dofs)
        Xn = self.node_coordinates()
        both = set(self.bc.normal) & set(self.bc.tangential)
        for name in set(self.bc.normal) | set(self.bc.tangential):
            if name not in m.boundary_markers or len(m.boundary_markers[name]) == 0:
                raise BoundaryConditionError(f"boundary marker {name!r} references no facet")
            func = self.bc.normal.get(name, self.bc.tangential.get(name))
            for f in m.boundary_markers[name]:
                nodes = self._facet_nodes(f)
                if name in both:
                    comps = (0, 1)
                else:
                    d = np.diff(m.vertices[m.facets[f]], axis=0)[0]
                    along = int(np.argmax(np.abs(d)))
                    if abs(d[1 - along]) > _AXIS_TOL * np.abs(d).max() or f in m.curved_edges:
                        raise BoundaryConditionError(
                            f"component constraint on marker {name!r} needs axis-parallel facets")
                    comps = (1 - along,) if name in self.bc.normal else (along,)
                U = np.zeros((len(nodes), 2)) if func is None else np.asarray(func(Xn[nodes]), dtype=float)
                for c in comps:
                    fixed[2 * nodes + c] = True
                    values[2 * nodes + c] = U[:, c]
        self.essential = fixed
        self.essential_values = values
        self.free = np.flatnonzero(~fixed)

    def _facet_nodes(self, f):
        m = self.mesh
        nodes = list(m.facets[f])
        if self.k == 2:
            nodes.append(m.n_vertices + f)
        return np.array(nodes)

    def _pattern(self):
        d = self.elem_dofs
        self._rows = np.broadcast_to(d[:, :, None], d.shape + (d.shape[1],)).ravel()
        self._cols = np.broadcast_to(d[:, None, :], d.shape + (d.shape[1],)).ravel()
        v = self.vol
        self.p_mass = np.einsum("eq,qi,qj->eij", v["w"], v["q"], v["q"])

    # ---------------------------------------------------------------- kernels
    def initial_state(self, pressure=None):
        """``u = 0`` and constant pressure (default ``mu``: stress free)."""
        x = np.zeros(self.n_dofs)
        p0 = self.initial_pressure if pressure is None else pressure
        x[self.nu:] = self.params.mu if p0 is None else p0
        return x

    def set_load(self, state, xi):
        state = state.copy()
        state[self.essential] = xi * self.essential_values[self.essential]
        return state

    def _fields(self, xl):
        v = self.vol
        ne, q = v["w"].shape
        nb = self.nub // 2
        U = xl[:, :self.nub].reshape(ne, nb, 2)
        F = np.eye(2) + np.einsum("enc,eqnj->eqcj", U, v["dphi"])
        p = np.einsum("qi,ei->eq", v["q"], xl[:, self.nub:])
        return F, p

    def _grad_basis(self):
        """``dF/dx_l`` for each local displacement DoF, shape (ne, q, nub, 4)."""
        v = self.vol
        ne, q, nb, _ = v["dphi"].shape
        out = np.zeros((ne, q, nb, 2, 2, 2))
        for c in range(2):
            out[:, :, :, c, c, :] = v["dphi"]
        return out.reshape(ne, q, 2 * nb, 4)

    def local_residual(self, xl, xi=1.0):
        v = self.vol
        F, p = self._fields(xl)
        P = piola_stress(F, p, self.params).reshape(F.shape[:2] + (4,))
        C, _, _ = constraint(det2(F), self.params.constraint)
        dG = self._grad_basis()
        R = np.zeros_like(xl)
        R[:, :self.nub] = np.einsum("eq,eqla,eqa->el", v["w"], dG, P) - xi * self.load
        R[:, self.nub:] = -np.einsum("eq,qi,eq->ei", v["w"], v["q"], C)
        return R

    def local_tangent(self, xl, use_shift=False, eps_p=None):
        v = self.vol
        eps_p = 1e-7 * self.params.mu if eps_p is None else eps_p
        F, p = self._fields(xl)
        A = material_tangent(F, p, self.params)
        if use_shift:
            A, _ = shifted_tangent(A, self.params)
        _, dC, _ = constraint(det2(F), self.params.constraint)
        dG = self._grad_basis()
        ne, n = xl.shape
        K = np.zeros((ne, n, n))
        wdG = v["w"][..., None, None] * dG
        K[:, :self.nub, :self.nub] = np.einsum("eqla,eqab,eqmb->elm", wdG, A, dG)
        cof = dC[..., None] * cof2(F).reshape(F.shape[:2] + (4,))
        Kup = -np.einsum("eqla,eqa,qi->eli", wdG, cof, v["q"])
        K[:, :self.nub, self.nub:] = Kup
        K[:, self.nub:, :self.nub] = np.swapaxes(Kup, 1, 2)
        K[:, self.nub:, self.nub:] = -eps_p * self.p_mass
        return K

    def assemble(self, K=None, R=None):
        """Global sparse matrix and vector from element contributions."""
        out = []
        if K is not None:
            out.append(sp.coo_matrix((K.ravel(), (self._rows, self._cols)), shape=(self.n_dofs,) * 2).tocsr())
        if R is not None:
            r = np.zeros(self.n_dofs)
            np.add.at(r, self.elem_dofs, R)
            out.append(r)
        return out[0] if len(out) == 1 else tuple(out)

    def residual_norm(self, R):
        r = self.assemble(R=R)
        return float(np.linalg.norm(r[self.free]))

    def newton_system(self, state, xi, use_shift=False, eps_p=None):
        """Residual norm and increment solver (essential defect included)."""
        from ..solver import solve_condensed_linear

        xl = state[self.elem_dofs]
        R = self.local_residual(xl, xi)
        ess = np.flatnonzero(self.essential)
        defect = xi * self.essential_values[ess] - state[ess]
        norm = float(np.hypot(self.residual_norm(R), np.linalg.norm(defect)))

        def solve(use_shift=use_shift):
            K = self.local_tangent(xl, use_shift=use_shift, eps_p=eps_p)
            A, r = self.assemble(K, R)
            dx = np.zeros(self.n_dofs)
            dx[ess] = defect
            rhs = -r[self.free] - A[self.free][:, ess] @ defect
            dx[self.free] = solve_condensed_linear(A[self.free][:, self.free], rhs)
            return dx

        return norm, solve

    def update(self, state, inc, factor=1.0):
        return state + factor * inc

    def volume_check(self, state):
        F, _ = self._fields(state[self.elem_dofs])
        w = self.vol["w"]
        return (w * det2(F)).sum(axis=1) / w.sum(axis=1)

    # --------------------------------------------------------- postprocessing
    def displacement_at_vertex(self, state, vertex):
        """Nodal displacement at a mesh vertex."""
        return state[2 * vertex:2 * vertex + 2].copy()

    def pressure(self, state):
        return state[self.nu:]

    def evaluate_fields(self, state, rule=None):
        """Fields ``X, w, u, F, P, p`` at the points of ``rule`` (default:
        the error rule)."""
        rule = rule or triangle_rule(self.error_degree)
        b = self.volume_basis(rule)
        xl = state[self.elem_dofs]
        ne, q = b["w"].shape
        U = xl[:, :self.nub].reshape(ne, -1, 2)
        u = np.einsum("qn,enc->eqc", b["phi"], U)
        F = np.eye(2) + np.einsum("enc,eqnj->eqcj", U, b["dphi"])
        p = np.einsum("qi,ei->eq", b["q"], xl[:, self.nub:])
        P = piola_stress(F, p, self.params)
        return {"X": b["X"], "w": b["w"], "u": u, "F": F, "P": P, "p": p}


__all__ = ["TaylorHoodDiscretization"]
