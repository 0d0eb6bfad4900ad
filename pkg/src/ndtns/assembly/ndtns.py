"""Hybridized mixed element for incompressible finite elasticity.

Per element the unknowns are, in this order,

* coupling: normal displacement moments ``u_F`` (``3 (k+1)``) and the
  tangential facet field ``u~`` (``3 (k+1)``);
* internal: interior displacement coefficients, the deformation gradient
  ``F``, the stress ``P`` and the pressure ``p``.

The element vector is the gradient of the element Lagrangian

.. math::

    L_T = \\int_T W(F) - p\\,C(\\det F) - (F - I):P + P:\\nabla u
          - \\int_{\\partial T} P_{tn} (u - \\tilde u)_t
          + \\frac{\\tau}{2} \\int_{\\partial T} |(u - \\tilde u)_t|^2
          - \\int_T B\\cdot u - \\int_{\\Gamma_N} T_n u_n + T_t \\tilde u_t

and the element matrix its Hessian (plus the ``-eps_p`` pressure mass used
only in the matrix).  ``F`` is parametrized as ``I + sum F_j Phi_j``; in the
reduced layout only trace-free ``F``/``P`` functions are kept and the
spherical part of ``F`` is ``(div u / 2) I``.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..elements.dofmap import BoundaryConditions, build_dofmap
from ..elements.mapping import push_forward, rt_gradient
from ..elements.quadrature import interval_rule, triangle_rule
from ..elements.reference import edge_points, edge_vectors, l2_basis, lambda_trace, rt_basis, sigma_basis
from ..geometry import DegenerateGeometryError, element_geometry
from ..material import ConstitutiveDomainError, MaterialParams, cof2, constraint, det2, material_tangent, piola_stress
from ..material import shifted_tangent
from .condensation import CondensationError, static_condense

VEC_I = np.array([1.0, 0.0, 0.0, 1.0])


@dataclass
class HybridState:
    """Global coupling vector and element-wise internal coefficients."""

    coupling: np.ndarray
    internal: np.ndarray

    def copy(self):
        return HybridState(self.coupling.copy(), self.internal.copy())


def normalize_tau(tau, n_elements):
    """Per (element, local edge) stabilization array from a scalar or array."""
    tau = np.asarray(tau, dtype=float)
    if tau.ndim == 0:
        return np.full((n_elements, 3), float(tau))
    if tau.shape == (n_elements,):
        return np.repeat(tau[:, None], 3, axis=1)
    if tau.shape == (n_elements, 3):
        return tau.copy()
    raise ValueError(f"tau must be scalar, (n_elements,) or (n_elements, 3); got {tau.shape}")


class NDTNSDiscretization:
    """Element data, residual/tangent kernels and condensed global systems.

    Parameters
    ----------
    mesh : Triangulation
    k : int
        Polynomial order (1 or 2).
    params : MaterialParams
    bc : BoundaryConditions
    tau : float or array
        Facet stabilization, scalar or per element / per (element, edge).
    reduced : bool
        Trace-free strain/stress layout (default) or the full layout.
    """

    def __init__(self, mesh, k=2, params=None, bc=None, tau=0.0, reduced=True):
        self.mesh = mesh
        self.k = k
        self.params = params or MaterialParams()
        self.bc = bc or BoundaryConditions()
        self.reduced = reduced
        self.initial_pressure = None
        self.dofmap = build_dofmap(mesh, k, self.bc, reduced)
        self.tau = normalize_tau(tau, mesh.n_elements)
        dm = self.dofmap
        self.nuf, self.nui = dm.n_u_facet_local, dm.n_u_int
        self.nc = dm.n_coupling_local
        self.n = dm.n_local
        o = self.nc
        self.col_u = np.r_[0:self.nuf, o:o + self.nui]
        self.col_lam = np.arange(self.nuf, self.nc)
        self.col_F = np.arange(o + self.nui, o + self.nui + dm.n_F)
        self.col_P = np.arange(self.col_F[-1] + 1, self.col_F[-1] + 1 + dm.n_P)
        self.col_p = np.arange(self.col_P[-1] + 1, self.n)
        self.col_deps = np.r_[self.col_u, self.col_F]
        sig = sigma_basis(k)
        self._sig_mask = np.array([t["deviatoric"] or not reduced for t in sig.tags])
        self.sigma = sig.subset(self._sig_mask)
        curved = mesh.is_curved
        self.volume_degree = 2 * k + 2 + (2 if curved else 0)
        # tangential RT traces have degree k + 1, so the tau term needs 2k + 2
        self.facet_degree = 2 * k + 2 + (2 if curved else 0)
        self.error_degree = 2 * k + 4 + (2 if curved else 0)
        self.vol = self.volume_basis(triangle_rule(self.volume_degree))
        self._build_constant_blocks()

    # ------------------------------------------------------------------ bases
    def volume_basis(self, rule, elements=None):
        """Physical basis values at the points of ``rule`` on all elements."""
        k = self.k
        X, G, det, dG = element_geometry(self.mesh, rule.points, elements=elements, second=True)
        if np.any(det <= 0):
            raise DegenerateGeometryError("non-positive Jacobian determinant at a quadrature point")
        ne, q = det.shape
        Gf, dGf = G.reshape(-1, 2, 2), dG.reshape(-1, 2, 2, 2)
        rvals, rgrads = rt_basis(k).eval(rule.points)
        rep = lambda a: np.broadcast_to(a[None], (ne,) + a.shape).reshape((-1,) + a.shape[1:])  # noqa: E731
        u = push_forward("RT", Gf, rep(rvals)).reshape(ne, q, -1, 2)
        grad = rt_gradient(Gf, rep(rvals), rep(rgrads), dGf).reshape(ne, q, -1, 2, 2)
        div = np.einsum("pfii->pf", rgrads)[None] / det[..., None]
        svals = self.sigma.eval(rule.points, derivatives=0)
        P = push_forward("SigmaDC", Gf, rep(svals)).reshape(ne, q, -1, 2, 2)
        F = push_forward("FGrad", Gf, rep(np.swapaxes(svals, -1, -2))).reshape(ne, q, -1, 2, 2)
        pb = l2_basis(k).eval(rule.points, derivatives=0)
        E = np.zeros((ne, q, 4, len(self.col_deps)))
        if self.reduced:
            E[:, :, :, :len(self.col_u)] = 0.5 * div[:, :, None, :] * VEC_I[None, None, :, None]
        E[:, :, :, len(self.col_u):] = np.moveaxis(F.reshape(ne, q, -1, 4), 2, 3)
        return {
            "X": X, "w": rule.weights[None] * det, "u": u, "grad": grad, "div": div,
            "P": P, "F": F, "p": pb, "E": E,
        }

    def facet_basis(self, e, s, elements=None):
        """Traces on local edge ``e`` at local parameters ``s``."""
        pts = edge_points(e, s)
        X, G, det = element_geometry(self.mesh, pts, elements=elements)
        ne, q = det.shape
        Gf = G.reshape(-1, 2, 2)
        rep = lambda a: np.broadcast_to(a[None], (ne,) + a.shape).reshape((-1,) + a.shape[1:])  # noqa: E731
        rvals = rt_basis(self.k).eval(pts, derivatives=0)
        u = push_forward("RT", Gf, rep(rvals)).reshape(ne, q, -1, 2)
        P = push_forward("SigmaDC", Gf, rep(self.sigma.eval(pts, derivatives=0))).reshape(ne, q, -1, 2, 2)
        a = np.einsum("epij,j->epi", G, edge_vectors(e)[0])
        nu = np.stack([a[..., 1], -a[..., 0]], axis=-1)
        return {"X": X, "u": u, "P": P, "a": a, "nu": nu, "len": np.linalg.norm(a, axis=-1),
                "lam": lambda_trace(self.k, s)}

    # -------------------------------------------------------- constant blocks
    def _build_constant_blocks(self):
        ne, n, k = self.mesh.n_elements, self.n, self.k
        v = self.vol
        Kc = np.zeros((ne, n, n))
        w = v["w"]
        Pv = v["P"].reshape(ne, w.shape[1], -1, 4)
        # -(F - I) : P
        fp = -np.einsum("eq,eqad,eqpa->edp", w, v["E"], Pv)
        # P : Grad u
        pu = np.einsum("eq,eqpa,equa->epu", w, Pv, v["grad"].reshape(ne, w.shape[1], -1, 4))
        lift = np.zeros((ne, len(self.col_P), n))
        lift[:, :, self.col_u] = pu
        tau_blk = np.zeros((ne, n, n))
        load = np.zeros((ne, n))
        rule = interval_rule(self.facet_degree)
        marker_of = {}
        for name in self.bc.traction:
            for f in self.mesh.boundary_markers[name]:
                marker_of[int(f)] = name
        for e in range(3):
            fb = self.facet_basis(e, rule.points)
            ws = rule.weights
            a2 = fb["len"] ** 2
            Pt = np.einsum("eqa,eqpab,eqb->eqp", fb["a"], fb["P"], fb["nu"])
            ut = np.einsum("eqfa,eqa->eqf", fb["u"], fb["a"])
            cols_lam = self.col_lam[e * (k + 1):(e + 1) * (k + 1)]
            lift[:, :, self.col_u] -= np.einsum("q,eq,eqp,eqf->epf", ws, 1.0 / a2, Pt, ut)
            lift[:, :, cols_lam] += np.einsum("q,eq,eqp,qi->epi", ws, 1.0 / a2, Pt, fb["lam"])
            # stabilization on (u - u~)_t
            jump = np.zeros(ut.shape[:2] + (n,))
            jump[:, :, self.col_u] = ut
            jump[:, :, cols_lam] = -fb["lam"][None]
            tau_blk += np.einsum("e,q,eq,eqi,eqj->eij", self.tau[:, e], ws, 1.0 / fb["len"], jump, jump)
            # tractions on marked boundary facets
            facets = self.mesh.element_facets[:, e]
            for t in np.flatnonzero(self.mesh.facet_elements[facets, 1] < 0):
                name = marker_of.get(int(facets[t]))
                if name is None:
                    continue
                T = np.asarray(self.bc.traction[name](fb["X"][t]), dtype=float)
                inv = 1.0 / fb["len"][t]
                Tn = np.einsum("qa,qa->q", T, fb["nu"][t])
                Tt = np.einsum("qa,qa->q", T, fb["a"][t])
                un = np.einsum("qfa,qa->qf", fb["u"][t], fb["nu"][t])
                load[t, self.col_u] += np.einsum("q,q,qf->f", ws * inv, Tn, un)
                load[t, cols_lam] += np.einsum("q,q,qi->i", ws * inv, Tt, fb["lam"])
        if self.bc.body is not None:
            B = np.asarray(self.bc.body(v["X"].reshape(-1, 2)), dtype=float).reshape(v["X"].shape)
            load[:, self.col_u] += np.einsum("eq,eqa,eqfa->ef", w, B, v["u"])
        Kc[:, self.col_deps[:, None], self.col_P[None, :]] += fp
        Kc[:, self.col_P[:, None], self.col_deps[None, :]] += np.swapaxes(fp, 1, 2)
        Kc[:, self.col_P, :] += lift
        Kc[:, :, self.col_P] += np.swapaxes(lift, 1, 2)
        Kc += tau_blk
        self.K_const = Kc
        self.lift = lift  # P rows of <P, Grad u> - int P_tn (u - u~)_t
        self.load = load
        self.p_mass = np.einsum("eq,qi,qj->eij", w, v["p"], v["p"])

    # ------------------------------------------------------------ local state
    def initial_state(self, pressure=None):
        """Reference state ``u = 0, F = I, P = 0`` with constant pressure
        (default ``self.initial_pressure``, which is ``mu`` unless changed)."""
        dm = self.dofmap
        internal = np.zeros((self.mesh.n_elements, dm.n_internal))
        p0 = self.initial_pressure if pressure is None else pressure
        internal[:, self.col_p[0] - self.nc] = self.params.mu if p0 is None else p0
        return HybridState(np.zeros(dm.n_coupling), internal)

    def set_load(self, state, xi):
        dm = self.dofmap
        state = state.copy()
        state.coupling[dm.essential] = xi * dm.essential_values[dm.essential]
        return state

    def local_vectors(self, state):
        dm = self.dofmap
        xc = dm.elem_signs * state.coupling[dm.elem_dofs]
        return np.concatenate([xc, state.internal], axis=1)

    def fields(self, x, basis=None):
        """``F`` (flattened, ``(ne, q, 4)``) and ``p`` at quadrature points."""
        b = self.vol if basis is None else basis
        F = VEC_I + np.einsum("eqad,ed->eqa", b["E"], x[:, self.col_deps])
        p = np.einsum("qi,ei->eq", b["p"], x[:, self.col_p])
        return F, p

    def local_residual(self, x, xi=1.0):
        """Element residual vectors ``(ne, n)`` for local coefficient vectors."""
        v = self.vol
        F, p = self.fields(x)
        F2 = F.reshape(F.shape[:2] + (2, 2))
        try:
            P = piola_stress(F2, p, self.params).reshape(F.shape)
            C, _, _ = constraint(det2(F2), self.params.constraint)
        except ConstitutiveDomainError as exc:
            bad = int(np.argmax(np.any(det2(F2) <= 0, axis=1)))
            raise ConstitutiveDomainError(str(exc), element=bad) from None
        R = np.einsum("eij,ej->ei", self.K_const, x) - xi * self.load
        R[:, self.col_deps] += np.einsum("eq,eqad,eqa->ed", v["w"], v["E"], P)
        R[:, self.col_p] -= np.einsum("eq,qi,eq->ei", v["w"], v["p"], C)
        return R

    def local_tangent(self, x, use_shift=False, eps_p=None):
        """Element matrices ``(ne, n, n)``; ``eps_p`` defaults to ``1e-7 mu``."""
        v = self.vol
        eps_p = 1e-7 * self.params.mu if eps_p is None else eps_p
        F, p = self.fields(x)
        F2 = F.reshape(F.shape[:2] + (2, 2))
        A = material_tangent(F2, p, self.params)
        if use_shift:
            A, _ = shifted_tangent(A, self.params)
        _, dC, _ = constraint(det2(F2), self.params.constraint)
        K = self.K_const.copy()
        wE = v["w"][..., None, None] * v["E"]
        AE = A @ v["E"]
        nd = len(self.col_deps)
        ne, q = v["w"].shape
        Kdd = np.matmul(wE.reshape(ne, q * 4, nd).transpose(0, 2, 1), AE.reshape(ne, q * 4, nd))
        K[:, self.col_deps[:, None], self.col_deps[None, :]] += Kdd
        cofv = (dC[..., None] * cof2(F2).reshape(F.shape))
        Kdp = -np.einsum("eqad,eqa,qi->edi", wE, cofv, v["p"])
        K[:, self.col_deps[:, None], self.col_p[None, :]] += Kdp
        K[:, self.col_p[:, None], self.col_deps[None, :]] += np.swapaxes(Kdp, 1, 2)
        K[:, self.col_p[:, None], self.col_p[None, :]] -= eps_p * self.p_mass
        return K

    # ----------------------------------------------------------- global level
    def assembled_coupling_residual(self, R):
        dm = self.dofmap
        rc = np.zeros(dm.n_coupling)
        np.add.at(rc, dm.elem_dofs, dm.elem_signs * R[:, :self.nc])
        return rc

    def residual_norm(self, R):
        rc = self.assembled_coupling_residual(R)
        free = ~self.dofmap.essential
        return float(np.sqrt(np.sum(rc[free] ** 2) + np.sum(R[:, self.nc:] ** 2)))

    def assemble_condensed(self, K, rhs):
        """Condense element systems ``K x = rhs`` and assemble the coupling matrix."""
        cond = static_condense(K, rhs, self.nc)
        dm = self.dofmap
        s = dm.elem_signs
        vals = s[:, :, None] * cond.S * s[:, None, :]
        rows = np.broadcast_to(dm.elem_dofs[:, :, None], vals.shape)
        cols = np.broadcast_to(dm.elem_dofs[:, None, :], vals.shape)
        A = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(dm.n_coupling,) * 2).tocsr()
        b = np.zeros(dm.n_coupling)
        np.add.at(b, dm.elem_dofs, s * cond.rhs)
        return A, b, cond

    def volume_check(self, state, x=None):
        """Element means of ``det F`` (``J_0``)."""
        x = self.local_vectors(state) if x is None else x
        F, _ = self.fields(x)
        J = det2(F.reshape(F.shape[:2] + (2, 2)))
        w = self.vol["w"]
        return (w * J).sum(axis=1) / w.sum(axis=1)

    def essential_defect(self, state, xi):
        """Prescribed minus current values of the essential coupling DoFs."""
        dm = self.dofmap
        return xi * dm.essential_values[dm.essential] - state.coupling[dm.essential]

    def newton_system(self, state, xi, use_shift=False, eps_p=None):
        """Linearization at ``state``: returns the residual norm and a solver.

        Essential data need not be satisfied by ``state``: the increment
        carries the defect ``xi * g - u_D`` on the essential DoFs, so the
        boundary update is spread into the interior by the tangent instead
        of being concentrated in the boundary layer of elements.  The norm
        includes the defect.  Calling the returned function (optionally with
        ``use_shift`` to override the default) yields the full Newton
        increment as a :class:`HybridState`; it raises
        :class:`LinearSolveError` or :class:`CondensationError` on breakdown.
        """
        from ..solver import solve_condensed_linear

        x = self.local_vectors(state)
        R = self.local_residual(x, xi)
        defect = self.essential_defect(state, xi)
        norm = float(np.hypot(self.residual_norm(R), np.linalg.norm(defect)))

        def solve(use_shift=use_shift):
            K = self.local_tangent(x, use_shift=use_shift, eps_p=eps_p)
            A, b, cond = self.assemble_condensed(K, -R)
            dm = self.dofmap
            free, ess = dm.free, np.flatnonzero(dm.essential)
            dc = np.zeros(dm.n_coupling)
            dc[ess] = defect
            if len(free):
                rhs = b[free] - A[free][:, ess] @ defect
                dc[free] = solve_condensed_linear(A[free][:, free], rhs)
            dcl = dm.elem_signs * dc[dm.elem_dofs]
            di = cond.recover(dcl)
            return HybridState(dc, di)

        return norm, solve

    def update(self, state, inc, factor=1.0):
        return HybridState(state.coupling + factor * inc.coupling, state.internal + factor * inc.internal)


__all__ = ["HybridState", "NDTNSDiscretization", "CondensationError", "normalize_tau"]
