"""Non-hybridized (conforming) assembly with tangential-normal continuous stresses.

Here the facet functions of the stress space carry global DoFs shared by
the two neighbouring elements, so ``P_tn`` is continuous by construction
and no facet multiplier is needed.  The global system is a saddle-point
problem; it serves as the reference for the hybridized discretization and
as the basis of the small-strain system.

Global vector layout: normal displacement moments (one block of ``k + 1``
per facet), stress facet moments (same shape), then element-local blocks.
"""
import numpy as np
import scipy.sparse as sp

from ..elements.quadrature import interval_rule
from ..geometry import facet_geometry
from ..elements.polynomials import shifted_legendre
from ..material import det2


def sigma_reversal_signs(k):
    """Signs of shared stress facet DoFs seen from the second element.

    The tangential-normal trace built from unnormalized tangent and normal is
    orientation independent, only the Legendre factor changes parity.
    """
    return np.array([(-1.0) ** i for i in range(k + 1)])


class ConformingNumbering:
    """Global indices and signs for a local layout ``[u_F | rest]``.

    Parameters
    ----------
    mesh : Triangulation
    k : int
    u_cols : (3 (k+1),) int
        Local columns of the normal displacement moments (edge-major).
    sigma_facet_cols : (3 (k+1),) int
        Local columns of the stress facet functions (edge-major).
    local_cols : int array
        Remaining local columns, numbered element by element.
    n_extra : int
        Number of global scalar unknowns appended at the end.
    """

    def __init__(self, mesh, k, u_cols, sigma_facet_cols, local_cols, n_extra=0):
        nfd = k + 1
        ne = mesh.n_elements
        self.nu = mesh.n_facets * nfd
        ncols = len(u_cols) + len(sigma_facet_cols) + len(local_cols)
        gidx = np.empty((ne, ncols), dtype=np.int64)
        gsign = np.ones((ne, ncols))
        order = np.concatenate([u_cols, sigma_facet_cols, local_cols])
        rev_u = np.array([(-1.0) ** (i + 1) for i in range(nfd)])
        rev_s = sigma_reversal_signs(k)
        idx = np.arange(nfd)
        pos = {c: j for j, c in enumerate(order)}
        for e in range(3):
            f = mesh.element_facets[:, e][:, None]
            pos_el = mesh.element_signs[:, e][:, None] > 0
            for cols, off, rev in ((u_cols, 0, rev_u), (sigma_facet_cols, self.nu, rev_s)):
                js = [pos[c] for c in cols[e * nfd:(e + 1) * nfd]]
                gidx[:, js] = off + f * nfd + idx
                gsign[:, js] = np.where(pos_el, 1.0, rev[None, :])
        nl = len(local_cols)
        js = [pos[c] for c in local_cols]
        gidx[:, js] = 2 * self.nu + np.arange(ne)[:, None] * nl + np.arange(nl)
        self.order = order
        self.gidx = gidx
        self.gsign = gsign
        self.n_local_block = nl
        self.n_extra = n_extra
        self.n = 2 * self.nu + ne * nl + n_extra

    def gather(self, x):
        """Local coefficient vectors (columns in ``self.order``)."""
        return self.gsign * x[self.gidx]

    def scatter(self, R):
        r = np.zeros(self.n)
        np.add.at(r, self.gidx, self.gsign * R)
        return r

    def assemble(self, K):
        s = self.gsign
        vals = s[:, :, None] * K * s[:, None, :]
        rows = np.broadcast_to(self.gidx[:, :, None], vals.shape).ravel()
        cols = np.broadcast_to(self.gidx[:, None, :], vals.shape).ravel()
        return sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(self.n, self.n)).tocsr()


def traction_tn_moments(mesh, facet, func, k):
    """Stress facet DoF values for ``P n = T`` on a boundary facet:
    ``int_0^1 |X'| (X' . T) q_i ds``."""
    rule = interval_rule(2 * k + 8)
    X, tang = facet_geometry(mesh, facet, rule.points)
    T = np.zeros_like(X) if func is None else np.asarray(func(X), dtype=float)
    g = np.linalg.norm(tang, axis=1) * np.einsum("pc,pc->p", tang, T)
    return np.einsum("p,pi,p->i", rule.weights, shifted_legendre(k, rule.points), g)


def stress_essential(mesh, k, bc, nu, xi=1.0):
    """Essential stress facet values on boundary facets without prescribed
    tangential displacement (``P_tn = T_t`` there)."""
    nfd = k + 1
    fixed = np.zeros(nu, dtype=bool)
    values = np.zeros(nu)
    tang = set()
    for name in bc.tangential:
        tang.update(int(f) for f in mesh.boundary_markers[name])
    traction_of = {}
    for name, func in bc.traction.items():
        for f in mesh.boundary_markers[name]:
            traction_of[int(f)] = func
    for f in mesh.boundary_facets:
        if int(f) in tang:
            continue
        sl = slice(int(f) * nfd, (int(f) + 1) * nfd)
        fixed[sl] = True
        func = traction_of.get(int(f))
        if func is not None:
            values[sl] = xi * traction_tn_moments(mesh, int(f), func, k)
    return fixed, values


class MonolithicNDTNS:
    """Conforming NDTNS saddle-point system built from the hybrid element kernels.

    ``disc`` must use the full layout and ``tau = 0``; the facet field is not
    an unknown (it only carries prescribed tangential displacements).
    Follows the solver protocol (``initial_state``, ``newton_system``,
    ``update``, ``volume_check``); the state is a global vector.
    """

    def __init__(self, disc):
        if disc.reduced:
            raise ValueError("the conforming system needs the full (unreduced) layout")
        if np.any(disc.tau != 0):
            raise ValueError("the conforming system has no facet stabilization (tau must be 0)")
        self.disc = disc
        k = disc.k
        dm = disc.dofmap
        sig_tags = disc.sigma.tags
        facet_P = np.array([c for c, t in zip(disc.col_P, sig_tags) if t["kind"] == "facet"])
        # facet functions are edge-major in the sigma basis
        self._keep = np.setdiff1d(np.arange(disc.n), disc.col_lam)
        u_cols = np.arange(disc.nuf)
        rest = np.setdiff1d(self._keep, np.concatenate([u_cols, facet_P]))
        self.numbering = ConformingNumbering(disc.mesh, k, u_cols, facet_P, rest)
        num = self.numbering
        nu = num.nu
        fixed = np.zeros(num.n, dtype=bool)
        values = np.zeros(num.n)
        fixed[:nu] = dm.essential[:nu]
        values[:nu] = dm.essential_values[:nu]
        sfix, sval = stress_essential(disc.mesh, k, disc.bc, nu)
        fixed[nu:2 * nu] = sfix
        values[nu:2 * nu] = sval
        self.essential = fixed
        self.essential_values = values
        self.free = np.flatnonzero(~fixed)
        # prescribed tangential displacement enters through the facet field
        lam = np.zeros(dm.n_coupling)
        lam[dm.essential] = dm.essential_values[dm.essential]
        lam[:nu] = 0.0
        self._lam_local = (dm.elem_signs * lam[dm.elem_dofs])[:, disc.col_lam]

    # ----------------------------------------------------------- conversions
    def local_vectors(self, x, xi=1.0):
        disc = self.disc
        xl = np.zeros((disc.mesh.n_elements, disc.n))
        xl[:, self.numbering.order] = self.numbering.gather(x)
        xl[:, disc.col_lam] = xi * self._lam_local
        return xl

    def initial_state(self):
        """``u = 0, F = I, P = 0`` and ``p = mu`` (stress free)."""
        x = np.zeros(self.numbering.n)
        pos = int(np.flatnonzero(self.numbering.order == self.disc.col_p[0])[0])
        x[self.numbering.gidx[:, pos]] = self.disc.params.mu
        return x

    # ------------------------------------------------------- solver protocol
    def residual(self, x, xi=1.0):
        R = self.disc.local_residual(self.local_vectors(x, xi), xi)
        return self.numbering.scatter(R[:, self.numbering.order])

    def tangent(self, x, xi=1.0, eps_p=None, use_shift=False):
        K = self.disc.local_tangent(self.local_vectors(x, xi), use_shift=use_shift, eps_p=eps_p)
        o = self.numbering.order
        return self.numbering.assemble(K[:, o[:, None], o[None, :]])

    def newton_system(self, state, xi, use_shift=False, eps_p=None):
        from ..solver import solve_condensed_linear

        r = self.residual(state, xi)
        ess = np.flatnonzero(self.essential)
        defect = xi * self.essential_values[ess] - state[ess]
        norm = float(np.hypot(np.linalg.norm(r[self.free]), np.linalg.norm(defect)))

        def solve(use_shift=use_shift):
            A = self.tangent(state, xi, eps_p, use_shift)
            dx = np.zeros_like(state)
            dx[ess] = defect
            rhs = -r[self.free] - A[self.free][:, ess] @ defect
            dx[self.free] = solve_condensed_linear(A[self.free][:, self.free], rhs)
            return dx

        return norm, solve

    def update(self, state, inc, factor=1.0):
        return state + factor * inc

    def volume_check(self, state):
        disc = self.disc
        F, _ = disc.fields(self.local_vectors(state))
        J = det2(F.reshape(F.shape[:2] + (2, 2)))
        w = disc.vol["w"]
        return (w * J).sum(axis=1) / w.sum(axis=1)


__all__ = [
    "ConformingNumbering", "MonolithicNDTNS", "sigma_reversal_signs", "stress_essential",
    "traction_tn_moments",
]
