"""Linear (small-strain) mixed stress system with weakly imposed stress symmetry.

Unknowns: displacement ``u`` (normal continuous), stress ``sigma``
(tangential-normal continuous), symmetric strain ``eps``, skew multiplier
``omega`` (one degree lower) and pressure ``p``.  The system is the
stationarity condition of

.. math::

    \\int_\\Omega \\tfrac12 \\mathbb{C}\\varepsilon:\\varepsilon
        + \\sigma:\\varepsilon - p\\,\\mathrm{tr}\\,\\varepsilon + \\omega:\\sigma
        - \\langle \\sigma, \\nabla u\\rangle - B\\cdot u

with ``C eps = 2 mu dev eps``.  ``u = 0`` is imposed on the whole boundary
(normal part essentially, tangential part naturally through the pairing);
the pressure is fixed by a zero-mean constraint.  For a gradient load
``B = Grad Psi`` the discrete solution is ``u = 0``, ``p = sigma_sph =
Pi Psi`` (pressure robustness).
"""
from dataclasses import replace

import numpy as np
import scipy.sparse.linalg as spla

from ..elements.dofmap import BoundaryConditions
from ..elements.quadrature import triangle_rule
from ..elements.reference import l2_basis
from ..material import MaterialParams
from .monolithic import ConformingNumbering
from .ndtns import NDTNSDiscretization

SYM_UNITS = np.array([[[1.0, 0.0], [0.0, 0.0]],
                      [[0.0, 0.0], [0.0, 1.0]],
                      [[0.0, 1.0], [1.0, 0.0]]]) / np.array([1.0, 1.0, np.sqrt(2.0)])[:, None, None]
SKEW_UNIT = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _dev(A):
    return A - 0.5 * np.trace(A, axis1=-2, axis2=-1)[..., None, None] * np.eye(2)


def small_strain_element(basis, omega_basis, lift, mu):
    """Element matrices of the small-strain system.

    Parameters
    ----------
    basis : dict
        Volume basis of :meth:`NDTNSDiscretization.volume_basis` (full layout).
    omega_basis : (q, n_omega) array
        Scalar basis of the skew multiplier at the volume points.
    lift : (ne, n_sigma, n_u) array
        Pairing ``<sigma, Grad u>`` rows for the displacement columns.
    mu : float

    Returns
    -------
    K : (ne, n, n) array
        Symmetric element matrices in the local order ``(u, sigma, eps,
        omega, p)``.
    sizes : dict
        Block sizes.
    """
    w = basis["w"]
    ne, q = w.shape
    pb = basis["p"]
    eps = np.einsum("sab,qi->qsiab", SYM_UNITS, pb).reshape(q, -1, 2, 2)
    om = np.einsum("ab,qi->qiab", SKEW_UNIT, omega_basis)
    sig = basis["P"]
    nu, ns, nE, nO, npr = lift.shape[2], sig.shape[2], eps.shape[1], om.shape[1], pb.shape[1]
    off = np.cumsum([0, nu, ns, nE, nO, npr])
    bu, bs, bE, bO, bp = (slice(off[i], off[i + 1]) for i in range(5))
    K = np.zeros((ne, off[-1], off[-1]))
    K[:, bE, bE] = 2.0 * mu * np.einsum("eq,qiab,qjab->eij", w, _dev(eps), _dev(eps))
    es = np.einsum("eq,qiab,eqjab->eij", w, eps, sig)
    K[:, bE, bs], K[:, bs, bE] = es, np.swapaxes(es, 1, 2)
    ep = -np.einsum("eq,qiaa,qj->eij", w, eps, pb)
    K[:, bE, bp], K[:, bp, bE] = ep, np.swapaxes(ep, 1, 2)
    os_ = np.einsum("eq,qiab,eqjab->eij", w, om, sig)
    K[:, bO, bs], K[:, bs, bO] = os_, np.swapaxes(os_, 1, 2)
    K[:, bs, bu], K[:, bu, bs] = -lift, -np.swapaxes(lift, 1, 2)
    return K, {"u": nu, "sigma": ns, "eps": nE, "omega": nO, "p": npr}


class SmallStrainMCS:
    """Assembled small-strain system on a triangulation.

    Parameters
    ----------
    mesh : Triangulation
    k : int
    mu : float
    body : callable, optional
        ``B(X)`` for ``(n, 2)`` points.
    """

    def __init__(self, mesh, k=2, mu=1.0, body=None):
        marker = "__boundary__"
        markers = dict(mesh.boundary_markers)
        markers[marker] = mesh.boundary_facets
        mesh = replace(mesh, boundary_markers=markers)
        self.mesh, self.k, self.mu = mesh, k, mu
        bc = BoundaryConditions(normal={marker: None}, tangential={marker: None}, body=body)
        disc = NDTNSDiscretization(mesh, k, MaterialParams(mu=mu), bc, tau=0.0, reduced=False)
        self.disc = disc
        rule = triangle_rule(disc.volume_degree)
        lift = disc.lift[:, :, disc.col_u]
        K, sizes = small_strain_element(disc.vol, l2_basis(k - 1).eval(rule.points, derivatives=0), lift, mu)
        self.sizes = sizes
        ns = sizes["sigma"]
        facet_sig = np.array([j for j, t in enumerate(disc.sigma.tags) if t["kind"] == "facet"])
        nuf = disc.nuf
        n_u = sizes["u"]
        u_cols = np.arange(nuf)
        sig_cols = n_u + facet_sig
        rest = np.setdiff1d(np.arange(K.shape[1]), np.concatenate([u_cols, sig_cols]))
        num = ConformingNumbering(mesh, k, u_cols, sig_cols, rest, n_extra=1)
        self.numbering = num
        o = num.order
        A = num.assemble(K[:, o[:, None], o[None, :]]).tolil()
        # zero-mean pressure multiplier
        p0 = n_u + ns + sizes["eps"] + sizes["omega"]
        pcols = np.arange(p0, p0 + sizes["p"])
        pos = {c: j for j, c in enumerate(o)}
        mean = np.einsum("eq,qi->ei", disc.vol["w"], disc.vol["p"])
        gp = num.gidx[:, [pos[c] for c in pcols]]
        lam = num.n - 1
        for g, m in zip(gp.ravel(), mean.ravel()):
            A[lam, g] += m
            A[g, lam] += m
        self.matrix = A.tocsr()
        load = np.zeros((mesh.n_elements, K.shape[1]))
        load[:, :n_u] = disc.load[:, disc.col_u]
        self.rhs = num.scatter(load[:, o])
        self.cols = {"u": np.arange(n_u), "sigma": np.arange(n_u, n_u + ns), "p": pcols}
        self.free = np.flatnonzero(~np.r_[disc.dofmap.essential[:num.nu], np.zeros(num.n - num.nu, bool)])

    def solve(self):
        """Solve the linear system; returns local coefficient vectors."""
        A = self.matrix[self.free][:, self.free]
        x = np.zeros(self.numbering.n)
        x[self.free] = spla.spsolve(A.tocsc(), self.rhs[self.free])
        self.solution = x
        xl = np.zeros((self.mesh.n_elements, len(self.numbering.order)))
        xl[:, self.numbering.order] = self.numbering.gather(x)
        return xl

    def residual(self, x):
        return self.matrix @ x - self.rhs

    # ------------------------------------------------------------- fields
    def fields(self, xl):
        """Displacement, stress and pressure at the volume quadrature points."""
        v = self.disc.vol
        u = np.einsum("eqfa,ef->eqa", v["u"], xl[:, self.cols["u"]])
        sig = np.einsum("eqfab,ef->eqab", v["P"], xl[:, self.cols["sigma"]])
        p = np.einsum("qi,ei->eq", v["p"], xl[:, self.cols["p"]])
        return u, sig, p

    def projection(self, func):
        """Element-wise L2 projection of a scalar ``func(X)`` onto the pressure space."""
        v = self.disc.vol
        M = np.einsum("eq,qi,qj->eij", v["w"], v["p"], v["p"])
        f = np.asarray(func(v["X"].reshape(-1, 2)), dtype=float).reshape(v["w"].shape)
        c = np.linalg.solve(M, np.einsum("eq,qi,eq->ei", v["w"], v["p"], f)[..., None])[..., 0]
        return np.einsum("qi,ei->eq", v["p"], c)


def pressure_robustness(mesh, k=2, mu=1.0, psi=None, grad_psi=None):
    """Solve with ``B = Grad Psi`` and report ``(|u_h|, |p_h - Pi Psi|, |sigma_h - Pi Psi I|)``.

    ``psi`` must have zero mean over the domain.
    """
    model = SmallStrainMCS(mesh, k, mu, body=grad_psi)
    xl = model.solve()
    u, sig, p = model.fields(xl)
    w = model.disc.vol["w"]
    Pp = model.projection(psi) if psi is not None else np.zeros_like(p)

    def nrm(a):
        return float(np.sqrt(np.einsum("eq,eq->", w, (a ** 2).reshape(w.shape + (-1,)).sum(axis=-1))))

    return nrm(u), nrm(p - Pp), nrm(sig - Pp[..., None, None] * np.eye(2))


__all__ = ["SmallStrainMCS", "pressure_robustness", "small_strain_element"]
