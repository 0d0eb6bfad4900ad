"""Reference-triangle bases for the displacement, stress, strain, facet and
scalar spaces.

Reference triangle: vertices ``(0,0), (1,0), (0,1)``.  Local edge ``e`` is
``(v[e+1], v[e+2])`` traversed counter-clockwise, so the rotated edge vector
``nu = (e_y, -e_x)`` is the outward (unnormalized) normal.  Facet moments
are taken against shifted Legendre polynomials in the edge parameter
``s in [0, 1]``; all facet quantities use the unnormalized tangent/normal so
that they are invariant under the Piola/covariant maps.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import null_space

from .polynomials import (
    barycentric,
    eval_monomials,
    fit_monomials,
    monomial_exponents,
    monomial_index,
    n_monomials,
    shifted_legendre,
)
from .quadrature import interval_rule, triangle_rule

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REF_EDGES = ((1, 2), (2, 0), (0, 1))
SUPPORTED_ORDERS = (1, 2)


class UnsupportedOrderError(ValueError):
    pass


def _check_order(k):
    if k not in SUPPORTED_ORDERS:
        raise UnsupportedOrderError(f"polynomial order {k} not supported; use one of {SUPPORTED_ORDERS}")


def edge_vectors(e):
    """Unnormalized tangent and outward normal of reference edge ``e``."""
    a, b = REF_EDGES[e]
    t = REF_VERTICES[b] - REF_VERTICES[a]
    return t, np.array([t[1], -t[0]])


def edge_points(e, s):
    a, b = REF_EDGES[e]
    s = np.asarray(s, dtype=float)[:, None]
    return (1.0 - s) * REF_VERTICES[a] + s * REF_VERTICES[b]


@dataclass
class PolyBasis:
    """Polynomial functions on the reference triangle.

    ``coef`` has shape ``(nfun, *value_shape, nmon)`` over the monomials of
    ``degree``; ``tags`` carries one dict per function.
    """

    degree: int
    coef: np.ndarray
    tags: list = field(default_factory=list)

    @property
    def size(self):
        return self.coef.shape[0]

    @property
    def value_shape(self):
        return self.coef.shape[1:-1]

    def eval(self, points, derivatives=1):
        mon = eval_monomials(self.degree, points, derivatives)
        vals = np.einsum("f...m,pm->pf...", self.coef, mon[0])
        if derivatives == 0:
            return vals
        grads = np.einsum("f...m,pmd->pf...d", self.coef, mon[1])
        return vals, grads

    def transposed(self):
        if len(self.value_shape) != 2:
            raise ValueError("transpose needs matrix-valued functions")
        return PolyBasis(self.degree, np.swapaxes(self.coef, 1, 2).copy(), [dict(t) for t in self.tags])

    def subset(self, mask):
        idx = np.flatnonzero(mask)
        return PolyBasis(self.degree, self.coef[idx], [self.tags[i] for i in idx])


def _pad(coef, degree_from, degree_to):
    """Re-express monomial coefficients on a larger monomial set."""
    if degree_from == degree_to:
        return coef
    idx = monomial_index(degree_to)
    out = np.zeros(coef.shape[:-1] + (n_monomials(degree_to),))
    for j, e in enumerate(monomial_exponents(degree_from)):
        out[..., idx[e]] = coef[..., j]
    return out


def _facet_moments(basis, k, kind):
    """Facet moment functionals applied to ``basis``.

    kind ``"normal"`` uses ``v . nu``; ``"tn"`` uses ``t^T P nu``.
    Returns shape ``(3 * (k+1), nfun)`` ordered edge-major.
    """
    rule = interval_rule(2 * k + 2 * basis.degree + 2)
    leg = shifted_legendre(k, rule.points)
    rows = []
    for e in range(3):
        t, nu = edge_vectors(e)
        vals = basis.eval(edge_points(e, rule.points), derivatives=0)
        if kind == "normal":
            trace = vals @ nu
        else:
            trace = np.einsum("i,pfij,j->pf", t, vals, nu)
        rows.append(np.einsum("p,pi,pf->if", rule.weights, leg, trace))
    return np.concatenate(rows, axis=0)


@lru_cache(maxsize=None)
def rt_basis(k):
    """Raviart-Thomas space ``P^k + x P~^k`` with facet-moment DoFs first.

    Facet DoF ``(e, i)``: ``int_0^1 u . nu_e q_i ds``; interior DoFs:
    ``int_T u_c m`` for monomials ``m`` of degree ``<= k-1``.  The returned
    basis is dual to these functionals.
    """
    _check_order(k)
    deg = k + 1
    idx = monomial_index(deg)
    raw = []
    for a, b in monomial_exponents(k):
        for c in range(2):
            co = np.zeros((2, n_monomials(deg)))
            co[c, idx[(a, b)]] = 1.0
            raw.append(co)
    for a, b in monomial_exponents(k):
        if a + b != k:
            continue
        co = np.zeros((2, n_monomials(deg)))
        co[0, idx[(a + 1, b)]] = 1.0
        co[1, idx[(a, b + 1)]] = 1.0
        raw.append(co)
    raw = PolyBasis(deg, np.array(raw))
    dofs = rt_dof_functionals(k, raw)
    coef = np.einsum("rj,r...->j...", np.linalg.inv(dofs), raw.coef)
    nf = 3 * (k + 1)
    tags = [{"kind": "facet", "edge": i // (k + 1), "index": i % (k + 1)} for i in range(nf)]
    tags += [{"kind": "interior"} for _ in range(coef.shape[0] - nf)]
    return PolyBasis(deg, coef, tags)


def rt_dof_functionals(k, basis):
    """DoF-functional matrix ``D[i, j] = dof_i(basis_j)`` of the RT element."""
    facet = _facet_moments(basis, k, "normal")
    if k == 0:
        return facet
    rule = triangle_rule(2 * k + 2)
    vals = basis.eval(rule.points, derivatives=0)
    mon = eval_monomials(k - 1, rule.points, derivatives=0)[0]
    interior = np.einsum("p,pm,pfc->mcf", rule.weights, mon, vals).reshape(-1, basis.size)
    return np.concatenate([facet, interior], axis=0)


def eval_rt_basis(k, points):
    """RT basis values ``(npts, nfun, 2)`` and divergences ``(npts, nfun)``."""
    vals, grads = rt_basis(k).eval(points)
    return vals, np.einsum("pfii->pf", grads)


_DEV_UNITS = np.array([[[1.0, 0.0], [0.0, -1.0]], [[0.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]])


def _edge_dyads():
    """Constant trace-free matrices ``S_e`` with ``t_f^T S_e nu_f = delta_ef``."""
    fm = np.array([[t @ D @ nu for D in _DEV_UNITS] for t, nu in map(edge_vectors, range(3))])
    return np.einsum("je,jab->eab", np.linalg.inv(fm), _DEV_UNITS)


@lru_cache(maxsize=None)
def sigma_basis(k):
    """Tangential-normal continuous matrix space ``P^k(T, R^{2x2})``.

    Order: facet functions (edge-major, trace-free dyads times Legendre in
    the barycentric edge coordinate), trace-free interior functions (zero
    tangential-normal trace on every edge), spherical functions ``m(x) I``.
    """
    _check_order(k)
    nm = n_monomials(k)
    dyads = _edge_dyads()
    funcs, tags = [], []
    for e, (_, b) in enumerate(REF_EDGES):
        for i in range(k + 1):
            scal = fit_monomials(k, lambda p, i=i, b=b: (2 * i + 1) * shifted_legendre(k, barycentric(p)[:, b])[:, i])
            funcs.append(dyads[e][:, :, None] * scal)
            tags.append({"kind": "facet", "edge": e, "index": i, "deviatoric": True, "spherical": False})
    raw_dev = np.array([D[:, :, None] * np.eye(nm)[j] for j in range(nm) for D in _DEV_UNITS])
    facet_fun = _facet_moments(PolyBasis(k, raw_dev), k, "tn")
    ns = null_space(facet_fun)
    for col in ns.T:
        funcs.append(np.einsum("r,rabm->abm", col, raw_dev))
        tags.append({"kind": "interior", "deviatoric": True, "spherical": False})
    for j in range(nm):
        funcs.append(np.eye(2)[:, :, None] * np.eye(nm)[j])
        tags.append({"kind": "interior", "deviatoric": False, "spherical": True})
    return PolyBasis(k, np.array(funcs), tags)


def sigma_tn_moments(k, basis=None):
    """Tangential-normal facet functionals applied to the sigma basis."""
    basis = sigma_basis(k) if basis is None else basis
    return _facet_moments(basis, k, "tn")


def eval_sigma_basis(k, points):
    """Sigma basis values ``(npts, nfun, 2, 2)`` together with the tags."""
    basis = sigma_basis(k)
    return basis.eval(points, derivatives=0), basis.tags


def lambda_trace(k, s):
    """Scalar traces ``u~ . dX/ds`` of the facet basis; shape ``(len(s), k+1)``.

    Dual to the moments ``int_0^1 (u~ . dX/ds) q_i ds``.
    """
    _check_order(k)
    return shifted_legendre(k, s) * (2 * np.arange(k + 1) + 1.0)


def eval_lambda_basis(k, s, edge=2):
    """Facet basis as tangential vectors on reference edge ``edge``.

    Returns ``(len(s), k+1, 2)``; every function is parallel to the edge.
    """
    t, _ = edge_vectors(edge)
    return lambda_trace(k, s)[:, :, None] * (t / (t @ t))


@lru_cache(maxsize=None)
def l2_basis(k):
    """Scalar monomial basis of ``P^k`` (pressure, skew multiplier)."""
    return PolyBasis(k, np.eye(n_monomials(k))[:, None, :][:, 0, :], [{"kind": "interior"}] * n_monomials(k))


@lru_cache(maxsize=None)
def lagrange_basis(k, bubble=False):
    """Nodal Lagrange basis: vertices, then edge nodes (edge-major), then bubble."""
    if k not in (1, 2, 3):
        raise UnsupportedOrderError(f"Lagrange order {k} not supported")
    deg = 3 if bubble else k
    nodes = [REF_VERTICES[i] for i in range(3)]
    for e in range(3):
        for j in range(1, k):
            nodes.append(edge_points(e, [j / k])[0])
    if k == 3:
        nodes.append(np.array([1.0, 1.0]) / 3.0)
    nodes = np.array(nodes)
    vander = eval_monomials(k, nodes, derivatives=0)[0]
    coef = np.linalg.inv(vander).T
    coef = _pad(coef, k, deg)
    tags = [{"kind": "vertex", "vertex": i} for i in range(3)]
    tags += [{"kind": "edge", "edge": e, "index": j} for e in range(3) for j in range(k - 1)]
    if k == 3:
        tags.append({"kind": "interior"})
    if bubble:
        b = fit_monomials(3, lambda p: 27.0 * np.prod(barycentric(p), axis=1))
        # keep the nodal functions nodal: subtract their value at the centroid times the bubble
        cvals = eval_monomials(deg, np.array([[1 / 3, 1 / 3]]), derivatives=0)[0][0] @ coef.T
        coef = np.vstack([coef - np.outer(cvals, b), b])
        tags.append({"kind": "bubble"})
    return PolyBasis(deg, coef, tags)


@lru_cache(maxsize=None)
def p2_geometry_basis():
    """Quadratic geometry shape functions in node order v0, v1, v2, m0, m1, m2
    where ``m_e`` is the midpoint (control point) of edge ``e``."""
    return lagrange_basis(2)


def geometry_shape(points):
    """Values, gradients and Hessians of the quadratic geometry basis."""
    basis = p2_geometry_basis()
    mon = eval_monomials(2, points, derivatives=2)
    vals = mon[0] @ basis.coef.T
    grads = np.einsum("fm,pmd->pfd", basis.coef, mon[1])
    hess = np.einsum("fm,pmde->pfde", basis.coef, mon[2])
    return vals, grads, hess
