"""Monomial bookkeeping on the reference triangle.

Every reference basis in this package is stored as a coefficient array over
the monomials ``x**a * y**b`` with ``a + b <= degree``.  Values, gradients
and Hessians of such functions are then a single contraction.
"""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def monomial_exponents(degree):
    """Exponent pairs ``(a, b)`` ordered by total degree, then by ``b``."""
    return tuple((total - b, b) for total in range(degree + 1) for b in range(total + 1))


def n_monomials(degree):
    return (degree + 1) * (degree + 2) // 2


def monomial_index(degree):
    return {e: i for i, e in enumerate(monomial_exponents(degree))}


def _powers(x, top):
    out = np.ones((top + 1,) + x.shape)
    for i in range(1, top + 1):
        out[i] = out[i - 1] * x
    return out


def eval_monomials(degree, points, derivatives=1):
    """Evaluate all monomials up to ``degree`` at ``points`` (shape ``(n, 2)``).

    Returns ``(values, grads, hessians)`` truncated to ``derivatives + 1``
    entries; shapes ``(n, m)``, ``(n, m, 2)`` and ``(n, m, 2, 2)``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    px, py = _powers(x, degree), _powers(y, degree)
    exps = monomial_exponents(degree)
    n, m = len(pts), len(exps)

    def term(a, b, da, db):
        if a < da or b < db:
            return np.zeros(n)
        ca = np.prod(np.arange(a - da + 1, a + 1)) if da else 1.0
        cb = np.prod(np.arange(b - db + 1, b + 1)) if db else 1.0
        return ca * cb * px[a - da] * py[b - db]

    vals = np.empty((n, m))
    for j, (a, b) in enumerate(exps):
        vals[:, j] = px[a] * py[b]
    out = [vals]
    if derivatives >= 1:
        grads = np.empty((n, m, 2))
        for j, (a, b) in enumerate(exps):
            grads[:, j, 0] = term(a, b, 1, 0)
            grads[:, j, 1] = term(a, b, 0, 1)
        out.append(grads)
    if derivatives >= 2:
        hess = np.empty((n, m, 2, 2))
        for j, (a, b) in enumerate(exps):
            hess[:, j, 0, 0] = term(a, b, 2, 0)
            hess[:, j, 1, 1] = term(a, b, 0, 2)
            hess[:, j, 0, 1] = hess[:, j, 1, 0] = term(a, b, 1, 1)
        out.append(hess)
    return tuple(out)


def lattice_points(degree):
    """Equispaced points on the reference triangle, unisolvent for P^degree."""
    if degree == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]])
    return np.array(
        [[i / degree, j / degree] for j in range(degree + 1) for i in range(degree + 1 - j)]
    )


def fit_monomials(degree, func):
    """Monomial coefficients of a polynomial given as a callable.

    ``func`` maps ``(n, 2)`` points to ``(n, ...)`` values; the result has
    shape ``(..., m)``.  Exact for polynomial inputs of at most ``degree``.
    """
    pts = lattice_points(degree)
    vander = eval_monomials(degree, pts, derivatives=0)[0]
    vals = np.asarray(func(pts), dtype=float)
    flat = vals.reshape(len(pts), -1)
    coef = np.linalg.solve(vander, flat)
    return np.moveaxis(coef.reshape((len(pts),) + vals.shape[1:]), 0, -1)


def shifted_legendre(n, s):
    """Legendre polynomials ``P_0..P_n`` on ``[0, 1]``; shape ``(len(s), n+1)``."""
    t = 2.0 * np.asarray(s, dtype=float) - 1.0
    out = np.empty(t.shape + (n + 1,))
    out[..., 0] = 1.0
    if n >= 1:
        out[..., 1] = t
    for i in range(1, n):
        out[..., i + 1] = ((2 * i + 1) * t * out[..., i] - i * out[..., i - 1]) / (i + 1)
    return out


def barycentric(points):
    pts = np.atleast_2d(points)
    return np.stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]], axis=-1)
