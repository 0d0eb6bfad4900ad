"""Quadrature on the reference triangle and the unit interval."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def interval_rule(degree):
    """Gauss-Legendre rule on [0, 1] exact up to ``degree``."""
    n = degree // 2 + 1
    t, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(0.5 * (t + 1.0), 0.5 * w, degree)


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Collapsed Gauss-Jacobi rule on the unit triangle exact up to ``degree``.

    The square ``[0,1]^2`` is collapsed onto the triangle by
    ``(s, r) -> (s (1 - r), r)``; the Jacobian ``1 - r`` is absorbed into a
    Gauss-Jacobi rule in ``r``.
    """
    n = degree // 2 + 1
    s_t, s_w = np.polynomial.legendre.leggauss(n)
    r_t, r_w = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (s_t + 1.0)
    r = 0.5 * (r_t + 1.0)
    ws = 0.5 * s_w
    wr = 0.25 * r_w
    S, R = np.meshgrid(s, r, indexing="ij")
    W = np.outer(ws, wr)
    pts = np.column_stack([(S * (1.0 - R)).ravel(), R.ravel()])
    return QuadratureRule(pts, W.ravel(), degree)
