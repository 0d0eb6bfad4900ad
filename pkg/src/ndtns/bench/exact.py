"""Closed-form solution of the plane-strain inflation of a thick cylinder."""
import numpy as np

from ..material import cof2


def _radius(R, gamma, r_out):
    return np.sqrt(R**2 + (gamma**2 - 1.0) * r_out**2)


def exact_inflation_2d(X, gamma=2.0, r_out=1.0, mu=1.0, r_in=0.5):
    """Displacement, pressure, deformation gradient and stress at ``X``.

    The cylinder is inflated so that the outer radius ``r_out`` maps to
    ``gamma * r_out``; the inner surface is traction free.

    Parameters
    ----------
    X : (n, 2) array
        Reference points.

    Returns
    -------
    u : (n, 2), p : (n,), F : (n, 2, 2), P : (n, 2, 2)
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    R = np.linalg.norm(X, axis=1)
    if np.any(R == 0):
        raise ValueError("the inflation solution is singular at R = 0")
    r = _radius(R, gamma, r_out)
    r_i = _radius(r_in, gamma, r_out)
    u = (r / R - 1.0)[:, None] * X
    F = (r / R)[:, None, None] * np.eye(2) + ((R**2 - r**2) / (r * R**3))[:, None, None] * np.einsum(
        "pi,pj->pij", X, X
    )
    p = (
        mu * R**2 / r**2
        - 0.5 * mu * (gamma**2 - 1.0) * r_out**2 * (1.0 / r_i**2 - 1.0 / r**2)
        + mu * np.log(r * r_in / (R * r_i))
    )
    P = mu * F - p[:, None, None] * cof2(F)
    return u, p, F, P
