"""Discrete duality pairing between tangential-normal continuous stresses and
normal continuous displacements.

For ``P`` with continuous ``P_tn`` and ``u`` with continuous ``u_n`` the
volume integral of ``P : Grad u`` is not defined globally; element-wise it
reads, with a single-valued tangential facet field ``u~``,

* gradient form:   ``int_T P : Grad u - int_dT P_tn (u_t - u~_t)``
* divergence form: ``-int_T Div P . u + int_dT P_nn u_n + P_tn u~_t``

The two agree element by element (integration by parts).  Summing the
gradient form over a mesh with ``u~`` equal to one of the traces gives
``sum_T int_T P:Grad u - sum_F int_F P_tn [[u_t]]``.
"""
import numpy as np

from ..elements.mapping import inverse_and_det
from ..elements.quadrature import interval_rule, triangle_rule
from ..geometry import element_geometry

FORMS = ("gradient", "divergence")


def _rot(n):
    """Tangent ``t`` with ``(t, n)`` positively oriented: ``t = (-n_y, n_x)``."""
    return np.stack([-n[..., 1], n[..., 0]], axis=-1)


def duality_pairing_element(P_values, u_values, facet_data, form="gradient"):
    """Element and facet contributions of the pairing on one element (or a
    stack of elements: every array may carry leading element axes).

    Parameters
    ----------
    P_values : dict
        ``"P"``: stress ``(..., q, 2, 2)`` at the volume points; ``"div"``:
        its divergence ``(..., q, 2)`` (divergence form only).
    u_values : dict
        ``"w"``: physical weights ``(..., q)``; ``"u"``: ``(..., q, 2)``
        (divergence form); ``"grad"``: ``(..., q, 2, 2)`` (gradient form).
    facet_data : sequence of dict
        One entry per facet with physical weights ``"w"`` ``(..., s)``,
        outward unit normal ``"n"``, traces ``"P"`` and ``"u"`` and the
        tangential facet field ``"u_hat"`` (scalar ``u~ . t``, default 0),
        where ``t = (-n_y, n_x)``.
    form : {"gradient", "divergence"}

    Returns
    -------
    element_term, facet_term : float or array over the leading axes
    """
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")
    w = u_values["w"]
    if form == "gradient":
        vol = np.einsum("...q,...qij,...qij->...", w, P_values["P"], u_values["grad"])
    else:
        vol = -np.einsum("...q,...qi,...qi->...", w, P_values["div"], u_values["u"])
    fac = 0.0
    for fd in facet_data:
        n = fd["n"]
        t = _rot(n)
        Pn = np.einsum("...qij,...qj->...qi", fd["P"], n)
        Ptn = np.einsum("...qi,...qi->...q", Pn, t)
        uh = fd.get("u_hat", 0.0)
        if form == "gradient":
            ut = np.einsum("...qi,...qi->...q", fd["u"], t)
            fac = fac - np.einsum("...q,...q->...", fd["w"], Ptn * (ut - uh))
        else:
            Pnn = np.einsum("...qi,...qi->...q", Pn, n)
            un = np.einsum("...qi,...qi->...q", fd["u"], n)
            fac = fac + np.einsum("...q,...q->...", fd["w"], Pnn * un + Ptn * uh)
    return vol, fac


# ---------------------------------------------------------------- mesh level
def stress_divergence(disc, rule):
    """Physical divergence of the stress basis, ``(ne, q, nP, 2)``.

    Only valid on affine elements, where the push-forward has constant
    Jacobian: ``Div P = d/dxi [(1/J) G^-T P^ G^T] : G^-1``.
    """
    if np.any(disc.mesh.element_is_curved()):
        raise ValueError("stress divergence is only implemented for affine elements")
    _, G, _ = element_geometry(disc.mesh, rule.points)
    det, Ginv = inverse_and_det(G)
    _, dP = disc.sigma.eval(rule.points)  # (q, f, 2, 2, d)
    return np.einsum("eq,eqia,qfijm,eqbj,eqmb->eqfa", 1.0 / det, Ginv, dP, G, Ginv)


def pairing_data(disc, x, lam=None, degree=None):
    """Quadrature data of ``P_h`` and ``u_h`` for all elements.

    ``x`` are local coefficient vectors of an :class:`NDTNSDiscretization`;
    the tangential facet field is taken from ``x`` unless ``lam`` (local
    ``(ne, 3 (k+1))`` coefficients) is given.
    """
    k = disc.k
    degree = 2 * k + 2 if degree is None else degree
    rule = triangle_rule(degree)
    b = disc.volume_basis(rule)
    xP, xu = x[:, disc.col_P], x[:, disc.col_u]
    lam = x[:, disc.col_lam] if lam is None else lam
    P_values = {"P": np.einsum("eqpij,ep->eqij", b["P"], xP)}
    if not np.any(disc.mesh.element_is_curved()):
        P_values["div"] = np.einsum("eqpa,ep->eqa", stress_divergence(disc, rule), xP)
    u_values = {
        "w": b["w"],
        "u": np.einsum("eqfa,ef->eqa", b["u"], xu),
        "grad": np.einsum("eqfab,ef->eqab", b["grad"], xu),
    }
    frule = interval_rule(degree)
    facets = []
    for e in range(3):
        fb = disc.facet_basis(e, frule.points)
        ln = fb["len"]
        lam_e = lam[:, e * (k + 1):(e + 1) * (k + 1)]
        facets.append({
            "w": frule.weights[None] * ln,
            "n": fb["nu"] / ln[..., None],
            "P": np.einsum("eqpij,ep->eqij", fb["P"], xP),
            "u": np.einsum("eqfa,ef->eqa", fb["u"], xu),
            # u~ . a / |a| with the facet functions scaled by the edge length
            "u_hat": np.einsum("qi,ei->eq", fb["lam"], lam_e) / ln,
        })
    return P_values, u_values, facets


def mesh_duality_pairing(disc, x, form="gradient", lam=None):
    """Per-element pairing contributions ``(element_terms, facet_terms)``."""
    P_values, u_values, facets = pairing_data(disc, x, lam)
    if form == "divergence" and "div" not in P_values:
        raise ValueError("the divergence form needs affine elements")
    return duality_pairing_element(P_values, u_values, facets, form)


__all__ = [
    "FORMS", "duality_pairing_element", "mesh_duality_pairing", "pairing_data", "stress_divergence",
]
