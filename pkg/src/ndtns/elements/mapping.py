"""Reference-to-physical transformations of the finite element spaces.

``G`` is the Jacobian ``dX/dx`` of the element map with shape ``(n, 2, 2)``;
reference values carry the point axis first and the function axis second,
e.g. ``(n, nfun, 2)`` for vectors and ``(n, nfun, 2, 2)`` for matrices.
"""
from dataclasses import dataclass

import numpy as np

SPACE_KINDS = ("RT", "SigmaTN", "SigmaDC", "FGrad", "LambdaFacet", "L2Scalar", "LagrangeH1", "L2VectorBubble")


@dataclass(frozen=True)
class SpaceSpec:
    kind: str
    order: int
    deviatoric_only: bool = False

    def __post_init__(self):
        if self.kind not in SPACE_KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")


class SingularMapError(ValueError):
    pass


def _det_inv(G):
    G = np.asarray(G, dtype=float)
    det = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
    if np.any(det <= 0):
        raise SingularMapError("push-forward needs det G > 0")
    inv = np.empty_like(G)
    inv[..., 0, 0] = G[..., 1, 1]
    inv[..., 1, 1] = G[..., 0, 0]
    inv[..., 0, 1] = -G[..., 0, 1]
    inv[..., 1, 0] = -G[..., 1, 0]
    return det, inv / det[..., None, None]


def push_forward(space, G, ref_values, tangent=None):
    """Map reference values to the physical element.

    Parameters
    ----------
    space : SpaceSpec or str
        Space kind.
    G : (n, 2, 2) array
        Jacobian at each point.
    ref_values : array
        Reference values ``(n, nfun, ...)``.
    tangent : (n, 2) array, optional
        For ``LambdaFacet`` only: physical facet tangent; if given, the
        covariant image is projected onto it, which removes the normal part.
    """
    kind = space.kind if isinstance(space, SpaceSpec) else space
    det, Ginv = _det_inv(G)
    G = np.asarray(G, dtype=float)
    v = np.asarray(ref_values, dtype=float)
    if kind in ("RT", "L2VectorBubble"):
        if kind == "L2VectorBubble":
            return v
        return np.einsum("pij,pfj->pfi", G, v) / det[:, None, None]
    if kind in ("SigmaTN", "SigmaDC"):
        return np.einsum("pki,pfkl,pjl->pfij", Ginv, v, G) / det[:, None, None, None]
    if kind == "FGrad":
        return np.einsum("pik,pfkl,plj->pfij", G, v, Ginv) / det[:, None, None, None]
    if kind == "LambdaFacet":
        out = np.einsum("pji,pfj->pfi", Ginv, v)
        if tangent is not None:
            t = np.asarray(tangent, dtype=float)
            t = t / np.linalg.norm(t, axis=-1, keepdims=True)
            out = np.einsum("pfi,pi->pf", out, t)[..., None] * t[:, None, :]
        return out
    if kind in ("L2Scalar", "LagrangeH1"):
        return v
    raise ValueError(f"unknown space kind {kind!r}")


def rt_divergence(G, ref_div):
    """``div u = div_ref u_ref / det G``."""
    det, _ = _det_inv(G)
    return np.asarray(ref_div) / det[:, None]


def rt_gradient(G, ref_values, ref_grads, dG=None):
    """Physical gradient of Piola-mapped vector fields.

    ``ref_grads[p, f, i, m] = d u_ref_i / d x_m``.  Without ``dG`` the map is
    taken as affine, ``Grad u = G Grad_ref(u_ref) G^{-1} / det G``; with
    ``dG[p, i, j, m] = dG_ij / dx_m`` the derivative of the Piola factor is
    included (curved elements).
    """
    det, Ginv = _det_inv(G)
    G = np.asarray(G, dtype=float)
    d_ref = np.einsum("pij,pfjm->pfim", G, ref_grads)
    if dG is not None:
        dJ = det[:, None] * np.einsum("pij,pjim->pm", Ginv, dG)
        d_ref = d_ref + np.einsum("pijm,pfj->pfim", dG, ref_values)
        d_ref = d_ref - np.einsum("pm,pij,pfj->pfim", dJ / det[:, None], G, ref_values)
    return np.einsum("pfim,pmj->pfij", d_ref, Ginv) / det[:, None, None, None]


def inverse_and_det(G):
    return _det_inv(G)
