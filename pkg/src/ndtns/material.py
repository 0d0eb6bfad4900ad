"""Pointwise neo-Hookean kernels for incompressible elasticity.

All functions are vectorized over leading axes: ``F`` has shape
``(..., 2, 2)`` and ``p`` shape ``(...)``.  Fourth-order tensors acting on
2x2 matrices are stored as 4x4 matrices in component order
``(11, 12, 21, 22)``.
"""
from dataclasses import dataclass

import numpy as np


class ConstitutiveDomainError(ValueError):
    """Raised when a state leaves the admissible set (e.g. ``J <= 0`` for ``ln J``)."""

    def __init__(self, message, element=None):
        super().__init__(message if element is None else f"{message} (element {element})")
        self.element = element


@dataclass(frozen=True)
class MaterialParams:
    """Material constants.

    Parameters
    ----------
    mu : float
        Shear modulus.
    constraint : {"Jminus1", "logJ"}
        Volumetric constraint ``C(J)``.
    eps_lambda : float or None
        Eigenvalue floor of the shifted tangent; ``None`` means ``1e-8 * mu``.
    kappa : float or None
        Optional bulk modulus for a nearly incompressible variant (off by default).
    """

    mu: float = 1.0
    constraint: str = "Jminus1"
    eps_lambda: float | None = None
    kappa: float | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.constraint not in ("Jminus1", "logJ"):
            raise ValueError(f"unknown constraint kind {self.constraint!r}")
        if self.eps_lambda is not None and self.eps_lambda < 0:
            raise ValueError("eps_lambda must be non-negative")

    @property
    def eps_shift(self):
        return 1e-8 * self.mu if self.eps_lambda is None else self.eps_lambda


# cof is linear in 2D: vec(cof A) = K_COF @ vec(A)
K_COF = np.array([[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, -1.0, 0.0], [0.0, -1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]])


def det2(F):
    return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]


def cof2(F):
    out = np.empty_like(F)
    out[..., 0, 0] = F[..., 1, 1]
    out[..., 0, 1] = -F[..., 1, 0]
    out[..., 1, 0] = -F[..., 0, 1]
    out[..., 1, 1] = F[..., 0, 0]
    return out


_LEVI = np.zeros((3, 3, 3))
_LEVI[0, 1, 2] = _LEVI[1, 2, 0] = _LEVI[2, 0, 1] = 1.0
_LEVI[0, 2, 1] = _LEVI[2, 1, 0] = _LEVI[1, 0, 2] = -1.0


def tensor_cross(A, B):
    """Tensor cross product ``(A x B)_ij = eps_ikl eps_jmn A_km B_ln``."""
    return np.einsum("ikl,jmn,...km,...ln->...ij", _LEVI, _LEVI, A, B)


def cof_and_derivative(F, dF, dim=2):
    """Cofactor of ``F`` and its directional derivative in direction ``dF``."""
    F = np.asarray(F, dtype=float)
    dF = np.asarray(dF, dtype=float)
    if dim == 2:
        return cof2(F), cof2(dF)
    if dim == 3:
        return 0.5 * tensor_cross(F, F), tensor_cross(F, dF)
    raise ValueError("dim must be 2 or 3")


def strain_energy(F, params):
    """``W(F) = mu/2 (F:F - 2)``."""
    F = np.asarray(F, dtype=float)
    return 0.5 * params.mu * (np.einsum("...ij,...ij->...", F, F) - 2.0)


def constraint(J, kind="Jminus1"):
    """Constraint ``C(J)`` with first and second derivatives."""
    J = np.asarray(J, dtype=float)
    if kind == "Jminus1":
        return J - 1.0, np.ones_like(J), np.zeros_like(J)
    if kind == "logJ":
        if np.any(J <= 0):
            raise ConstitutiveDomainError("ln J requires J > 0")
        return np.log(J), 1.0 / J, -1.0 / J**2
    raise ValueError(f"unknown constraint kind {kind!r}")


def piola_stress(F, p, params):
    """First Piola-Kirchhoff stress ``P = mu F - p C'(J) cof F``."""
    F = np.asarray(F, dtype=float)
    _, dC, _ = constraint(det2(F), params.constraint)
    return params.mu * F - (np.asarray(p) * dC)[..., None, None] * cof2(F)


def material_tangent(F, p, params):
    """Consistent tangent ``dP/dF`` as a symmetric 4x4 matrix.

    ``A[dF] = mu dF - p (C''(J) (cof F : dF) cof F + C'(J) cof dF)``.
    """
    F = np.asarray(F, dtype=float)
    p = np.asarray(p, dtype=float)
    _, dC, ddC = constraint(det2(F), params.constraint)
    c = cof2(F).reshape(F.shape[:-2] + (4,))
    A = params.mu * np.eye(4) - (p * ddC)[..., None, None] * np.einsum("...i,...j->...ij", c, c)
    return A - (p * dC)[..., None, None] * K_COF


def shifted_tangent(A, params=None, eps_lambda=None):
    """Shift a symmetric tangent by ``lambda = max(eps, -min eig(A))``.

    Returns the shifted tangent and the shift (vectorized over leading axes).
    """
    A = np.asarray(A, dtype=float)
    eps = eps_lambda if eps_lambda is not None else (params.eps_shift if params is not None else 0.0)
    lam_min = np.linalg.eigvalsh(A)[..., 0]
    shift = np.maximum(eps, -lam_min)
    return A + shift[..., None, None] * np.eye(A.shape[-1]), shift


def lagrangian_density(F, p, params):
    """``W(F) - p C(J)``; its F-derivative is :func:`piola_stress`."""
    C, _, _ = constraint(det2(np.asarray(F, dtype=float)), params.constraint)
    return strain_energy(F, params) - np.asarray(p) * C
