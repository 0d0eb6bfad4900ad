"""Static condensation of element systems onto their coupling unknowns.

Element systems are written as ``K x = r`` with the first ``nc`` unknowns
coupling and the rest internal.  Works on a single ``(n, n)`` matrix or a
batch ``(ne, n, n)``.
"""
from dataclasses import dataclass

import numpy as np


class CondensationError(np.linalg.LinAlgError):
    def __init__(self, element=None):
        msg = "singular internal block" + ("" if element is None else f" on element {element}")
        super().__init__(msg)
        self.element = element


@dataclass
class CondensedSystem:
    """Schur complement ``S``, condensed right-hand side and the solved
    internal columns ``K_ii^{-1} [K_ic | r_i]`` kept for back-substitution."""

    S: np.ndarray
    rhs: np.ndarray
    X_K: np.ndarray
    x_r: np.ndarray

    def recover(self, coupling_increment):
        """Internal unknowns ``K_ii^{-1} (r_i - K_ic x_c)``."""
        xc = np.asarray(coupling_increment, dtype=float)
        return self.x_r - np.einsum("...ij,...j->...i", self.X_K, xc)


def static_condense(K, r, nc):
    K = np.asarray(K, dtype=float)
    r = np.asarray(r, dtype=float)
    single = K.ndim == 2
    if single:
        K, r = K[None], r[None]
    Kcc, Kci = K[:, :nc, :nc], K[:, :nc, nc:]
    Kic, Kii = K[:, nc:, :nc], K[:, nc:, nc:]
    rhs_i = np.concatenate([Kic, r[:, nc:, None]], axis=2)
    try:
        sol = np.linalg.solve(Kii, rhs_i)
    except np.linalg.LinAlgError:
        bad = None
        for e in range(len(Kii)):
            try:
                np.linalg.solve(Kii[e], rhs_i[e])
            except np.linalg.LinAlgError:
                bad = e
                break
        raise CondensationError(bad) from None
    if not np.all(np.isfinite(sol)):
        raise CondensationError(int(np.argmax(~np.all(np.isfinite(sol), axis=(1, 2)))))
    X_K, x_r = sol[:, :, :nc], sol[:, :, nc]
    S = Kcc - Kci @ X_K
    rhs = r[:, :nc] - np.einsum("eij,ej->ei", Kci, x_r)
    if single:
        return CondensedSystem(S[0], rhs[0], X_K[0], x_r[0])
    return CondensedSystem(S, rhs, X_K, x_r)


def recover_internal(cond, coupling_increment):
    return cond.recover(coupling_increment)
