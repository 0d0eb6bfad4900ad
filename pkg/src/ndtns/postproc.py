"""Postprocessing: lifted displacement, spherical stress, error norms, e.o.c.

The postprocessed displacement ``u*`` is element-wise in ``[P^{k+1}]^2``
(polynomials of the reference coordinates composed with the element map)
and solves the local Neumann problem

    (Grad u*, Grad v)_T = (F_h - I, Grad v)_T,   int_T u* = int_T u_h.
"""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .elements.polynomials import eval_monomials, n_monomials
from .elements.quadrature import triangle_rule
from .material import cof2, constraint, det2


def evaluate_fields(disc, state, rule=None):
    """Discrete fields at the points of ``rule`` (default: error rule).

    Returns a dict with ``X, w, u, F, P, p`` where ``P`` includes the
    recovered spherical part in the reduced layout.  Discretizations with
    their own ``evaluate_fields`` method (the standard method) delegate to it.
    """
    if hasattr(disc, "evaluate_fields"):
        return disc.evaluate_fields(state, rule)
    rule = rule or triangle_rule(disc.error_degree)
    b = disc.volume_basis(rule)
    x = disc.local_vectors(state)
    ne, q = b["w"].shape
    u = np.einsum("eqfa,ef->eqa", b["u"], x[:, disc.col_u])
    F, p = disc.fields(x, b)
    F = F.reshape(ne, q, 2, 2)
    P = np.einsum("eqfab,ef->eqab", b["P"], x[:, disc.col_P])
    if disc.reduced:
        P = P + spherical_stress(F, p, disc.params)
    return {"X": b["X"], "w": b["w"], "u": u, "F": F, "P": P, "p": p, "basis": b, "x": x}


def spherical_stress(F, p, params):
    """``(1/2) tr(mu F - p C'(J) cof F) I`` pointwise."""
    _, dC, _ = constraint(det2(F), params.constraint)
    tr = params.mu * np.einsum("...ii->...", F) - p * dC * np.einsum("...ii->...", cof2(F))
    return 0.5 * tr[..., None, None] * np.eye(2)


def recover_spherical_stress(disc, state, rule=None):
    """Full stress ``P_dev + P_sph`` at quadrature points, ``(ne, q, 2, 2)``."""
    return evaluate_fields(disc, state, rule)["P"]


@dataclass
class PostprocessedDisplacement:
    """Element-wise ``P^{k+1}`` displacement in reference-coordinate monomials."""

    degree: int
    coef: np.ndarray  # (ne, 2, nmon)

    def at_reference(self, element, ref_points):
        vals = eval_monomials(self.degree, np.atleast_2d(ref_points), derivatives=0)[0]
        return vals @ self.coef[element].T


def postprocess_displacement(disc, state, rule=None):
    from .geometry import element_geometry

    rule = rule or triangle_rule(disc.error_degree)
    deg = disc.k + 1
    f = evaluate_fields(disc, state, rule)
    _, G, det = element_geometry(disc.mesh, rule.points)
    Ginv = np.linalg.inv(G)
    vals, grads = eval_monomials(deg, rule.points, derivatives=1)
    pgrad = np.einsum("qmd,eqdj->eqmj", grads, Ginv)  # physical gradients
    w = f["w"]
    m = n_monomials(deg)
    A = np.einsum("eq,eqmj,eqnj->emn", w, pgrad, pgrad)
    mass = np.einsum("eq,qm->em", w, vals)
    ne = disc.mesh.n_elements
    # per component blocks with one multiplier each
    M = np.zeros((ne, m + 1, m + 1))
    M[:, :m, :m] = A
    M[:, :m, m] = mass
    M[:, m, :m] = mass
    Fm = f["F"] - np.eye(2)
    rhs = np.zeros((ne, 2, m + 1))
    rhs[:, :, :m] = np.einsum("eq,eqij,eqmj->eim", w, Fm, pgrad)
    rhs[:, :, m] = np.einsum("eq,eqi->ei", w, f["u"])
    sol = np.linalg.solve(M[:, None], rhs[..., None])[..., 0]
    return PostprocessedDisplacement(deg, sol[:, :, :m])


def vertex_value(ustar, mesh, vertex):
    """Mean of the element-wise ``u*`` over the elements sharing ``vertex``."""
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    vals = []
    for e in np.flatnonzero((mesh.triangles == vertex).any(axis=1)):
        loc = int(np.flatnonzero(mesh.triangles[e] == vertex)[0])
        vals.append(ustar.at_reference(e, ref[loc])[0])
    if not vals:
        raise ValueError(f"vertex {vertex} belongs to no element")
    return np.mean(vals, axis=0)


def _l2(w, diff):
    axes = tuple(range(2, diff.ndim))
    return float(np.sqrt(np.sum(w * np.sum(diff**2, axis=axes) if axes else w * diff**2)))


def l2_errors(disc, state, exact, ustar=None, rule=None):
    """L2 errors against ``exact(X) -> (u, p, F, P)`` on the error rule."""
    rule = rule or triangle_rule(disc.error_degree)
    f = evaluate_fields(disc, state, rule)
    ne, q = f["w"].shape
    ue, pe, Fe, Pe = exact(f["X"].reshape(-1, 2))
    ue, pe = ue.reshape(ne, q, 2), pe.reshape(ne, q)
    Fe, Pe = Fe.reshape(ne, q, 2, 2), Pe.reshape(ne, q, 2, 2)
    w = f["w"]
    out = {
        "err_u": _l2(w, f["u"] - ue),
        "err_p": _l2(w, f["p"] - pe),
        "err_F": _l2(w, f["F"] - Fe),
        "err_P": _l2(w, f["P"] - Pe),
    }
    if ustar is not None:
        vals = eval_monomials(ustar.degree, rule.points, derivatives=0)[0]
        us = np.einsum("qm,eim->eqi", vals, ustar.coef)
        out["err_ustar"] = _l2(w, us - ue)
    return out


def l2_norm(disc, values, rule=None):
    """L2 norm of a field given at the points of ``rule`` on every element."""
    rule = rule or triangle_rule(disc.error_degree)
    b = disc.volume_basis(rule)
    return _l2(b["w"], np.asarray(values))


def jacobian_report(disc, state, rule=None):
    """Pointwise and element-mean extrema of ``det F_h``."""
    rule = rule or triangle_rule(disc.error_degree)
    f = evaluate_fields(disc, state, rule)
    J = det2(f["F"])
    J0 = (f["w"] * J).sum(axis=1) / f["w"].sum(axis=1)
    return float(J.min()), float(J.max()), float(J0.min()), float(J0.max())


def eoc(errors, hs):
    """Estimated orders ``log(e_{l-1}/e_l) / log(h_{l-1}/h_l)``; first entry NaN."""
    out = [float("nan")]
    for l in range(1, len(errors)):
        e0, e1, h0, h1 = errors[l - 1], errors[l], hs[l - 1], hs[l]
        if e0 is None or e1 is None or not (e0 > 0 and e1 > 0):
            out.append(float("nan"))
        else:
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
    return out


ERROR_FIELDS = ("u", "p", "F", "P", "ustar")
CSV_HEADER = ["h"] + [c for f in ERROR_FIELDS for c in (f"err_{f}", f"eoc_{f}")]


@dataclass
class ErrorReport:
    """Rows of ``h`` and errors; failed levels carry ``failed_xi``."""

    rows: list = field(default_factory=list)

    def add(self, h, errors=None, failed_xi=None, extra=None):
        self.rows.append({"h": h, "errors": errors or {}, "failed_xi": failed_xi, "extra": extra or {}})

    @property
    def failed(self):
        return any(r["failed_xi"] is not None for r in self.rows)

    def eocs(self, name):
        hs = [r["h"] for r in self.rows]
        errs = [r["errors"].get(f"err_{name}") if r["failed_xi"] is None else None for r in self.rows]
        return eoc(errs, hs)

    def table_rows(self):
        rates = {f: self.eocs(f) for f in ERROR_FIELDS}
        out = []
        for i, r in enumerate(self.rows):
            row = [f"{r['h']:.4g}"]
            for f in ERROR_FIELDS:
                if r["failed_xi"] is not None:
                    row += [f"F {r['failed_xi']:.2f}", ""]
                    continue
                e = r["errors"].get(f"err_{f}")
                row.append("" if e is None else f"{e:.2e}")
                row.append("" if math.isnan(rates[f][i]) else f"{rates[f][i]:.2f}")
            out.append(row)
        return out

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        wr.writerows(self.table_rows())
        return buf.getvalue()

    def to_table(self):
        rows = [CSV_HEADER] + self.table_rows()
        widths = [max(len(r[i]) for r in rows) for i in range(len(CSV_HEADER))]
        return "\n".join("  ".join(c.rjust(wd) for c, wd in zip(r, widths)) for r in rows) + "\n"
