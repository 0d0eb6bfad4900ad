"""Benchmark setups: cylinder inflation, Cook's membrane and the small-strain
pressure-robustness test."""
import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..assembly.ndtns import NDTNSDiscretization
from ..assembly.small_strain import pressure_robustness
from ..assembly.taylor_hood import TaylorHoodDiscretization
from ..elements.dofmap import BoundaryConditions
from ..geometry import build_cook_mesh, build_quarter_annulus, build_unit_square, uniform_refine
from ..material import MaterialParams
from ..postproc import ErrorReport, jacobian_report, l2_errors, postprocess_displacement, vertex_value
from ..solver import LoadStepConfig, NewtonConfig, adaptive_load_stepping
from .exact import exact_inflation_2d

log = logging.getLogger(__name__)

PROBLEMS = ("inflate2d", "cook2d", "pressure_robust")
METHODS = ("ndtns", "std", "mcs_small_strain")
COMPATIBLE = {
    "inflate2d": ("ndtns", "std"),
    "cook2d": ("ndtns", "std"),
    "pressure_robust": ("mcs_small_strain",),
}

#: Cook geometry is built in units of ``COOK_SCALE`` times millimetres.
COOK_SCALE = 0.01
COOK_TRACTION = 0.5
#: Disk around the top-left corner (in mm) where ``tau = 100 mu / h``.
COOK_REGION = ((0.0, 44.0), 10.0)


class BenchmarkSpecError(ValueError):
    """Inconsistent benchmark specification (usage error)."""


@dataclass
class BenchmarkSpec:
    """Benchmark configuration.

    ``levels`` counts refinement levels for the inflation and the
    pressure-robustness problems; for Cook's membrane the meshes are
    ``n = 4, 8, ...`` (``levels`` of them).  ``tau`` is a policy string:
    ``zero``, ``const:c`` (``tau = c mu``), ``overh:c`` (``tau = c mu / h``)
    or ``cook`` (``100 mu / h`` near the top-left corner, ``100 mu``
    elsewhere).
    """

    problem: str
    method: str = "ndtns"
    order: int = 2
    levels: int = 4
    tau: str = "zero"
    gamma: float = 2.0
    mu: float = 1.0
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    steps: LoadStepConfig = field(default_factory=LoadStepConfig)
    out: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise BenchmarkSpecError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        if self.method not in METHODS:
            raise BenchmarkSpecError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.method not in COMPATIBLE[self.problem]:
            raise BenchmarkSpecError(f"{self.problem} supports methods {COMPATIBLE[self.problem]}, not {self.method!r}")
        if self.order not in (1, 2):
            raise BenchmarkSpecError("order must be 1 or 2")
        if self.levels < 1:
            raise BenchmarkSpecError("levels must be at least 1")
        if self.mu <= 0:
            raise BenchmarkSpecError("mu must be positive")
        if self.gamma < 1:
            raise BenchmarkSpecError("gamma must be at least 1")
        parse_tau_policy(self.tau)


def parse_tau_policy(policy):
    """``(kind, value)`` from ``zero``, ``const:c``, ``overh:c`` or ``cook``."""
    if policy in ("zero", "cook"):
        return policy, None
    kind, _, value = str(policy).partition(":")
    if kind not in ("const", "overh") or not value:
        raise BenchmarkSpecError(f"invalid tau policy {policy!r}; use zero, const:c, overh:c or cook")
    try:
        c = float(value)
    except ValueError:
        raise BenchmarkSpecError(f"invalid tau value in {policy!r}") from None
    if c < 0:
        raise BenchmarkSpecError("tau must be non-negative")
    return kind, c


def tau_field(policy, mesh, mu=1.0, scale=COOK_SCALE):
    """Per-element stabilization for a policy string."""
    kind, c = parse_tau_policy(policy)
    h = mesh.element_h()
    if kind == "zero":
        return np.zeros(mesh.n_elements)
    if kind == "const":
        return np.full(mesh.n_elements, c * mu)
    if kind == "overh":
        return c * mu / h
    (cx, cy), r = COOK_REGION
    centroid = mesh.vertices[mesh.triangles].mean(axis=1)
    inside = (centroid[:, 0] - cx * scale) ** 2 + (centroid[:, 1] - cy * scale) ** 2 < (r * scale) ** 2
    return np.where(inside, 100.0 * mu / h, 100.0 * mu)


def _discretization(spec, mesh, bc, tau):
    params = MaterialParams(mu=spec.mu)
    if spec.method == "std":
        return TaylorHoodDiscretization(mesh, spec.order, params, bc)
    return NDTNSDiscretization(mesh, spec.order, params, bc, tau=tau)


def _dof_stats(disc):
    if isinstance(disc, TaylorHoodDiscretization):
        return {"global_total": int(disc.n_dofs), "global_free": int(len(disc.free))}
    stats = disc.dofmap.statistics(disc.mesh.n_elements)
    stats["global_total"] = stats["global_coupling"] + stats["internal_total"]
    return stats


# ------------------------------------------------------------------ inflation
def inflation_conditions(gamma):
    """Outer displacement ``(gamma - 1) X``, symmetry on the straight sides."""
    outer = lambda X: (gamma - 1.0) * np.asarray(X)  # noqa: E731
    return BoundaryConditions(
        normal={"outer": outer, "sym_x": None, "sym_y": None},
        tangential={"outer": outer},
    )


def inflation_level(spec, level):
    """Mesh, nominal size and discretization of one inflation level."""
    mesh = build_quarter_annulus(level=level)
    h = 0.25 / 2 ** level
    disc = _discretization(spec, mesh, inflation_conditions(spec.gamma), tau_field(spec.tau, mesh, spec.mu))
    return mesh, h, disc


def run_inflation2d(spec, logger=None):
    """Error table over ``spec.levels`` uniform refinements.

    Failed levels are recorded with the last converged load fraction.
    ``extra`` of each row holds timings, load steps, Jacobian extrema and
    DoF counts.
    """
    report = ErrorReport()
    exact = lambda X: exact_inflation_2d(X, spec.gamma, 1.0, spec.mu)  # noqa: E731
    for level in range(spec.levels):
        t0 = time.perf_counter()
        mesh, h, disc = inflation_level(spec, level)
        res = adaptive_load_stepping(disc, spec.newton, spec.steps, logger=logger)
        extra = {
            "level": level, "n_elements": mesh.n_elements, "steps": len(res.steps),
            "iterations": sum(r["n_it"] for r in res.steps), "dofs": _dof_stats(disc),
        }
        if not res.converged:
            extra["time"] = time.perf_counter() - t0
            report.add(h, failed_xi=res.xi, extra=extra)
            continue
        ustar = postprocess_displacement(disc, res.state) if spec.method == "ndtns" else None
        errors = l2_errors(disc, res.state, exact, ustar)
        extra["jacobian"] = jacobian_report(disc, res.state)
        extra["time"] = time.perf_counter() - t0
        extra["state"] = res.state
        report.add(h, errors, extra=extra)
    return report


# ----------------------------------------------------------------------- Cook
@dataclass
class DeflectionReport:
    """Displacement of the point ``A`` per mesh; failures carry ``failed_xi``."""

    rows: list = field(default_factory=list)

    def add(self, n, u=None, failed_xi=None, extra=None):
        self.rows.append({"n": n, "u": u, "failed_xi": failed_xi, "extra": extra or {}})

    @property
    def failed(self):
        return any(r["failed_xi"] is not None for r in self.rows)

    def table_rows(self):
        out = []
        for r in self.rows:
            if r["failed_xi"] is not None:
                cell = f"F {r['failed_xi']:.2f}"
                out.append([str(r["n"]), cell, cell])
            else:
                out.append([str(r["n"]), f"{r['u'][0]:.5f}", f"{r['u'][1]:.5f}"])
        return out

    header = ["n", "u_x", "u_y"]

    def to_csv(self):
        return _csv(self.header, self.table_rows())

    def to_table(self):
        return _table(self.header, self.table_rows())


def cook_conditions(traction=COOK_TRACTION):
    """Clamped left edge, vertical shear traction on the right edge."""
    return BoundaryConditions(
        normal={"left": None}, tangential={"left": None},
        traction={"right": lambda X: np.tile([0.0, traction], (len(X), 1))},
    )


def cook_deflection(disc, state):
    """Displacement at ``A``: ``u*`` averaged over the adjacent elements for
    the hybrid method, the nodal value for the standard method."""
    A = disc.mesh.points["A"]
    if isinstance(disc, TaylorHoodDiscretization):
        return disc.displacement_at_vertex(state, A)
    return vertex_value(postprocess_displacement(disc, state), disc.mesh, A)


def run_cook2d(spec, logger=None, meshes=None, traction=COOK_TRACTION):
    """Deflections at ``A`` for ``n = 4, 8, ...`` elements per side."""
    report = DeflectionReport()
    meshes = meshes or [4 * 2 ** i for i in range(spec.levels)]
    for n in meshes:
        t0 = time.perf_counter()
        mesh = build_cook_mesh(n, scale=COOK_SCALE)
        disc = _discretization(spec, mesh, cook_conditions(traction), tau_field(spec.tau, mesh, spec.mu))
        res = adaptive_load_stepping(disc, spec.newton, spec.steps, logger=logger)
        extra = {"steps": len(res.steps), "iterations": sum(r["n_it"] for r in res.steps), "dofs": _dof_stats(disc)}
        if not res.converged:
            extra["time"] = time.perf_counter() - t0
            report.add(n, failed_xi=res.xi, extra=extra)
            continue
        u = cook_deflection(disc, res.state)
        extra["time"] = time.perf_counter() - t0
        report.add(n, u, extra=extra)
    return report


# -------------------------------------------------------- pressure robustness
def psi_cubic(X):
    """``x^2 y`` minus its mean over the unit square."""
    X = np.asarray(X)
    return X[:, 0] ** 2 * X[:, 1] - 1.0 / 6.0


def grad_psi_cubic(X):
    X = np.asarray(X)
    return np.column_stack([2.0 * X[:, 0] * X[:, 1], X[:, 0] ** 2])


@dataclass
class RobustnessReport:
    rows: list = field(default_factory=list)
    header = ["n_elements", "norm_u", "norm_p_minus_proj", "norm_sigma_minus_proj"]

    @property
    def failed(self):
        return False

    def table_rows(self):
        return [[str(r[0])] + [f"{v:.3e}" for v in r[1:]] for r in self.rows]

    def to_csv(self):
        return _csv(self.header, self.table_rows())

    def to_table(self):
        return _table(self.header, self.table_rows())


def run_pressure_robustness(spec, psi=psi_cubic, grad_psi=grad_psi_cubic):
    """Small-strain solve with ``B = Grad psi`` on ``levels`` unit-square meshes.

    The first mesh has 8 triangles; each level refines uniformly.  Rows hold
    ``(n_elements, |u_h|, |p_h - Pi psi|, |sigma_h - Pi psi I|)``.
    """
    report = RobustnessReport()
    mesh = build_unit_square(2)
    for level in range(spec.levels):
        if level:
            mesh = uniform_refine(mesh)
        report.rows.append((mesh.n_elements,) + pressure_robustness(mesh, spec.order, spec.mu, psi, grad_psi))
    return report


# ------------------------------------------------------------------- output
def _csv(header, rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def _table(header, rows):
    rows = [list(header)] + rows
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows) + "\n"


def emit_results(report, fmt="csv", path=None):
    """Render a report as CSV or an aligned table; write to ``path`` if given.

    Returns the rendered text.
    """
    if fmt not in ("csv", "table"):
        raise ValueError(f"unknown format {fmt!r}")
    text = report.to_csv() if fmt == "csv" else report.to_table()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def run(spec, logger=None):
    """Dispatch on ``spec.problem``."""
    if spec.problem == "inflate2d":
        return run_inflation2d(spec, logger)
    if spec.problem == "cook2d":
        return run_cook2d(spec, logger)
    return run_pressure_robustness(spec)


__all__ = [
    "BenchmarkSpec", "BenchmarkSpecError", "DeflectionReport", "RobustnessReport", "cook_conditions",
    "cook_deflection", "emit_results", "inflation_conditions", "inflation_level", "parse_tau_policy",
    "psi_cubic", "grad_psi_cubic", "run", "run_cook2d", "run_inflation2d", "run_pressure_robustness",
    "tau_field",
]
