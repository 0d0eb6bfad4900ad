"""Damped quasi-Newton iteration and adaptive load stepping.

The driver works with any discretization object offering

* ``initial_state()``,
* ``newton_system(state, xi, use_shift, eps_p) -> (residual_norm, solve)``
  where ``solve()`` returns the full Newton increment,
* ``update(state, increment, factor)`` and
* ``volume_check(state) -> element means of det F``.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .material import ConstitutiveDomainError

log = logging.getLogger(__name__)


class LinearSolveError(np.linalg.LinAlgError):
    """Factorization breakdown of the condensed matrix (treated as indefiniteness)."""


class LoadSteppingError(RuntimeError):
    """Raised when the load increment falls below ``tol_inc``."""

    def __init__(self, xi):
        super().__init__(f"Problem cannot be solved (last converged load fraction {xi:.4g})")
        self.xi = xi


@dataclass
class NewtonConfig:
    beta: float = 1.0
    tol_residual: float = 1e-5
    n_max: int = 40
    eps_p: float | None = None
    use_shift: bool | str = False
    shift_switch: float = 1e-2
    divergence_factor: float = 1e8

    def __post_init__(self):
        if not (0 < self.beta <= 1):
            raise ValueError("beta must lie in (0, 1]")
        if self.tol_residual <= 0 or self.n_max < 1:
            raise ValueError("tol_residual must be positive and n_max >= 1")
        if self.use_shift not in (True, False, "auto"):
            raise ValueError("use_shift must be True, False or 'auto'")

    def shift_active(self, norm):
        """Whether the shifted tangent is used at residual ``norm``."""
        if self.use_shift == "auto":
            return norm > self.shift_switch
        return bool(self.use_shift)


@dataclass
class LoadStepConfig:
    delta_xi_init: float = 0.1
    tol_inc: float = 1e-5
    grow: float = 1.5
    shrink: float = 0.8
    cut: float = 0.5
    fast_iterations: int = 8
    slow_iterations: int = 20
    growth_rule: str = "max"


@dataclass
class NewtonResult:
    state: object
    n_it: int
    converged: bool
    history: list = field(default_factory=list)
    reason: str = ""


@dataclass
class LoadStepResult:
    state: object
    xi: float
    converged: bool
    steps: list = field(default_factory=list)
    message: str = ""


def solve_condensed_linear(A, b):
    """Sparse direct solve; breakdown is reported as :class:`LinearSolveError`."""
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return np.zeros(0)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise LinearSolveError(f"factorization failed: {exc}") from None
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise LinearSolveError("non-finite solution of the condensed system")
    return x


def damping_factor(n, beta):
    """``min(beta * n, 1)`` for the ``n``-th increment (1-based)."""
    return min(beta * n, 1.0)


def quasi_newton(problem, state, xi, config=None):
    """Damped Newton iteration at fixed load fraction ``xi``.

    ``state`` need not satisfy the essential data for ``xi``; the first
    increment carries the defect.  Returns a :class:`NewtonResult`;
    ``n_it`` counts applied increments.
    """
    config = config or NewtonConfig()
    history = []
    for n in range(1, config.n_max + 2):
        try:
            norm, solve = problem.newton_system(state, xi, eps_p=config.eps_p)
        except ConstitutiveDomainError as exc:
            return NewtonResult(state, n - 1, False, history, f"constitutive: {exc}")
        history.append(norm)
        if not math.isfinite(norm):
            return NewtonResult(state, n - 1, False, history, "non-finite residual")
        if norm <= config.tol_residual:
            return NewtonResult(state, n - 1, True, history)
        if norm > config.divergence_factor * max(history[0], config.tol_residual):
            return NewtonResult(state, n - 1, False, history, "divergence")
        if n > config.n_max:
            break
        try:
            inc = solve(use_shift=config.shift_active(norm))
        except (np.linalg.LinAlgError, ConstitutiveDomainError) as exc:
            return NewtonResult(state, n - 1, False, history, f"linear solve: {exc}")
        state = problem.update(state, inc, damping_factor(n, config.beta))
    return NewtonResult(state, config.n_max, False, history, "maximum iterations")


def volume_positive(problem, state):
    """True iff every element mean of ``det F`` is positive."""
    return bool(np.all(problem.volume_check(state) > 0))


def adaptive_load_stepping(problem, newton=None, steps=None, state=None, logger=None):
    """Adaptive load stepping: increase ``xi`` from 0 to 1.

    On success with fast convergence in this and the previous step the
    increment grows; after two slow steps it shrinks; on failure (no
    convergence or a non-positive element mean Jacobian) the step is undone
    and the increment halved.  Returns a :class:`LoadStepResult`; when the
    increment drops below ``tol_inc`` the result is not converged and holds
    the last converged state and load fraction.
    """
    newton = newton or NewtonConfig()
    steps = steps or LoadStepConfig()
    logger = logger or log
    converged_state = problem.initial_state() if state is None else state
    xi, dxi = 0.0, steps.delta_xi_init
    n_old = 0
    records = []
    step = 0
    while xi < 1.0:
        if dxi < steps.tol_inc:
            return LoadStepResult(converged_state, xi, False, records, f"Problem cannot be solved at xi={xi:.4g}")
        xi_new = min(xi + dxi, 1.0)
        if 1.0 - xi_new < 1e-12:
            xi_new = 1.0
        res = quasi_newton(problem, converged_state, xi_new, newton)
        ok = res.converged
        J0 = None
        if ok:
            J0 = problem.volume_check(res.state)
            ok = bool(np.all(J0 > 0))
        step += 1
        rec = {
            "step": step, "xi": xi_new, "dxi": dxi, "n_it": res.n_it,
            "residual": res.history[-1] if res.history else float("nan"), "converged": ok,
            "J0_min": float(J0.min()) if J0 is not None else float("nan"),
            "J0_max": float(J0.max()) if J0 is not None else float("nan"),
            "history": res.history,
        }
        records.append(rec)
        logger.info("%d %.6g %.6g %d %.6e %.6g %.6g", step, xi_new, dxi, res.n_it, rec["residual"],
                    rec["J0_min"], rec["J0_max"])
        if ok:
            xi, converged_state = xi_new, res.state
            if res.n_it < steps.fast_iterations and n_old < steps.fast_iterations:
                dxi = max(steps.grow * dxi, steps.delta_xi_init) if steps.growth_rule == "max" \
                    else min(steps.grow * dxi, 1.0)
            elif res.n_it > steps.slow_iterations and n_old > steps.slow_iterations:
                dxi = steps.shrink * dxi
            n_old = res.n_it
        else:
            dxi = steps.cut * dxi
    return LoadStepResult(converged_state, xi, True, records)


def format_step_line(rec):
    """``step xi dxi n_it residual J0_min J0_max`` as logged."""
    return (f"{rec['step']} {rec['xi']:.6g} {rec['dxi']:.6g} {rec['n_it']} {rec['residual']:.6e} "
            f"{rec['J0_min']:.6g} {rec['J0_max']:.6g}")
