"""Generic majorization-minimization engine for difference-of-convex designs.

The non-convex log-det (and scalar log) terms of the rate and backhaul
expressions are concave in their matrix (scalar) argument, so their
first-order expansion is a global upper bound that touches at the expansion
point.  Swapping those terms for their tangents yields an inner problem
whose solution can only improve the true objective, which gives the usual
monotone-ascent guarantee of MM/DC schemes.

A problem object plugged into :func:`mm_solve` provides:

    objective(x)          true objective value (to maximize)
    violation(x)          max violation of the true constraints (<= 0 if feasible)
    step(x)               build the surrogate at x and solve it, returning a candidate
    interpolate(a, b, t)  point a + t*(b - a) in parameter space

`step` is expected to never decrease the surrogate relative to its starting
point; mm_solve additionally guards acceptance with the true objective and
restores true feasibility by step-halving toward the previous iterate.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalDomainError
from .gaussinfo import LN2, hermitize, logdet2

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 100
FEASIBILITY_TOL = 1e-7
MAX_HALVINGS = 30


@dataclass
class MMTrace:
    """Per-iteration bookkeeping of one mm_solve run."""
    objective: list = field(default_factory=list)
    violation: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    warnings: list = field(default_factory=list)


@dataclass
class LogDetTangent:
    """Affine upper bound of log2 det(.) anchored at a PD matrix."""
    anchor: np.ndarray
    value_at_anchor: float
    gradient: np.ndarray  # inverse of the anchor

    def __call__(self, m):
        delta = np.asarray(m, dtype=complex) - self.anchor
        return self.value_at_anchor + np.trace(self.gradient @ delta).real / LN2


def linearize_logdet(m0):
    """Tangent majorizer of log2 det at `m0` (positive definite)."""
    m0 = hermitize(m0)
    value = logdet2(m0)
    try:
        grad = np.linalg.inv(m0)
    except np.linalg.LinAlgError:
        raise NumericalDomainError("cannot linearize log-det at a singular matrix")
    return LogDetTangent(anchor=m0, value_at_anchor=value, gradient=hermitize(grad))


def log2_tangent(v0):
    """Scalar tangent of log2 at v0 > 0: returns (value_at_v0, slope)."""
    if v0 <= 0:
        raise NumericalDomainError("log2 tangent requires a positive anchor")
    return np.log2(v0), 1.0 / (v0 * LN2)


def mm_solve(problem, init, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
             feas_tol=FEASIBILITY_TOL):
    """Run the MM loop from a feasible starting point.

    Returns (solution, MMTrace).  Stops when the relative objective change
    drops below `tol` or after `max_iter` accepted steps; non-convergence is
    reported through the trace, not raised.
    """
    trace = MMTrace()
    v0 = problem.violation(init)
    if v0 > feas_tol:
        raise NumericalDomainError(
            f"mm_solve requires a feasible starting point "
            f"(constraint violation {v0:.3e})")
    x = init
    obj = problem.objective(x)
    trace.objective.append(obj)
    trace.violation.append(v0)

    for _ in range(max_iter):
        try:
            candidate = problem.step(x)
        except NumericalDomainError as exc:
            trace.warnings.append(f"inner solve failed: {exc}")
            break

        viol = problem.violation(candidate)
        if viol > feas_tol:
            t = 1.0
            proposed = candidate
            for _ in range(MAX_HALVINGS):
                t *= 0.5
                proposed = problem.interpolate(x, candidate, t)
                viol = problem.violation(proposed)
                if viol <= feas_tol:
                    break
            if viol > feas_tol:
                trace.warnings.append(
                    "feasibility backtracking exhausted; keeping previous iterate")
                break
            candidate = proposed

        new_obj = problem.objective(candidate)
        if new_obj < obj - 1e-12 * max(1.0, abs(obj)):
            trace.warnings.append(
                "surrogate step decreased the objective; stopping at previous iterate")
            trace.converged = True
            break

        rel_change = abs(new_obj - obj) / max(1.0, abs(obj))
        x, obj = candidate, new_obj
        trace.objective.append(obj)
        trace.violation.append(viol)
        trace.iterations += 1
        if rel_change < tol:
            trace.converged = True
            break
    else:
        trace.warnings.append(f"no convergence within {max_iter} iterations")

    return x, trace
