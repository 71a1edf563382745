import numpy as np
import pytest

from cransim import mmopt
from cransim.errors import NumericalDomainError
from cransim.gaussinfo import LN2, logdet2
from helpers import rand_psd


def test_tangent_at_identity():
    tangent = mmopt.linearize_logdet(np.eye(3))
    assert tangent(np.eye(3)) == pytest.approx(0.0, abs=1e-12)
    m = np.diag([1.5, 0.5, 1.0])
    assert tangent(m) == pytest.approx(np.trace(m - np.eye(3)).real / LN2,
                                       abs=1e-12)


def test_tangent_scalar_upper_bound():
    tangent = mmopt.linearize_logdet(np.array([[2.0]]))
    value = tangent(np.array([[4.0]]))
    assert value == pytest.approx(1.0 + 2.0 / (2.0 * LN2), abs=1e-12)
    assert value >= np.log2(4.0)


def test_tangent_dominates_logdet_everywhere():
    rng = np.random.default_rng(17)
    for _ in range(100):
        m0 = rand_psd(rng, 3)
        m1 = rand_psd(rng, 3)
        tangent = mmopt.linearize_logdet(m0)
        assert tangent(m1) >= logdet2(m1) - 1e-9
        assert tangent(m0) == pytest.approx(logdet2(m0), abs=1e-9)


def test_tangent_rejects_singular_anchor():
    with pytest.raises(NumericalDomainError):
        mmopt.linearize_logdet(np.zeros((2, 2)))


def test_logdet_gradient_matches_finite_differences():
    rng = np.random.default_rng(18)
    for _ in range(5):
        m = rand_psd(rng, 4)
        tangent = mmopt.linearize_logdet(m)
        for _ in range(4):
            direction = rand_psd(rng, 4) - rand_psd(rng, 4)
            h = 1e-6 * np.linalg.norm(m) / max(np.linalg.norm(direction), 1e-12)
            numeric = (logdet2(m + h * direction)
                       - logdet2(m - h * direction)) / (2 * h)
            analytic = np.trace(tangent.gradient @ direction).real / LN2
            assert numeric == pytest.approx(analytic, rel=1e-5)


def test_log2_tangent():
    value, slope = mmopt.log2_tangent(2.0)
    assert value == pytest.approx(1.0)
    assert slope == pytest.approx(1.0 / (2.0 * LN2))
    with pytest.raises(NumericalDomainError):
        mmopt.log2_tangent(0.0)


class _ScalarDC:
    """max log2(1+4x) - 1.2 log2(1+x) on [0, 10]; optimum at x* = 3.5."""

    lo, hi = 0.0, 10.0

    def objective(self, x):
        return float(np.log2(1 + 4 * x) - 1.2 * np.log2(1 + x))

    def violation(self, x):
        return float(max(x - self.hi, self.lo - x))

    def interpolate(self, a, b, t):
        return a + t * (b - a)

    def step(self, x0):
        # tangent of the subtracted concave term, then exact concave maximization
        slope = 1.2 / ((1 + x0) * LN2)
        x = (4.0 / (slope * LN2) - 1.0) / 4.0
        return float(np.clip(x, self.lo, self.hi))


def test_mm_solve_scalar_dc_toy():
    x, trace = mmopt.mm_solve(_ScalarDC(), 0.0, tol=1e-14, max_iter=200)
    assert x == pytest.approx(3.5, abs=1e-4)
    assert trace.converged
    diffs = np.diff(trace.objective)
    assert np.all(diffs >= -1e-9)


def test_mm_solve_stationary_point_converges_immediately():
    x, trace = mmopt.mm_solve(_ScalarDC(), 3.5, tol=1e-8)
    assert trace.converged
    assert trace.iterations == 1
    assert x == pytest.approx(3.5, abs=1e-9)


def test_mm_solve_rejects_infeasible_start():
    with pytest.raises(NumericalDomainError):
        mmopt.mm_solve(_ScalarDC(), 11.0)


def test_mm_solve_reports_non_convergence():
    x, trace = mmopt.mm_solve(_ScalarDC(), 0.0, tol=0.0, max_iter=3)
    assert not trace.converged
    assert any("no convergence" in w for w in trace.warnings)
    assert trace.iterations == 3


class _BadStepProblem(_ScalarDC):
    def step(self, x0):
        return 50.0  # far outside the box: forces feasibility backtracking


def test_mm_solve_feasibility_backtracking():
    x, trace = mmopt.mm_solve(_BadStepProblem(), 5.0, max_iter=4)
    assert x <= 10.0 + 1e-9
    assert all(v <= 1e-7 for v in trace.violation)
