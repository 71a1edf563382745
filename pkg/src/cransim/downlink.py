"""Downlink precoding with point-to-point or multivariate backhaul compression.

The control unit linearly precodes the per-MS streams (columns of A) and
ships each BS its precoded signal over a finite backhaul, modeled by the
additive Gaussian test channel x = x_tilde + q.  Point-to-point mode
compresses per BS, so the quantization covariance Omega is diagonal and each
link must carry log2(power/omega_ii) bits.  Multiterminal mode shapes a full
covariance across BSs, which buys quantization noise that partially cancels
at the served users at the price of joint (subset-sum) backhaul conditions:
for every subset S of BSs the sum of per-BS description rates minus the
log-det of Omega restricted to S must fit within the summed capacities.

The weighted-sum-rate design over (A, Omega) runs as an MM loop: the
non-convex log terms are replaced by scalar tangents at the current iterate
(upper bounds inside the constraints, a lower bound for the objective), and
each inner subproblem is solved by gradient ascent with a logarithmic
barrier on the linearized constraints.  The surrogate constraint set is
convex and sits inside the true feasible set, so every accepted iterate is
feasible, and ascent steps from the current point never decrease the true
objective.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DomainError, NumericalDomainError
from .gaussinfo import LN2, hermitize, logdet2
from .mmopt import MMTrace, mm_solve

MODE_P2P = "point_to_point"
MODE_MT = "multiterminal"
SUBSET_ENUM_CAP = 16
FEAS_TOL = 1e-7


@dataclass
class DownlinkDesign:
    """Precoding matrix, quantization covariance and per-BS limits."""

    a: np.ndarray        # (n_bs, n_ms) complex, column k precodes MS k
    omega: np.ndarray    # (n_bs, n_bs) complex Hermitian PSD
    c: np.ndarray        # (n_bs,) backhaul capacities, bps/Hz
    p_bs: np.ndarray     # (n_bs,) per-BS power limits, watts
    mode: str

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=complex)
        self.omega = np.asarray(self.omega, dtype=complex)
        self.c = np.asarray(self.c, dtype=float)
        self.p_bs = np.asarray(self.p_bs, dtype=float)
        if self.mode not in (MODE_P2P, MODE_MT):
            raise DomainError(f"unknown mode {self.mode!r}")

    @property
    def active(self):
        return np.flatnonzero(self.c > 0)


@dataclass
class DownlinkResult:
    design: DownlinkDesign
    rates: np.ndarray
    objective: float
    trace: object


@dataclass
class FeasibilityReport:
    feasible: bool
    margin: float
    worst_constraint: str
    n_subsets_checked: int


def tx_power(design, i):
    """Transmit power of BS i: precoded signal power plus quantization noise."""
    return float(np.sum(np.abs(design.a[i]) ** 2) + design.omega[i, i].real)


def backhaul_p2p_dl(design, i):
    """Backhaul rate (bps/Hz) to ship BS i's signal, independent compression."""
    omega_ii = design.omega[i, i].real
    if not omega_ii > 0:
        raise DomainError("diagonal quantization noise power must be > 0")
    sig = float(np.sum(np.abs(design.a[i]) ** 2))
    return float(np.log2(sig + omega_ii) - np.log2(omega_ii))


def backhaul_mv_dl(design, subset):
    """Joint backhaul requirement of a BS subset under correlated noise."""
    subset = tuple(int(i) for i in subset)
    if len(subset) == 0:
        raise DomainError("subset must be nonempty")
    total = 0.0
    for i in subset:
        omega_ii = design.omega[i, i].real
        if not omega_ii > 0:
            raise DomainError("diagonal quantization noise power must be > 0")
        sig = float(np.sum(np.abs(design.a[i]) ** 2))
        total += float(np.log2(sig + omega_ii))
    sub = design.omega[np.ix_(subset, subset)]
    return total - logdet2(sub)


def rate_dl(design, channel, k):
    """Achievable rate of MS k (bps/Hz), interference treated as noise."""
    r = channel.h_dl[k]
    m = r @ design.a
    qn = float(np.real(r @ design.omega @ r.conj()))
    total = channel.sigma2_z_dl[k] + float(np.sum(np.abs(m) ** 2)) + qn
    interference = total - float(np.abs(m[k]) ** 2)
    return float(np.log2(total) - np.log2(interference))


def enumerate_subsets(indices):
    """All nonempty subsets, ordered by size then lexicographically."""
    indices = tuple(indices)
    out = []
    for size in range(1, len(indices) + 1):
        out.extend(combinations(indices, size))
    return out


def feasible_dl(design, tol=FEAS_TOL):
    """Check all subset backhaul conditions and per-BS power constraints.

    Returns a report with the worst slack margin (negative means violated).
    Inactive BSs (zero capacity) must be silent.  Refuses clusters with more
    than 16 active BSs, where exhaustive subset enumeration is off the table.
    """
    active = design.active
    if active.size > SUBSET_ENUM_CAP:
        raise DomainError(
            f"subset enumeration capped at {SUBSET_ENUM_CAP} BSs "
            f"(got {active.size})")
    margin = np.inf
    worst = "none"

    power_scale = max(float(np.max(design.p_bs, initial=0.0)), 1e-30)
    for i in range(design.a.shape[0]):
        if i in active:
            continue
        leak = tx_power(design, i) + float(np.sum(np.abs(design.omega[i])))
        if leak > 1e-10 * power_scale:
            margin = min(margin, -leak)
            worst = f"inactive_bs[{i}]"

    for i in active:
        slack = design.p_bs[i] - tx_power(design, i)
        if slack < margin:
            margin, worst = slack, f"power[{i}]"

    subsets = enumerate_subsets(active)
    for subset in subsets:
        cap = float(np.sum(design.c[list(subset)]))
        try:
            g = backhaul_mv_dl(design, subset)
        except (DomainError, NumericalDomainError):
            margin, worst = -np.inf, f"backhaul{subset}"
            continue
        slack = cap - g
        if slack < margin:
            margin, worst = slack, f"backhaul{subset}"

    return FeasibilityReport(feasible=bool(margin >= -tol), margin=float(margin),
                             worst_constraint=worst,
                             n_subsets_checked=len(subsets))


# ---------------------------------------------------------------------------
# optimizer internals
# ---------------------------------------------------------------------------

@dataclass
class _Point:
    """Inner parameterization: free A, plus a PSD-by-construction Omega."""
    a: np.ndarray                 # (n_act, n_ms) complex
    l: np.ndarray = None          # (n_act, n_act) complex lower-triangular (mt)
    u: np.ndarray = None          # (n_act,) real, omega = exp(u) (p2p)


# log-parameterization of the diagonal noise powers: strictly positive by
# construction, and gradient steps scale multiplicatively, which matters
# because optimal noise powers span many orders of magnitude
_U_CLIP = (-600.0, 60.0)


def _omega_of_u(u):
    return np.exp(u)


def _u_of_omega(w):
    return np.log(np.asarray(w, dtype=float))


class _PrecodingProblem:
    """MM adapter for the joint precoder / quantization-covariance design."""

    def __init__(self, hbar, weights, caps, p_lim, mode,
                 inner_steps=40, barrier_rounds=3, inner_tol=1e-6):
        self.hbar = hbar                      # (n_ms, n_act) noise-normalized
        self.w = np.asarray(weights, dtype=float)
        self.p_lim = np.asarray(p_lim, dtype=float)
        self.mode = mode
        self.n = hbar.shape[1]
        self.n_ms = hbar.shape[0]
        self.inner_steps = inner_steps
        self.barrier_rounds = barrier_rounds
        self.inner_tol = inner_tol

        if mode == MODE_MT:
            self.subsets = enumerate_subsets(range(self.n))
            self.masks = np.zeros((len(self.subsets), self.n), dtype=bool)
            for j, s in enumerate(self.subsets):
                self.masks[j, list(s)] = True
            self.subset_caps = self.masks @ caps
            self.size_groups = {}
            for size in range(1, self.n + 1):
                rows = [j for j, s in enumerate(self.subsets) if len(s) == size]
                gather = np.array([self.subsets[j] for j in rows], dtype=int)
                self.size_groups[size] = (np.array(rows, dtype=int), gather)
        else:
            self.masks = np.eye(self.n, dtype=bool)
            self.subset_caps = np.asarray(caps, dtype=float)

    # -- shared quantities -------------------------------------------------

    def _omega_full(self, point):
        if self.mode == MODE_MT:
            return point.l @ point.l.conj().T
        return np.diag(_omega_of_u(point.u)).astype(complex)

    def _tx_power(self, point, omega_diag):
        return np.sum(np.abs(point.a) ** 2, axis=1) + omega_diag

    def _subset_logdets(self, omega):
        """log2 det of Omega restricted to every subset (batched by size)."""
        out = np.empty(len(self.subsets))
        for size, (rows, gather) in self.size_groups.items():
            sub = omega[gather[:, :, None], gather[:, None, :]]
            chol = np.linalg.cholesky(sub)
            diags = np.diagonal(chol, axis1=1, axis2=2).real
            out[rows] = 2.0 * np.sum(np.log2(diags), axis=1)
        return out

    def _subset_inv_scatter(self, omega, coeffs):
        """Sum of coeff_S * scatter(inv(Omega_S)) over subsets (for gradients)."""
        g = np.zeros((self.n, self.n), dtype=complex)
        for size, (rows, gather) in self.size_groups.items():
            sub = omega[gather[:, :, None], gather[:, None, :]]
            inv = np.linalg.inv(sub)
            scaled = inv * coeffs[rows][:, None, None]
            np.add.at(g, (gather[:, :, None], gather[:, None, :]), scaled)
        return g

    def _rate_parts(self, point, omega):
        m = self.hbar @ point.a                      # (n_ms, n_ms)
        qn = np.einsum("ki,ij,kj->k", self.hbar, omega,
                       self.hbar.conj()).real
        sig = np.abs(m) ** 2
        total = 1.0 + np.sum(sig, axis=1) + qn
        interf = total - np.diagonal(sig)
        return m, total, interf

    # -- mm_solve protocol ---------------------------------------------------

    def objective(self, point):
        omega = self._omega_full(point)
        _, total, interf = self._rate_parts(point, omega)
        rates = np.log2(total) - np.log2(interf)
        return float(self.w @ rates)

    def _true_backhaul(self, point, omega, power):
        if self.mode == MODE_MT:
            return self.masks @ np.log2(power) - self._subset_logdets(omega)
        return np.log2(power) - np.log2(np.diag(omega).real)

    def violation(self, point):
        omega = self._omega_full(point)
        diag = np.diag(omega).real
        if np.any(diag <= 0):
            return np.inf
        power = self._tx_power(point, diag)
        try:
            g = self._true_backhaul(point, omega, power)
        except np.linalg.LinAlgError:
            return np.inf
        return float(max(np.max(power - self.p_lim),
                         np.max(g - self.subset_caps)))

    def interpolate(self, a, b, t):
        point = _Point(a=a.a + t * (b.a - a.a))
        if self.mode == MODE_MT:
            point.l = a.l + t * (b.l - a.l)
        else:
            point.u = a.u + t * (b.u - a.u)
        return point

    # -- surrogate construction and inner barrier ascent ---------------------

    def step(self, point0):
        omega0 = self._omega_full(point0)
        diag0 = np.diag(omega0).real
        power0 = self._tx_power(point0, diag0)
        b_slope = 1.0 / (power0 * LN2)
        lin_const = self.masks @ (np.log2(power0) - b_slope * power0)
        _, _, interf0 = self._rate_parts(point0, omega0)
        s_coef = self.w / (interf0 * LN2)

        tangent = (b_slope, lin_const, s_coef)
        surr0, slacks0, ok = self._surrogate_and_slacks(point0, tangent)
        if not ok:
            raise NumericalDomainError("current iterate lost strict feasibility")

        best_point, best_surr = point0, surr0
        # cap the barrier weight by the starting slack scale so a warm start
        # sitting near its active constraints is not dragged off them
        min_slack = min(np.min(slacks0[0]), np.min(slacks0[1]))
        mu0 = min(0.1 * max(1.0, abs(surr0)), max(10.0 * min_slack, 1e-10))
        # independent step sizes per variable block: the precoder and the
        # noise parameters live on very different scales
        eta = {"a": 1.0, "omega": 1.0}
        current = point0
        for round_idx in range(self.barrier_rounds):
            mu = mu0 * (0.1 ** round_idx)
            total_cur = self._total(current, tangent, mu)
            if total_cur is None:
                break
            for _ in range(self.inner_steps):
                gain = 0.0
                for block in ("a", "omega"):
                    grads = self._gradients(current, tangent, mu)
                    moved = False
                    for _ in range(30):
                        cand = self._advance(current, grads, eta[block], block)
                        total_cand = self._total(cand, tangent, mu)
                        if total_cand is not None and total_cand > total_cur:
                            gain += total_cand - total_cur
                            current, total_cur = cand, total_cand
                            eta[block] = min(eta[block] * 1.5, 1e8)
                            moved = True
                            break
                        eta[block] *= 0.5
                        if eta[block] < 1e-20:
                            break
                if gain == 0.0:
                    break
                surr_cur, _, ok = self._surrogate_and_slacks(current, tangent)
                if ok and surr_cur > best_surr:
                    best_point, best_surr = current, surr_cur
                if gain <= self.inner_tol * max(1.0, abs(total_cur)):
                    break
        return best_point

    def _surrogate_and_slacks(self, point, tangent):
        """Surrogate objective (constants dropped) and barrier slacks."""
        b_slope, lin_const, s_coef = tangent
        omega = self._omega_full(point)
        diag = np.diag(omega).real
        power = self._tx_power(point, diag)
        power_slack = self.p_lim - power
        if np.any(power_slack <= 0):
            return None, None, False
        try:
            if self.mode == MODE_MT:
                logdets = self._subset_logdets(omega)
            else:
                if np.any(diag <= 0):
                    return None, None, False
                logdets = np.log2(diag)
        except np.linalg.LinAlgError:
            return None, None, False
        g_surr = lin_const + self.masks @ (b_slope * power) - logdets
        bh_slack = self.subset_caps - g_surr
        if np.any(bh_slack <= 0):
            return None, None, False
        _, total, interf = self._rate_parts(point, omega)
        surr = float(self.w @ np.log2(total) - s_coef @ interf)
        return surr, (power_slack, bh_slack), True

    def _total(self, point, tangent, mu):
        surr, slacks, ok = self._surrogate_and_slacks(point, tangent)
        if not ok:
            return None
        power_slack, bh_slack = slacks
        return surr + mu * (np.sum(np.log(power_slack))
                            + np.sum(np.log(bh_slack)))

    def _gradients(self, point, tangent, mu):
        b_slope, lin_const, s_coef = tangent
        omega = self._omega_full(point)
        diag = np.diag(omega).real
        power = self._tx_power(point, diag)
        power_slack = self.p_lim - power
        if self.mode == MODE_MT:
            logdets = self._subset_logdets(omega)
        else:
            logdets = np.log2(diag)
        g_surr = lin_const + self.masks @ (b_slope * power) - logdets
        bh_slack = self.subset_caps - g_surr

        m, total, interf = self._rate_parts(point, omega)
        alpha = self.w / (total * LN2)

        # coefficient on d(power_i) collecting barrier terms
        coef_t = -mu / power_slack \
            - b_slope * (self.masks.T @ (mu / bh_slack))

        m_off = m.copy()
        np.fill_diagonal(m_off, 0.0)
        grad_a = self.hbar.conj().T @ (alpha[:, None] * m) \
            - self.hbar.conj().T @ (s_coef[:, None] * m_off) \
            + coef_t[:, None] * point.a

        quad_coef = alpha - s_coef
        if self.mode == MODE_MT:
            gq = self.hbar.conj().T @ (quad_coef[:, None] * self.hbar)
            g_inv = self._subset_inv_scatter(omega, mu / bh_slack) / LN2
            grad_l = (gq + np.diag(coef_t) + g_inv) @ point.l
            grad_l = np.tril(grad_l)
            return grad_a, grad_l
        qcoef = np.sum(quad_coef[:, None] * np.abs(self.hbar) ** 2, axis=0)
        domega = qcoef + coef_t + (mu / bh_slack) / (diag * LN2)
        grad_u = domega * _omega_of_u(point.u)
        return grad_a, grad_u

    def _advance(self, point, grads, eta, block):
        grad_a, grad_noise = grads
        if block == "a":
            return _Point(a=point.a + eta * grad_a, l=point.l, u=point.u)
        if self.mode == MODE_MT:
            return _Point(a=point.a, l=np.tril(point.l + eta * grad_noise))
        return _Point(a=point.a,
                      u=np.clip(point.u + eta * grad_noise, *_U_CLIP))

    # -- starting point -------------------------------------------------------

    def cold_start(self):
        """Matched-filter columns at 80% of each power budget, noise in the rest.

        The signal share is halved until every backhaul constraint holds
        strictly; fails loudly naming the binding constraint.
        """
        a_unit = self.hbar.conj().T.astype(complex)
        norms = np.linalg.norm(a_unit, axis=0)
        norms[norms == 0] = 1.0
        a_unit = a_unit / norms
        rho = np.sum(np.abs(a_unit) ** 2, axis=1)
        with np.errstate(divide="ignore"):
            scale = np.sqrt(np.min(np.where(rho > 0,
                                            0.8 * self.p_lim / np.maximum(rho, 1e-300),
                                            np.inf)))
        if not np.isfinite(scale):
            scale = 0.0

        gamma = 1.0
        caps = self.subset_caps[:self.n] if self.mode == MODE_MT \
            else self.subset_caps
        for _ in range(80):
            a = a_unit * (scale * np.sqrt(gamma))
            sig = np.sum(np.abs(a) ** 2, axis=1)
            omega = 0.95 * (self.p_lim - sig)
            g = np.log2(sig + omega) - np.log2(omega)
            slack = caps - g
            if np.all(slack > 1e-6 * np.maximum(1.0, caps)):
                if self.mode == MODE_MT:
                    return _Point(a=a, l=np.diag(np.sqrt(omega)).astype(complex))
                return _Point(a=a, u=_u_of_omega(omega))
            gamma *= 0.5
        worst = int(np.argmin(slack))
        raise NumericalDomainError(
            f"no feasible starting point: backhaul constraint at BS {worst} "
            f"cannot be met (capacity {caps[worst]:.3g} bps/Hz)")


def _point_from_design(design, active, mode, scale):
    a = design.a[active] / scale[:, None]
    omega = hermitize(design.omega[np.ix_(active, active)]
                      / np.outer(scale, scale))
    if mode == MODE_MT:
        try:
            l = np.linalg.cholesky(omega)
        except np.linalg.LinAlgError:
            l = np.linalg.cholesky(
                omega + 1e-12 * np.trace(omega).real / max(len(active), 1)
                * np.eye(len(active)))
        return _Point(a=a.copy(), l=l)
    return _Point(a=a.copy(), u=_u_of_omega(np.diag(omega).real))


def _interior_restart(point, shrink=0.06):
    """Back a boundary point off its active constraints.

    A design whose per-BS description rates sit at capacity leaves every
    subset constraint tight, which locally blocks all noise-correlating
    directions.  Shrinking the signal slightly (noise unchanged) opens both
    the power and every backhaul constraint at a marginal objective cost,
    giving the joint optimization room to trade description resolution for
    noise shaping.
    """
    return _Point(a=point.a * np.sqrt(1.0 - shrink), l=point.l.copy())


def optimize_dl(channel, c, p_bs, weights, mode, init=None,
                mm_tol=1e-4, mm_max_iter=60, inner_steps=40,
                barrier_rounds=3, inner_tol=1e-6):
    """Weighted-sum-rate design of (A, Omega) under backhaul and power limits.

    Multiterminal mode without an explicit `init` first solves the
    point-to-point problem and continues from its solution, which guarantees
    the multiterminal objective can only improve on it.  Zero-capacity BSs
    are silenced and dropped from all constraint sets.
    """
    c = np.asarray(c, dtype=float)
    p_bs = np.asarray(p_bs, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise DomainError("weights must be nonnegative")
    if np.any(p_bs <= 0):
        raise DomainError("power limits must be positive")
    if np.any(c < 0):
        raise DomainError("backhaul capacities must be nonnegative")
    if channel.n_bs > SUBSET_ENUM_CAP:
        raise DomainError(f"subset enumeration capped at {SUBSET_ENUM_CAP} BSs")

    n_bs, n_ms = channel.n_bs, channel.n_ms
    active = np.flatnonzero(c > 0)
    if active.size == 0:
        design = DownlinkDesign(a=np.zeros((n_bs, n_ms), dtype=complex),
                                omega=np.zeros((n_bs, n_bs), dtype=complex),
                                c=c, p_bs=p_bs, mode=mode)
        return DownlinkResult(design=design, rates=np.zeros(n_ms),
                              objective=0.0, trace=MMTrace(converged=True))

    # normalize so each BS has unit power budget and each MS unit noise:
    # the scale factors cancel in every backhaul expression, and the inner
    # solver then works on O(1) quantities regardless of the watt-level scales
    scale = np.sqrt(p_bs[active])
    hbar = channel.h_dl[:, active] * scale[None, :] \
        / np.sqrt(channel.sigma2_z_dl)[:, None]
    problem = _PrecodingProblem(hbar, weights, c[active],
                                np.ones(active.size), mode,
                                inner_steps=inner_steps,
                                barrier_rounds=barrier_rounds,
                                inner_tol=inner_tol)

    if init is None and mode == MODE_MT:
        p2p = optimize_dl(channel, c, p_bs, weights, MODE_P2P,
                          mm_tol=mm_tol, mm_max_iter=mm_max_iter,
                          inner_steps=inner_steps,
                          barrier_rounds=barrier_rounds,
                          inner_tol=inner_tol)
        init = p2p.design

    if init is None:
        start = problem.cold_start()
        incumbent = None
    else:
        incumbent = _point_from_design(init, active, mode, scale)
        # warm starts typically sit on their constraint boundaries; step
        # inside before optimizing and keep the original as the incumbent
        start = _interior_restart(incumbent) if mode == MODE_MT else incumbent

    point, trace = mm_solve(problem, start, tol=mm_tol, max_iter=mm_max_iter)

    if incumbent is not None \
            and problem.objective(incumbent) > problem.objective(point):
        point = incumbent
        trace.warnings.append("warm-start incumbent kept: refinement did "
                              "not improve on it")

    a_full = np.zeros((n_bs, n_ms), dtype=complex)
    a_full[active] = point.a * scale[:, None]
    omega_full = np.zeros((n_bs, n_bs), dtype=complex)
    omega_full[np.ix_(active, active)] = \
        problem._omega_full(point) * np.outer(scale, scale)
    design = DownlinkDesign(a=a_full, omega=hermitize(omega_full), c=c,
                            p_bs=p_bs, mode=mode)
    rates = np.array([rate_dl(design, channel, k) for k in range(n_ms)])
    report = feasible_dl(design)
    if not report.feasible:
        trace.warnings.append(
            f"returned design violates {report.worst_constraint} "
            f"by {-report.margin:.3e}")
    return DownlinkResult(design=design, rates=rates,
                          objective=float(weights @ rates), trace=trace)
