"""Uplink backhaul compression and the two-step weighted-sum-rate design.

Every BS forwards a compressed version of its received signal to the control
unit, modeled as the Gaussian test channel y_hat = y + q with independent
quantization noise of power omega.  Point-to-point mode decompresses each
signal in isolation; multiterminal mode decompresses sequentially in a fixed
order so that already-recovered signals act as decoder side information,
shrinking the variance that must be described and hence the noise power an
identical backhaul capacity can afford.

The per-slot design runs in two steps: MS transmit powers are optimized for
ideal backhaul via MM on the difference-of-log-dets objective, then the
quantization noise powers follow in closed form from the backhaul capacities
held at equality.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DomainError, NumericalDomainError
from .gaussinfo import LN2, hermitize, logdet2, received_cov_ul
from .mmopt import mm_solve

MODE_P2P = "point_to_point"
MODE_MT = "multiterminal"


@dataclass
class UplinkDesign:
    """Transmit powers, quantization noise powers and decompression order.

    ``omega`` is np.inf at inactive BSs (zero backhaul capacity); ``order``
    lists the active BS indices in decompression sequence.
    """

    p: np.ndarray
    omega: np.ndarray
    order: tuple
    c: np.ndarray
    mode: str

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        if self.mode not in (MODE_P2P, MODE_MT):
            raise DomainError(f"unknown mode {self.mode!r}")
        if sorted(self.order) != sorted(set(self.order)):
            raise DomainError("decompression order must not repeat BSs")

    @property
    def active(self):
        return np.flatnonzero(self.c > 0)


@dataclass
class UplinkResult:
    design: UplinkDesign
    rates: np.ndarray
    objective: float
    trace: object


def bs_signal_variance(p, channel, i):
    """Received signal power at BS i: h_i^H Sigma_x h_i + sigma_z^2."""
    h_i = channel.h_ul[i]
    return float(np.sum(np.asarray(p) * np.abs(h_i) ** 2)
                 + channel.sigma2_z_ul[i])


def conditional_signal_variance(p, omega, order, position, channel):
    """Variance of y at order[position] given the previously recovered signals.

    Computed as the marginal variance minus a sum-of-squares reduction term,
    which keeps the result <= the marginal value in exact arithmetic and in
    floating point alike.
    """
    i = order[position]
    p = np.asarray(p, dtype=float)
    h_i = channel.h_ul[i]
    marginal = bs_signal_variance(p, channel, i)
    prev = np.asarray(order[:position], dtype=int)
    if prev.size == 0:
        return marginal
    h_prev = channel.h_ul[prev]
    cov_prev = (h_prev * p) @ h_prev.conj().T \
        + np.diag(channel.sigma2_z_ul[prev] + np.asarray(omega)[prev])
    cross = h_prev @ (p * h_i.conj())
    try:
        chol = np.linalg.cholesky(hermitize(cov_prev))
    except np.linalg.LinAlgError:
        raise NumericalDomainError(
            "side-information covariance is numerically singular")
    w = solve_triangular(chol, cross, lower=True)
    reduction = float(np.real(w.conj() @ w))
    return marginal - reduction


def _backhaul_bits(signal_var, omega):
    if not omega > 0:
        raise DomainError("quantization noise power must be > 0")
    return float(np.log2(1.0 + signal_var / omega))


def backhaul_p2p(design, channel, i):
    """Backhaul rate (bps/Hz) to forward BS i's signal without side information."""
    return _backhaul_bits(bs_signal_variance(design.p, channel, i),
                          design.omega[i])


def backhaul_wz(design, channel, position):
    """Backhaul rate at the given decompression position with side information.

    The conditional variance of the signal given the previously decompressed
    ones replaces the marginal variance; position 0 coincides with the
    point-to-point rate.
    """
    var = conditional_signal_variance(design.p, design.omega, design.order,
                                      position, channel)
    return _backhaul_bits(var, design.omega[design.order[position]])


def omega_closed_form(p, order, c, channel, mode):
    """Quantization noise powers with every backhaul constraint at equality.

    In multiterminal mode the noise powers are fixed sequentially along the
    decompression order, each step conditioning on the signals already
    recovered with their already-fixed noise powers; point-to-point mode
    uses the marginal variances.  BSs outside `order` get np.inf.
    """
    c = np.asarray(c, dtype=float)
    omega = np.full(channel.n_bs, np.inf)
    for pos, i in enumerate(order):
        if c[i] <= 0:
            raise DomainError(
                f"BS {i} has no backhaul capacity; drop it from the order")
        if mode == MODE_MT:
            var = conditional_signal_variance(p, omega, order, pos, channel)
        elif mode == MODE_P2P:
            var = bs_signal_variance(p, channel, i)
        else:
            raise DomainError(f"unknown mode {mode!r}")
        omega[i] = var / (2.0 ** c[i] - 1.0)
    return omega


def rate_ul(design, channel, k):
    """Achievable rate of MS k (bps/Hz), interference treated as noise."""
    active = design.active
    if active.size == 0:
        return 0.0
    omega = design.omega[active]
    if np.any(~np.isfinite(omega)) or np.any(omega < 0):
        raise DomainError("active BSs need finite nonnegative noise powers")
    noise = np.diag(omega).astype(complex)
    cov_all = received_cov_ul(design.p, channel, (), bs_indices=active)
    cov_wo_k = received_cov_ul(design.p, channel, (k,), bs_indices=active)
    return logdet2(noise + cov_all) - logdet2(noise + cov_wo_k)


def decompression_order(p, channel, c, n_macro):
    """Macro antennas first, then picos, each group by descending signal power."""
    active = np.flatnonzero(np.asarray(c, dtype=float) > 0)
    sv = np.array([bs_signal_variance(p, channel, i) for i in active])
    macros = active < min(n_macro, channel.n_bs)
    order = [int(i) for i in active[macros][np.argsort(-sv[macros], kind="stable")]]
    order += [int(i) for i in active[~macros][np.argsort(-sv[~macros], kind="stable")]]
    return tuple(order)


class _PowerProblem:
    """MM adapter for the ideal-backhaul power optimization.

    True objective: sum_k w_k [phi(p) - psi_k(p)] with
    phi(p)  = log2 det(D + sum_j p_j h_j h_j^H)      (concave in p)
    psi_k(p) = same with MS k excluded.
    The surrogate replaces each psi_k by its tangent at the current iterate,
    leaving a concave inner problem over the power box, solved by projected
    gradient ascent with backtracking.
    """

    def __init__(self, h, sigma2, weights, p_max, inner_steps=200,
                 inner_tol=1e-6):
        self.h = h                      # (n_bs_active, n_ms)
        self.sigma2 = sigma2
        self.weights = np.asarray(weights, dtype=float)
        self.p_max = np.asarray(p_max, dtype=float)
        self.inner_steps = inner_steps
        self.inner_tol = inner_tol
        self.n_ms = h.shape[1]

    def _cov(self, p):
        return (self.h * p) @ self.h.conj().T + np.diag(self.sigma2)

    def _phi(self, p):
        return logdet2(self._cov(p))

    def _phi_grad(self, p):
        chol = np.linalg.cholesky(hermitize(self._cov(p)))
        x = solve_triangular(chol, self.h, lower=True)
        return np.sum(np.abs(x) ** 2, axis=0) / LN2

    def objective(self, p):
        phi = self._phi(p)
        total = 0.0
        for k in range(self.n_ms):
            if self.weights[k] == 0.0:
                continue
            pk = p.copy()
            pk[k] = 0.0
            total += self.weights[k] * (phi - self._phi(pk))
        return total

    def violation(self, p):
        return float(max(np.max(p - self.p_max, initial=-np.inf),
                         np.max(-p, initial=-np.inf)))

    def interpolate(self, a, b, t):
        return a + t * (b - a)

    def step(self, p0):
        # tangent slopes of every psi_k at p0
        lin = np.zeros(self.n_ms)
        for k in range(self.n_ms):
            if self.weights[k] == 0.0:
                continue
            pk = p0.copy()
            pk[k] = 0.0
            chol = np.linalg.cholesky(hermitize(self._cov(pk)))
            x = solve_triangular(chol, self.h, lower=True)
            grad_k = np.sum(np.abs(x) ** 2, axis=0) / LN2
            grad_k[k] = 0.0
            lin += self.weights[k] * grad_k
        w_total = float(np.sum(self.weights))

        def surrogate(p):
            return w_total * self._phi(p) - float(lin @ p)

        p = p0.copy()
        f = surrogate(p)
        step = 1.0
        for _ in range(self.inner_steps):
            grad = w_total * self._phi_grad(p) - lin
            improved = False
            for _ in range(40):
                cand = np.clip(p + step * grad, 0.0, self.p_max)
                move = cand - p
                if not np.any(move):
                    break
                f_cand = surrogate(cand)
                if f_cand >= f + 1e-4 * float(grad @ move):
                    p, f_prev, f = cand, f, f_cand
                    step *= 1.3
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
            if abs(f - f_prev) <= self.inner_tol * max(1.0, abs(f_prev)):
                break
        return p


def optimize_ul(channel, c, weights, mode, p_max, n_macro=3,
                mm_tol=1e-4, mm_max_iter=100, inner_steps=200,
                inner_tol=1e-6):
    """Two-step uplink design: MM power optimization, then closed-form noise.

    Returns an UplinkResult whose trace flags non-convergence instead of
    raising.  BSs with zero capacity are dropped from all assemblies.
    """
    c = np.asarray(c, dtype=float)
    weights = np.asarray(weights, dtype=float)
    p_max = np.broadcast_to(np.asarray(p_max, dtype=float),
                            (channel.n_ms,)).copy()
    if np.any(weights < 0):
        raise DomainError("weights must be nonnegative")
    if np.any(c < 0):
        raise DomainError("backhaul capacities must be nonnegative")
    if np.any(p_max <= 0):
        raise DomainError("power limits must be positive")

    active = np.flatnonzero(c > 0)
    problem = _PowerProblem(channel.h_ul[active], channel.sigma2_z_ul[active],
                            weights, p_max, inner_steps, inner_tol)
    p_star, trace = mm_solve(problem, p_max.copy(), tol=mm_tol,
                             max_iter=mm_max_iter)

    order = decompression_order(p_star, channel, c, n_macro)
    omega = omega_closed_form(p_star, order, c, channel, mode)
    design = UplinkDesign(p=p_star, omega=omega, order=order, c=c, mode=mode)
    rates = np.array([rate_ul(design, channel, k)
                      for k in range(channel.n_ms)])
    return UplinkResult(design=design, rates=rates,
                        objective=float(weights @ rates), trace=trace)
