"""Proportional-fair weight computation and long-term rate tracking."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

R_BAR_INIT = 1e-3
R_BAR_FLOOR = 1e-6


@dataclass
class FairnessState:
    """Exponentially smoothed per-MS average rates and fairness knobs."""

    r_bar: np.ndarray
    alpha: float
    beta: float
    slot: int = 0

    def __post_init__(self):
        self.r_bar = np.asarray(self.r_bar, dtype=float)
        if self.alpha < 0:
            raise DomainError("alpha must be >= 0")
        if not 0.0 <= self.beta <= 1.0:
            raise DomainError("beta must lie in [0, 1]")
        if np.any(self.r_bar <= 0):
            raise DomainError("average rates must be strictly positive")


def initial_state(n_ms, alpha, beta, r_init=R_BAR_INIT):
    return FairnessState(r_bar=np.full(n_ms, float(r_init)),
                         alpha=float(alpha), beta=float(beta), slot=0)


def weights(state):
    """Per-MS scheduling weights 1 / r_bar^alpha (all ones for alpha = 0)."""
    return state.r_bar ** (-state.alpha)


def update(state, achieved_rates):
    """Fold one slot of achieved rates into the averages (new state)."""
    achieved = np.asarray(achieved_rates, dtype=float)
    if np.any(achieved < 0):
        raise DomainError("achieved rates must be nonnegative")
    r_new = state.beta * state.r_bar + (1.0 - state.beta) * achieved
    r_new = np.maximum(r_new, R_BAR_FLOOR)
    return FairnessState(r_bar=r_new, alpha=state.alpha, beta=state.beta,
                         slot=state.slot + 1)
