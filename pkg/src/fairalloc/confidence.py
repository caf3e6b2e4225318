"""Per-arm feedback statistics and the shared UCB/LCB estimators."""
from __future__ import annotations

import math

import numpy as np

from .errors import InputError, UnpulledArmError

__all__ = ["confidence_bonus", "ConfidenceState"]


def confidence_bonus(sigma: float, alpha: float, t: float, count: float) -> float:
    """Exploration bonus sqrt(2 sigma^2 alpha ln(t) / count).

    ``t`` is the current epoch and ``count`` the number of pulls through the
    previous epoch; natural logarithm (log t^alpha = alpha ln t).
    """
    if count < 1:
        raise UnpulledArmError("bonus undefined before the arm's first pull")
    if t < 2:
        raise InputError("confidence bounds need epoch t >= 2")
    return math.sqrt(2.0 * sigma * sigma * alpha * math.log(t) / count)


class ConfidenceState:
    """Pull counts and running means for a flat set of arms.

    Means use the numerically stable incremental update, so a constant sample
    stream reproduces the constant exactly. The state carries the global
    epoch clock ``t``; bounds at epoch t are evaluated before that epoch's
    feedback is recorded, so counts play the role of T_i(t-1).
    """

    def __init__(self, n_arms: int, alpha: float = 3.0, sigma: float = 1.0):
        if alpha <= 2:
            raise InputError(f"alpha must exceed 2, got {alpha}")
        if sigma < 0:
            raise InputError("sigma must be nonnegative")
        self.n_arms = int(n_arms)
        self.alpha = float(alpha)
        self.sigma = float(sigma)
        self.counts = np.zeros(self.n_arms, dtype=np.int64)
        self.means = np.zeros(self.n_arms, dtype=np.float64)
        self.t = 0

    def set_epoch(self, t: int) -> None:
        self.t = int(t)

    def record(self, arm: int, sample: float) -> "ConfidenceState":
        if not (0 <= arm < self.n_arms):
            raise InputError(f"arm {arm} out of range")
        if not math.isfinite(sample):
            raise InputError("samples must be finite")
        self.counts[arm] += 1
        self.means[arm] += (sample - self.means[arm]) / self.counts[arm]
        return self

    def bonus(self, arm: int) -> float:
        return confidence_bonus(self.sigma, self.alpha, self.t, self.counts[arm])

    def ucb(self, arm: int) -> float:
        return float(self.means[arm] + self.bonus(arm))

    def lcb(self, arm: int) -> float:
        return float(self.means[arm] - self.bonus(arm))

    def bonus_vector(self) -> np.ndarray:
        if np.any(self.counts < 1):
            raise UnpulledArmError("complete the initialization round first")
        if self.t < 2:
            raise InputError("confidence bounds need epoch t >= 2")
        coeff = math.sqrt(2.0 * self.sigma * self.sigma * self.alpha * math.log(self.t))
        return coeff / np.sqrt(self.counts)

    def ucb_vector(self) -> np.ndarray:
        return self.means + self.bonus_vector()

    def lcb_vector(self) -> np.ndarray:
        return self.means - self.bonus_vector()
