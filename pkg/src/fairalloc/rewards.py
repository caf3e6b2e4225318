"""Bundle reward functions.

Four kinds are provided: linear sums, odd-power sums, clipped-square sums
and expectation-of-f rewards. All are monotone in the quality vector and
Lipschitz with a declared constant, and all evaluate the empty bundle to 0.
"""
from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "RewardFunction",
    "LinearReward",
    "PowerReward",
    "ClippedSquareReward",
    "ExpectedFReward",
    "reward_from_dict",
]

# Kind codes shared with the jitted kernels.
KIND_LINEAR = 0
KIND_POWER = 1
KIND_CLIPPED_SQUARE = 2
KIND_EXPECTED_F = 3


class RewardFunction:
    """A monotone, Lipschitz map from (qualities, bundle) to a scalar reward.

    ``lipschitz_c`` is the declared constant c with
    |r(mu;S) - r(nu;S)| <= c * sum_{i in S} |mu_i - nu_i|.
    """

    kind_code: int
    lipschitz_c: float

    def value(self, qualities: np.ndarray, bundle: Iterable[int]) -> float:
        raise NotImplementedError

    def subset_values(self, qualities: np.ndarray, member: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over a subset membership matrix (S x N)."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_bundle(qualities: np.ndarray, bundle: Sequence[int]) -> np.ndarray:
    idx = np.asarray(list(bundle), dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= qualities.shape[-1]):
        raise InputError(f"bundle {tuple(bundle)} references an out-of-range good")
    return idx


class _SumReward(RewardFunction):
    """Rewards of the form sum_{i in S} g(mu_i) for a scalar transform g."""

    def transform(self, qualities: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value(self, qualities, bundle):
        qualities = np.asarray(qualities, dtype=float)
        idx = _check_bundle(qualities, bundle)
        if idx.size == 0:
            return 0.0
        return float(self.transform(qualities[idx]).sum())

    def subset_values(self, qualities, member):
        return member.astype(float) @ self.transform(np.asarray(qualities, dtype=float))


class LinearReward(_SumReward):
    """r(mu; S) = sum_{i in S} mu_i, Lipschitz constant 1."""

    kind_code = KIND_LINEAR
    lipschitz_c = 1.0

    def transform(self, qualities):
        return qualities

    def to_dict(self):
        return {"kind": "linear"}

    def __repr__(self):
        return "LinearReward()"

    def __eq__(self, other):
        return isinstance(other, LinearReward)

    def __hash__(self):
        return hash("linear")


class PowerReward(_SumReward):
    """r(mu; S) = sum_{i in S} mu_i^p for odd p.

    Odd powers keep the reward monotone on all of R; the Lipschitz constant
    p * B^(p-1) is only finite on a bounded quality box [-B, B], so B must be
    supplied alongside the instance.
    """

    kind_code = KIND_POWER

    def __init__(self, power: int, box_bound: float):
        if power < 1 or power % 2 == 0:
            raise InputError(f"power-sum exponent must be odd and positive, got {power}")
        if box_bound <= 0:
            raise InputError("quality box bound must be positive")
        self.power = int(power)
        self.box_bound = float(box_bound)
        self.lipschitz_c = self.power * self.box_bound ** (self.power - 1)

    def transform(self, qualities):
        return qualities ** self.power

    def to_dict(self):
        return {"kind": "power", "power": self.power, "box_bound": self.box_bound}

    def __repr__(self):
        return f"PowerReward(power={self.power}, box_bound={self.box_bound})"

    def __eq__(self, other):
        return (
            isinstance(other, PowerReward)
            and other.power == self.power
            and other.box_bound == self.box_bound
        )

    def __hash__(self):
        return hash(("power", self.power, self.box_bound))


class ClippedSquareReward(_SumReward):
    """r(mu; S) = sum_{i in S} max(mu_i, 0)^2, Lipschitz constant 2B on [-B, B]."""

    kind_code = KIND_CLIPPED_SQUARE

    def __init__(self, box_bound: float):
        if box_bound <= 0:
            raise InputError("quality box bound must be positive")
        self.box_bound = float(box_bound)
        self.lipschitz_c = 2.0 * self.box_bound

    def transform(self, qualities):
        return np.maximum(qualities, 0.0) ** 2

    def to_dict(self):
        return {"kind": "clipped-square", "box_bound": self.box_bound}

    def __repr__(self):
        return f"ClippedSquareReward(box_bound={self.box_bound})"

    def __eq__(self, other):
        return isinstance(other, ClippedSquareReward) and other.box_bound == self.box_bound

    def __hash__(self):
        return hash(("clipped-square", self.box_bound))


def _identity(z):
    return z


_NAMED_F: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": _identity,
    "tanh": np.tanh,
}


class ExpectedFReward(RewardFunction):
    """r(mu; S) = E[f(sum_{i in S} X_i)] with X_i = mu_i + Gaussian noise.

    f must be monotone and L-Lipschitz, which makes the reward monotone and
    L-Lipschitz in the qualities. The expectation is taken by Gauss-Hermite
    quadrature; with ``noise_sigma`` 0 this reduces to f applied to the sum.
    Only named f ("identity", "tanh", both with f(0)=0) serialize to files.
    """

    kind_code = KIND_EXPECTED_F

    def __init__(
        self,
        f: str | Callable[[np.ndarray], np.ndarray] = "identity",
        lipschitz_l: float = 1.0,
        noise_sigma: float = 0.0,
        quad_points: int = 64,
    ):
        if isinstance(f, str):
            if f not in _NAMED_F:
                raise InputError(f"unknown named f {f!r}; choose from {sorted(_NAMED_F)}")
            self.f_name: str | None = f
            self.f = _NAMED_F[f]
        else:
            self.f_name = None
            self.f = f
        if lipschitz_l <= 0:
            raise InputError("Lipschitz constant must be positive")
        if noise_sigma < 0:
            raise InputError("noise sigma must be nonnegative")
        self.lipschitz_c = float(lipschitz_l)
        self.noise_sigma = float(noise_sigma)
        # Physicists' Hermite nodes; rescale for E[g(m + s Z)], Z standard normal.
        nodes, weights = np.polynomial.hermite.hermgauss(quad_points)
        self._z = nodes * math.sqrt(2.0)
        self._w = weights / math.sqrt(math.pi)

    def _expect(self, means: np.ndarray, sizes: np.ndarray) -> np.ndarray:
        if self.noise_sigma == 0.0:
            return np.asarray(self.f(means), dtype=float)
        spread = self.noise_sigma * np.sqrt(sizes.astype(float))
        grid = means[..., None] + spread[..., None] * self._z
        return np.asarray(self.f(grid), dtype=float) @ self._w

    def value(self, qualities, bundle):
        qualities = np.asarray(qualities, dtype=float)
        idx = _check_bundle(qualities, bundle)
        if idx.size == 0:
            return 0.0
        out = self._expect(np.array([qualities[idx].sum()]), np.array([idx.size]))
        return float(out[0])

    def subset_values(self, qualities, member):
        member = np.asarray(member)
        qualities = np.asarray(qualities, dtype=float)
        means = member.astype(float) @ qualities
        sizes = member.sum(axis=1)
        vals = self._expect(means, sizes)
        vals[sizes == 0] = 0.0
        return vals

    def to_dict(self):
        if self.f_name is None:
            raise InputError("only named f rewards serialize to instance files")
        return {
            "kind": "expected-f",
            "f": self.f_name,
            "lipschitz_l": self.lipschitz_c,
            "noise_sigma": self.noise_sigma,
        }

    def __repr__(self):
        return (
            f"ExpectedFReward(f={self.f_name or self.f!r}, "
            f"lipschitz_l={self.lipschitz_c}, noise_sigma={self.noise_sigma})"
        )

    def __eq__(self, other):
        return (
            isinstance(other, ExpectedFReward)
            and self.f_name is not None
            and other.f_name == self.f_name
            and other.lipschitz_c == self.lipschitz_c
            and other.noise_sigma == self.noise_sigma
        )

    def __hash__(self):
        return hash(("expected-f", self.f_name, self.lipschitz_c, self.noise_sigma))


def reward_from_dict(d: dict) -> RewardFunction:
    """Inverse of ``RewardFunction.to_dict`` for the instance file schema."""
    kind = d.get("kind")
    if kind == "linear":
        return LinearReward()
    if kind == "power":
        return PowerReward(d["power"], d["box_bound"])
    if kind == "clipped-square":
        return ClippedSquareReward(d["box_bound"])
    if kind == "expected-f":
        return ExpectedFReward(
            d.get("f", "identity"),
            d.get("lipschitz_l", 1.0),
            d.get("noise_sigma", 0.0),
        )
    raise InputError(f"unknown reward kind {kind!r}")
