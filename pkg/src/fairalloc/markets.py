"""Matching markets with coalition deviations.

Only the marriage (dating) model is instantiated here. The duck-typed
interface the feasibility oracle relies on — ``matchings``, ``n_goods``,
``n_agents``, ``matching_goods(key)``, ``deviations(key)`` — is what another
market variant (couples, many-to-one) would have to provide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations
from typing import Iterator, Sequence

import numpy as np

from .errors import InputError
from .model import Allocation

__all__ = ["Deviation", "MarriageMarket", "market_to_dict", "market_from_dict",
           "theta_stable_set", "matching_margin"]


@dataclass(frozen=True)
class Deviation:
    """One coalition's deviating assignment relative to a matching.

    ``agents`` lists the coalition L (market-wide agent indices);
    ``stay_goods[k]`` / ``leave_goods[k]`` are the single goods agent
    ``agents[k]`` consumes under the current matching / the deviation.
    """

    agents: tuple[int, ...]
    stay_goods: tuple[int, ...]
    leave_goods: tuple[int, ...]


@dataclass(frozen=True)
class MarriageMarket:
    """A one-to-one two-sided market over directed pair goods.

    Goods are directed: good (m, w) carries man m's quality for woman w and
    good (w, m) carries woman w's quality for man m, so a market with M men
    and W women has N = 2*M*W goods. A matching is a permutation p with man m
    matched to woman p[m]; ``matchings`` is the feasible set M*, which may be
    a strict subset of all permutations. Coalitions are unmatched cross pairs
    (kappa = 2) and each has exactly one deviating assignment: the pair
    matches with each other.
    """

    n_men: int
    n_women: int
    matchings: tuple[tuple[int, ...], ...]
    kappa: int = 2
    eta: float = 1.0
    epsilon: float = 0.5
    stability_gap: float | None = None

    def __post_init__(self):
        if self.n_men != self.n_women:
            raise InputError("one-to-one marriage markets need equal sides")
        if not self.matchings:
            raise InputError("the feasible matching set must be nonempty")
        seen = set()
        for p in self.matchings:
            if tuple(sorted(p)) != tuple(range(self.n_women)):
                raise InputError(f"matching {p} is not a permutation")
            if p in seen:
                raise InputError(f"duplicate matching {p}")
            seen.add(p)
        object.__setattr__(self, "matchings", tuple(sorted(self.matchings)))
        if self.kappa < 2:
            raise InputError("kappa must allow at least pair coalitions")
        if self.stability_gap is not None:
            if not (self.eta - self.stability_gap < self.epsilon < self.eta):
                raise InputError("epsilon must lie in (eta - gap, eta)")

    @staticmethod
    def full(n: int, **kwargs) -> "MarriageMarket":
        """All n! perfect matchings."""
        return MarriageMarket(n, n, tuple(permutations(range(n))), **kwargs)

    @property
    def n_goods(self) -> int:
        return 2 * self.n_men * self.n_women

    @property
    def n_agents(self) -> int:
        return self.n_men + self.n_women

    def man_good(self, m: int, w: int) -> int:
        return m * self.n_women + w

    def woman_good(self, w: int, m: int) -> int:
        return self.n_men * self.n_women + w * self.n_men + m

    def matching_goods(self, matching: tuple[int, ...]) -> tuple[int, ...]:
        """Per-agent consumed good (men first, then women)."""
        inverse = [0] * self.n_women
        for m, w in enumerate(matching):
            inverse[w] = m
        men = [self.man_good(m, w) for m, w in enumerate(matching)]
        women = [self.woman_good(w, inverse[w]) for w in range(self.n_women)]
        return tuple(men + women)

    def matching_allocation(self, matching: tuple[int, ...]) -> Allocation:
        return Allocation(tuple((g,) for g in self.matching_goods(matching)))

    def deviations(self, matching: tuple[int, ...]) -> Iterator[Deviation]:
        """One deviation per unmatched cross pair, in lexicographic order."""
        goods = self.matching_goods(matching)
        for m in range(self.n_men):
            for w in range(self.n_women):
                if matching[m] == w:
                    continue
                yield Deviation(
                    agents=(m, self.n_men + w),
                    stay_goods=(goods[m], goods[self.n_men + w]),
                    leave_goods=(self.man_good(m, w), self.woman_good(w, m)),
                )

    def quality_vector(self, men_values: Sequence[Sequence[float]],
                       women_values: Sequence[Sequence[float]]) -> np.ndarray:
        """Pack men_values[m][w] and women_values[w][m] into the good layout."""
        mu = np.empty(self.n_goods)
        for m in range(self.n_men):
            for w in range(self.n_women):
                mu[self.man_good(m, w)] = men_values[m][w]
                mu[self.woman_good(w, m)] = women_values[w][m]
        return mu


def market_to_dict(market: MarriageMarket) -> dict:
    """Instance-file representation; inverse of ``market_from_dict``."""
    d: dict = {
        "kind": "marriage",
        "n_men": market.n_men,
        "n_women": market.n_women,
        "kappa": market.kappa,
        "eta": market.eta,
        "epsilon": market.epsilon,
        "matchings": [list(p) for p in market.matchings],
    }
    if market.stability_gap is not None:
        d["stability_gap"] = market.stability_gap
    return d


def market_from_dict(spec, n_goods: int | None = None) -> MarriageMarket:
    """Build a market from the instance-file ``market`` block.

    Sizes may be given explicitly or inferred from the good count
    (N = 2 * n^2 for an n x n market); ``matchings`` defaults to all
    permutations.
    """
    if spec.get("kind") != "marriage":
        raise InputError(f"unknown market kind {spec.get('kind')!r}")
    if "n_men" in spec:
        n_men, n_women = int(spec["n_men"]), int(spec["n_women"])
    elif n_goods is not None:
        side = round(math.sqrt(n_goods / 2))
        if 2 * side * side != n_goods:
            raise InputError("cannot infer market size from the good count")
        n_men = n_women = side
    else:
        raise InputError("market block needs n_men/n_women or a good count")
    if "matchings" in spec:
        matchings = tuple(tuple(int(w) for w in p) for p in spec["matchings"])
    else:
        matchings = tuple(permutations(range(n_women)))
    return MarriageMarket(
        n_men,
        n_women,
        matchings,
        kappa=int(spec.get("kappa", 2)),
        eta=float(spec["eta"]),
        epsilon=float(spec["epsilon"]),
        stability_gap=spec.get("stability_gap"),
    )


def matching_margin(market: MarriageMarket, mu: np.ndarray, matching: tuple[int, ...]) -> float:
    """min over deviations of g^L(mu; phi -> phi'); +inf with no deviations."""
    mu = np.asarray(mu, dtype=float)
    margin = np.inf
    for dev in market.deviations(matching):
        g = max(mu[s] - mu[l] for s, l in zip(dev.stay_goods, dev.leave_goods))
        margin = min(margin, g)
    return float(margin)


def theta_stable_set(market: MarriageMarket, mu: np.ndarray, theta: float) -> list[tuple[int, ...]]:
    """F(mu, theta): matchings whose every coalition keeps benefit >= theta."""
    return [p for p in market.matchings if matching_margin(market, mu, p) >= theta]
