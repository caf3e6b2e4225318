"""Plain exhaustive reference oracles.

Deliberately the simplest possible implementations, sharing nothing with the
production oracles beyond the model-level reward evaluation. Used by the
test suite and the ``verify-oracles`` CLI command.
"""
from __future__ import annotations

from itertools import permutations, product
from typing import Sequence

import numpy as np

from .errors import InfeasibleError, InputError
from .markets import MarriageMarket
from .model import Allocation, BundleFamily, evaluate_reward
from .rewards import RewardFunction

__all__ = [
    "bf_maxmin_assignment",
    "bf_bundle_maxmin",
    "bf_min_envy_allocation",
    "bf_max_envy_pair",
    "bf_feasibility",
    "bf_stable_set",
    "brute_force_reference",
]


def bf_maxmin_assignment(values) -> tuple[tuple[int, ...], float]:
    values = np.asarray(values, dtype=float)
    n_agents, n_goods = values.shape
    if n_goods < n_agents:
        raise InfeasibleError("N < K")
    best_phi, best_obj = None, -np.inf
    for phi in permutations(range(n_goods), n_agents):
        obj = min(values[j, g] for j, g in enumerate(phi))
        if obj > best_obj:
            best_phi, best_obj = phi, obj
    return best_phi, float(best_obj)


def _all_allocations(family: BundleFamily):
    for combo in product(*family.feasible):
        if family.allow_overlap:
            if len(set(combo)) != len(combo):
                continue
        else:
            seen: set[int] = set()
            ok = True
            for bundle in combo:
                if seen & set(bundle):
                    ok = False
                    break
                seen |= set(bundle)
            if not ok:
                continue
        yield Allocation(combo)


def bf_bundle_maxmin(x, family: BundleFamily, rewards: Sequence[RewardFunction]):
    best_alloc, best_obj = None, -np.inf
    for alloc in _all_allocations(family):
        obj = min(
            evaluate_reward(rewards[j], x, alloc.bundles[j]) for j in range(family.n_agents)
        )
        if obj > best_obj:
            best_alloc, best_obj = alloc, obj
    if best_alloc is None:
        raise InfeasibleError("no feasible allocation")
    return best_alloc, float(best_obj)


def _envy_estimate(rewards, x_give, x_take, alloc: Allocation) -> float:
    k = alloc.n_agents
    worst = 0.0
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            gain = evaluate_reward(rewards[i], x_give, alloc.bundles[j]) - evaluate_reward(
                rewards[i], x_take, alloc.bundles[i]
            )
            worst = max(worst, gain, 0.0)
    return worst


def bf_min_envy_allocation(x_lower, x_upper, family, rewards):
    best_alloc, best_obj = None, np.inf
    for alloc in _all_allocations(family):
        obj = _envy_estimate(rewards, x_lower, x_upper, alloc)
        if obj < best_obj:
            best_alloc, best_obj = alloc, obj
    if best_alloc is None:
        raise InfeasibleError("no feasible allocation")
    return best_alloc, float(best_obj)


def bf_max_envy_pair(x_upper, x_lower, alloc: Allocation, rewards):
    best_pair, best = None, -np.inf
    for i in range(alloc.n_agents):
        for j in range(alloc.n_agents):
            if i == j:
                continue
            est = max(
                evaluate_reward(rewards[i], x_upper, alloc.bundles[j])
                - evaluate_reward(rewards[i], x_lower, alloc.bundles[i]),
                0.0,
            )
            if est > best:
                best_pair, best = (i, j), est
    return best_pair, float(best)


def bf_feasibility(eta, epsilon, x_lower, x_upper, market: MarriageMarket):
    """Decision bit only; mirrors the oracle's quantifier structure directly."""
    for p in market.matchings:
        ok = True
        for dev in market.deviations(p):
            g = max(
                x_lower[s] - x_upper[l] for s, l in zip(dev.stay_goods, dev.leave_goods)
            )
            if g < epsilon:
                ok = False
                break
        if ok:
            return 1, p
    return 0, None


def bf_stable_set(market: MarriageMarket, mu, theta: float):
    """F(mu, theta) by direct enumeration."""
    stable = []
    for p in market.matchings:
        ok = True
        for dev in market.deviations(p):
            g = max(mu[s] - mu[l] for s, l in zip(dev.stay_goods, dev.leave_goods))
            if g < theta:
                ok = False
                break
        if ok:
            stable.append(p)
    return stable


def brute_force_reference(kind: str, *args):
    dispatch = {
        "maxmin_assignment": bf_maxmin_assignment,
        "bundle_maxmin": bf_bundle_maxmin,
        "min_envy_allocation": bf_min_envy_allocation,
        "max_envy_pair": bf_max_envy_pair,
        "feasibility": bf_feasibility,
        "stable_set": bf_stable_set,
    }
    if kind not in dispatch:
        raise InputError(f"unknown reference oracle kind {kind!r}")
    return dispatch[kind](*args)
