"""Exact static oracles invoked once per epoch.

Max-min assignment for unit demand, bundle max-min, min-envy allocation,
max-envy pair, and the stability feasibility test. All searches are exact;
set-valued ones enumerate exhaustively under an explicit state budget and
break ties lexicographically on the canonical encodings, so every oracle is
deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, InfeasibleError, InputError
from .markets import Deviation, MarriageMarket
from .model import Allocation, Bundle, BundleFamily, evaluate_reward
from .rewards import RewardFunction

__all__ = [
    "DEFAULT_BUDGET",
    "OracleResult",
    "FeasibilityDecision",
    "maxmin_assignment",
    "pick_min",
    "pick_min_bundle",
    "BundleSearchSpace",
    "bundle_maxmin",
    "min_envy_allocation",
    "max_envy_pair",
    "feasibility_oracle",
]

DEFAULT_BUDGET = 10_000_000


@dataclass(frozen=True)
class OracleResult:
    """An extremal allocation, its objective, and the extremal witness."""

    allocation: Allocation
    objective: float
    witness: object = None


# ---------------------------------------------------------------------------
# Unit-demand max-min assignment (bottleneck assignment)


def _augment(allowed: np.ndarray, j: int, match_good: list[int], visited: np.ndarray) -> bool:
    for g in range(allowed.shape[1]):
        if allowed[j, g] and not visited[g]:
            visited[g] = True
            if match_good[g] == -1 or _augment(allowed, match_good[g], match_good, visited):
                match_good[g] = j
                return True
    return False


def _perfect_matching_exists(allowed: np.ndarray, agents: Sequence[int]) -> bool:
    match_good = [-1] * allowed.shape[1]
    for j in agents:
        if not _augment(allowed, j, match_good, np.zeros(allowed.shape[1], dtype=bool)):
            return False
    return True


def maxmin_assignment(values) -> OracleResult:
    """Injective assignment maximizing the minimum entry values[j, phi(j)].

    Bottleneck structure: binary search over the sorted distinct values with
    bipartite perfect-matching feasibility checks, then a greedy pass that
    extracts the lexicographically smallest optimal assignment vector.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise InputError("expected a K x N value matrix")
    n_agents, n_goods = values.shape
    if n_goods < n_agents:
        raise InfeasibleError(f"cannot assign {n_agents} agents to {n_goods} goods")

    levels = np.unique(values)
    lo, hi = 0, len(levels) - 1  # invariant: levels[lo] is feasible
    if not _perfect_matching_exists(values >= levels[lo], range(n_agents)):
        raise InfeasibleError("no injective assignment exists")
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if _perfect_matching_exists(values >= levels[mid], range(n_agents)):
            lo = mid
        else:
            hi = mid - 1
    objective = float(levels[lo])

    allowed = values >= objective
    assignment: list[int] = []
    used = np.zeros(n_goods, dtype=bool)
    for j in range(n_agents):
        for g in range(n_goods):
            if used[g] or not allowed[j, g]:
                continue
            trial = allowed.copy()
            trial[:, used] = False
            trial[:, g] = False
            if _perfect_matching_exists(trial, range(j + 1, n_agents)):
                assignment.append(g)
                used[g] = True
                break
        else:  # pragma: no cover - feasibility guaranteed above
            raise InfeasibleError("assignment extraction failed")

    alloc = Allocation(tuple((g,) for g in assignment))
    agent, value = pick_min(values, alloc)
    return OracleResult(alloc, objective, witness=agent)


def pick_min(values, phi: Allocation) -> tuple[int, float]:
    """Agent attaining min_j values[j, phi(j)], lowest index on ties."""
    values = np.asarray(values, dtype=float)
    best_agent, best_value = 0, np.inf
    for j, g in enumerate(phi.assignment()):
        v = float(values[j, g]) if values.ndim == 2 else float(values[g])
        if v < best_value:
            best_agent, best_value = j, v
    return best_agent, best_value


def pick_min_bundle(x, phi: Allocation, rewards: Sequence[RewardFunction]) -> tuple[int, float]:
    """Agent with the lowest bundle reward under qualities x; lowest index wins."""
    best_agent, best_value = 0, np.inf
    for j, bundle in enumerate(phi.bundles):
        v = evaluate_reward(rewards[j], x, bundle)
        if v < best_value:
            best_agent, best_value = j, v
    return best_agent, best_value


# ---------------------------------------------------------------------------
# Enumerated bundle allocation spaces


class BundleSearchSpace:
    """Materialized allocation set M for a bundle family.

    Subsets get a global canonical (lexicographic) order; allocations are
    enumerated agent by agent in that order, so row order equals the
    lexicographic order on canonical bundle encodings used for tie-breaks.
    """

    def __init__(self, family: BundleFamily, n_goods: int, budget: int | None = None):
        if budget is None:  # resolved late so callers can tune the module default
            budget = DEFAULT_BUDGET
        self.family = family
        self.n_goods = n_goods
        all_bundles = sorted({b for agent in family.feasible for b in agent})
        self.subsets: tuple[Bundle, ...] = tuple(all_bundles)
        index = {b: i for i, b in enumerate(self.subsets)}
        self.member = np.zeros((len(self.subsets), n_goods), dtype=bool)
        for i, b in enumerate(self.subsets):
            self.member[i, list(b)] = True
        self.agent_options = [
            np.array([index[b] for b in agent], dtype=np.int64) for agent in family.feasible
        ]
        masks = [sum(1 << g for g in b) for b in self.subsets]

        rows: list[list[int]] = []
        visited = 0
        k = family.n_agents
        choice = [0] * k

        def recurse(j: int, used_mask: int) -> None:
            nonlocal visited
            if j == k:
                rows.append(choice.copy())
                return
            for s in self.agent_options[j]:
                visited += 1
                if visited > budget:
                    raise BudgetExceededError(budget)
                if family.allow_overlap:
                    if s in choice[:j]:
                        continue
                    choice[j] = int(s)
                    recurse(j + 1, used_mask)
                else:
                    if masks[s] & used_mask:
                        continue
                    choice[j] = int(s)
                    recurse(j + 1, used_mask | masks[s])

        recurse(0, 0)
        if not rows:
            raise InfeasibleError("the bundle family admits no feasible allocation")
        self.allocations = np.array(rows, dtype=np.int64)

    @property
    def n_allocations(self) -> int:
        return self.allocations.shape[0]

    def allocation_at(self, row: int) -> Allocation:
        return Allocation(tuple(self.subsets[s] for s in self.allocations[row]))

    def agent_values(self, x, rewards: Sequence[RewardFunction]) -> list[np.ndarray]:
        """Per-agent subset values, computed once per distinct reward function."""
        x = np.asarray(x, dtype=float)
        cache: list[tuple[RewardFunction, np.ndarray]] = []
        out = []
        for rf in rewards:
            for known, vals in cache:
                if known == rf:
                    out.append(vals)
                    break
            else:
                vals = rf.subset_values(x, self.member)
                cache.append((rf, vals))
                out.append(vals)
        return out

    def maxmin_objectives(self, x, rewards: Sequence[RewardFunction]) -> np.ndarray:
        vals = self.agent_values(x, rewards)
        per_agent = np.stack(
            [vals[j][self.allocations[:, j]] for j in range(self.family.n_agents)]
        )
        return per_agent.min(axis=0)

    def envy_objectives(self, x_give, x_take, rewards: Sequence[RewardFunction]) -> np.ndarray:
        """Estimated allocation envy per row: max over ordered pairs of
        (r^i(x_give; phi(j)) - r^i(x_take; phi(i)))^+."""
        give = self.agent_values(x_give, rewards)
        take = self.agent_values(x_take, rewards)
        k = self.family.n_agents
        out = np.zeros(self.n_allocations)
        for i in range(k):
            own = take[i][self.allocations[:, i]]
            for j in range(k):
                if i == j:
                    continue
                gain = give[i][self.allocations[:, j]] - own
                np.maximum(out, np.maximum(gain, 0.0), out=out)
        return out


def _space_for(bundles: BundleFamily, n_goods: int, budget: int | None,
               space: BundleSearchSpace | None) -> BundleSearchSpace:
    if space is not None:
        return space
    return BundleSearchSpace(bundles, n_goods, budget=budget)


def bundle_maxmin(
    x,
    bundles: BundleFamily,
    rewards: Sequence[RewardFunction],
    n_agents: int,
    budget: int | None = None,
    space: BundleSearchSpace | None = None,
) -> OracleResult:
    """Exact argmax over M of min_j r^j(x; phi(j)); first row wins ties."""
    if bundles.n_agents != n_agents or len(rewards) != n_agents:
        raise InputError("bundle family / rewards must match the agent count")
    x = np.asarray(x, dtype=float)
    space = _space_for(bundles, x.shape[0], budget, space)
    objectives = space.maxmin_objectives(x, rewards)
    row = int(np.argmax(objectives))
    alloc = space.allocation_at(row)
    agent, _ = pick_min_bundle(x, alloc, rewards)
    return OracleResult(alloc, float(objectives[row]), witness=agent)


def min_envy_allocation(
    x_lower,
    x_upper,
    bundles: BundleFamily,
    rewards: Sequence[RewardFunction],
    n_agents: int,
    budget: int | None = None,
    space: BundleSearchSpace | None = None,
) -> OracleResult:
    """Exact argmin over M of the (lower-estimated) allocation envy."""
    if n_agents < 2:
        raise InputError("envy needs at least two agents")
    x_lower = np.asarray(x_lower, dtype=float)
    space = _space_for(bundles, x_lower.shape[0], budget, space)
    objectives = space.envy_objectives(x_lower, x_upper, rewards)
    row = int(np.argmin(objectives))
    return OracleResult(space.allocation_at(row), float(objectives[row]))


def max_envy_pair(
    x_upper,
    x_lower,
    phi: Allocation,
    rewards: Sequence[RewardFunction],
) -> tuple[int, int]:
    """Ordered pair maximizing the upper envy estimate; lexicographic ties."""
    k = phi.n_agents
    if k < 2:
        raise InputError("envy needs at least two agents")
    best_pair, best_value = (0, 1), -np.inf
    for i in range(k):
        own = evaluate_reward(rewards[i], x_lower, phi.bundles[i])
        for j in range(k):
            if i == j:
                continue
            est = max(evaluate_reward(rewards[i], x_upper, phi.bundles[j]) - own, 0.0)
            if est > best_value:
                best_pair, best_value = (i, j), est
    return best_pair


# ---------------------------------------------------------------------------
# Stability feasibility oracle


@dataclass(frozen=True)
class FeasibilityDecision:
    """Outcome of the stability test at one epoch.

    ``decision`` is 1 when some matching's lower-estimated coalition benefits
    all clear epsilon. ``witness`` is None in that case; otherwise it is a
    deviation of the returned matching whose lower estimate falls below
    epsilon (the evidence for not declaring stability).
    """

    decision: int
    matching: tuple[int, ...]
    allocation: Allocation
    coalition: tuple[int, ...] | None
    deviation: Deviation | None


def _benefit(x_stay, x_leave, dev: Deviation, rewards) -> float:
    best = -np.inf
    for agent, stay, leave in zip(dev.agents, dev.stay_goods, dev.leave_goods):
        if rewards is None:
            val = float(x_stay[stay] - x_leave[leave])
        else:
            val = evaluate_reward(rewards[agent], x_stay, (stay,)) - evaluate_reward(
                rewards[agent], x_leave, (leave,)
            )
        best = max(best, val)
    return best


def feasibility_oracle(
    eta: float,
    epsilon: float,
    x_lower,
    x_upper,
    market: MarriageMarket,
    rewards: Sequence[RewardFunction] | None = None,
) -> FeasibilityDecision:
    """Stability test over the confidence box [x_lower, x_upper].

    Decision 1: return the lexicographically first matching whose lower
    estimates clear epsilon for every coalition. Decision 0: prefer a
    matching whose upper estimates clear eta everywhere (it could still be
    eta-stable), otherwise the first matching; either way also return the
    first deviation whose lower estimate is below epsilon.
    """
    x_lower = np.asarray(x_lower, dtype=float)
    x_upper = np.asarray(x_upper, dtype=float)

    lower_cache: dict[tuple[int, ...], list[tuple[Deviation, float]]] = {}
    for p in market.matchings:
        devs = [(d, _benefit(x_lower, x_upper, d, rewards)) for d in market.deviations(p)]
        lower_cache[p] = devs
        if all(v >= epsilon for _, v in devs):
            return FeasibilityDecision(1, p, market.matching_allocation(p), None, None)

    chosen = None
    for p in market.matchings:
        if all(
            _benefit(x_upper, x_lower, d, rewards) >= eta for d in market.deviations(p)
        ):
            chosen = p
            break
    if chosen is None:
        chosen = market.matchings[0]
    witness = next(d for d, v in lower_cache[chosen] if v < epsilon)
    return FeasibilityDecision(
        0, chosen, market.matching_allocation(chosen), witness.agents, witness
    )
