"""The four online learners and the three baselines as step-state machines.

Each learner exposes ``init_arm`` (the deterministic initialization pulls)
and ``step`` (given the epoch's confidence state, emit the allocation and
the feedback query). ``run_episode`` drives a learner against a noise panel
and returns a RegretLedger; when the numba backend is active and the
instance family is supported it delegates to the fused kernels in
``fastpath`` (same semantics, tested for equality).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bruteforce import bf_bundle_maxmin, bf_maxmin_assignment, bf_stable_set
from .confidence import ConfidenceState
from .environments import NoiseModel, noise_panel
from .errors import InputError
from .ledger import RegretLedger
from .markets import MarriageMarket
from .model import Allocation, ProblemInstance
from .oracles import BundleSearchSpace, feasibility_oracle, maxmin_assignment

__all__ = [
    "EpochDecision",
    "DuelingUlcb",
    "SecondBestUcb",
    "SequentialUcb",
    "UcbOnlyMaxmin",
    "MaxminBundleUlcb",
    "EnvyUlcb",
    "FeasibilityUlcb",
    "ALGORITHMS",
    "make_learner",
    "run_episode",
]


@dataclass
class EpochDecision:
    """One epoch's output: the allocation plus the feedback query.

    ``feedback_arms`` are flat arm indices (base goods, or row-major
    agent-good pairs for agent-specific unit demand). ``feedback_agents``
    is the set of agents the feedback is collected from; its size obeys the
    per-setting budget (1 for max-min, 2 for envy, <= kappa for stability).
    """

    allocation: Allocation | None
    feedback_arms: tuple[int, ...]
    feedback_agents: tuple[int, ...]
    selected_goods: tuple[int, ...] | None = None
    space_row: int | None = None
    decision_bit: int | None = None
    coalition: tuple[int, ...] | None = None


def _topk_picks(values: np.ndarray, k: int) -> list[int]:
    """K repeated argmaxes with strict comparison; first index wins ties."""
    picked: list[int] = []
    taken = np.zeros(values.shape[0], dtype=bool)
    for _ in range(k):
        best, best_v = -1, -np.inf
        for i in range(values.shape[0]):
            if not taken[i] and values[i] > best_v:
                best, best_v = i, values[i]
        picked.append(best)
        taken[best] = True
    return picked


def _argmin_over(indices, values) -> int:
    best, best_v = indices[0], np.inf
    for i in indices:
        if values[i] < best_v:
            best, best_v = i, values[i]
    return int(best)


class _UnitDemandBase:
    """Shared plumbing for unit-demand learners (N shared or K*N arms)."""

    def __init__(self, instance: ProblemInstance):
        if instance.bundles is not None:
            raise InputError("unit-demand learner on a bundle instance")
        self.instance = instance
        self.k = instance.n_agents
        self.n = instance.n_goods
        self.matrix_mode = instance.agent_specific
        self.n_arms = self.k * self.n if self.matrix_mode else self.n
        self.init_len = self.n_arms

    def init_arm(self, t: int) -> int:
        return t - 1  # row-major: agent t // N, good t % N


class DuelingUlcb(_UnitDemandBase):
    """Algorithm: max-min allocation by UCB, feedback arm by lowest LCB."""

    name = "dueling-ulcb"

    def step(self, state: ConfidenceState) -> EpochDecision:
        ucb, lcb = state.ucb_vector(), state.lcb_vector()
        if self.matrix_mode:
            res = maxmin_assignment(ucb.reshape(self.k, self.n))
            phi = res.allocation.assignment()
            arms = [j * self.n + phi[j] for j in range(self.k)]
            arm = _argmin_over(arms, lcb)
            return EpochDecision(
                allocation=res.allocation,
                feedback_arms=(arm,),
                feedback_agents=(arm // self.n,),
            )
        picks = _topk_picks(ucb, self.k)
        arm = _argmin_over(sorted(picks), lcb)
        return EpochDecision(
            allocation=Allocation(tuple((g,) for g in picks)),
            feedback_arms=(arm,),
            feedback_agents=(picks.index(arm),),
            selected_goods=tuple(picks),
        )


class UcbOnlyMaxmin(_UnitDemandBase):
    """Benchmark without the LCB step: feedback arm has the lowest UCB."""

    name = "ucb-only"

    def step(self, state: ConfidenceState) -> EpochDecision:
        ucb = state.ucb_vector()
        if self.matrix_mode:
            res = maxmin_assignment(ucb.reshape(self.k, self.n))
            phi = res.allocation.assignment()
            arms = [j * self.n + phi[j] for j in range(self.k)]
            arm = _argmin_over(arms, ucb)
            return EpochDecision(
                allocation=res.allocation,
                feedback_arms=(arm,),
                feedback_agents=(arm // self.n,),
            )
        picks = _topk_picks(ucb, self.k)
        arm = _argmin_over(sorted(picks), ucb)
        return EpochDecision(
            allocation=Allocation(tuple((g,) for g in picks)),
            feedback_arms=(arm,),
            feedback_agents=(picks.index(arm),),
            selected_goods=tuple(picks),
        )


class _ArmBaseline(_UnitDemandBase):
    """Baselines that emit a single arm as their answer (no allocation)."""

    def __init__(self, instance: ProblemInstance):
        super().__init__(instance)
        if self.matrix_mode:
            raise InputError(f"{self.name} is defined for agent-shared instances")

    def _pick(self, picks: list[int], t: int) -> int:
        raise NotImplementedError

    def step(self, state: ConfidenceState) -> EpochDecision:
        picks = _topk_picks(state.ucb_vector(), self.k)
        arm = self._pick(picks, state.t)
        return EpochDecision(
            allocation=None,
            feedback_arms=(arm,),
            feedback_agents=(picks.index(arm),),
            selected_goods=tuple(picks),
        )


class SecondBestUcb(_ArmBaseline):
    """Always queries the arm with the K-th highest UCB."""

    name = "second-best-ucb"

    def _pick(self, picks, t):
        return picks[-1]


class SequentialUcb(_ArmBaseline):
    """Alternates: top UCB on odd epochs, K-th highest on even epochs."""

    name = "sequential-ucb"

    def _pick(self, picks, t):
        return picks[0] if t % 2 == 1 else picks[-1]


class _BundleBase:
    def __init__(self, instance: ProblemInstance, space: BundleSearchSpace | None = None):
        if instance.bundles is None:
            raise InputError("bundle learner needs a bundle instance")
        self.instance = instance
        self.k = instance.n_agents
        self.n = instance.n_goods
        self.n_arms = self.n
        self.init_len = self.n
        self.rewards = instance.reward_fns()
        self.space = space or BundleSearchSpace(instance.bundles, self.n)

    def init_arm(self, t: int) -> int:
        return t - 1

    def _agent_values(self, x):
        return self.space.agent_values(x, self.rewards)


class MaxminBundleUlcb(_BundleBase):
    """Algorithm: bundle max-min on UCBs, reveal the min-LCB-reward agent."""

    name = "maxmin-bundle-ulcb"

    def __init__(self, instance, space=None, use_lcb: bool = True):
        super().__init__(instance, space)
        self.use_lcb = use_lcb

    def step(self, state: ConfidenceState) -> EpochDecision:
        ucb, lcb = state.ucb_vector(), state.lcb_vector()
        row = int(np.argmax(self.space.maxmin_objectives(ucb, self.rewards)))
        alloc_row = self.space.allocations[row]
        pick_values = self._agent_values(lcb if self.use_lcb else ucb)
        agent, best = 0, np.inf
        for j in range(self.k):
            v = pick_values[j][alloc_row[j]]
            if v < best:
                agent, best = j, v
        goods = tuple(int(g) for g in np.flatnonzero(self.space.member[alloc_row[agent]]))
        return EpochDecision(
            allocation=self.space.allocation_at(row),
            feedback_arms=goods,
            feedback_agents=(agent,),
            space_row=row,
        )


class UcbOnlyBundle(MaxminBundleUlcb):
    """Bundle benchmark: max-min and the revealed agent both from UCBs."""

    name = "ucb-only"

    def __init__(self, instance, space=None):
        super().__init__(instance, space, use_lcb=False)


class EnvyUlcb(_BundleBase):
    """Algorithm: min-envy allocation from lower estimates, then the
    max-upper-estimate envy pair; reveals both bundles (two agents)."""

    name = "envy-ulcb"

    def __init__(self, instance, space=None):
        super().__init__(instance, space)
        if self.k < 2:
            raise InputError("envy needs at least two agents")

    def step(self, state: ConfidenceState) -> EpochDecision:
        ucb, lcb = state.ucb_vector(), state.lcb_vector()
        row = int(np.argmin(self.space.envy_objectives(lcb, ucb, self.rewards)))
        alloc_row = self.space.allocations[row]
        up = self._agent_values(ucb)
        low = self._agent_values(lcb)
        best_pair, best = (0, 1), -np.inf
        for i in range(self.k):
            own = low[i][alloc_row[i]]
            for j in range(self.k):
                if i == j:
                    continue
                est = max(up[i][alloc_row[j]] - own, 0.0)
                if est > best:
                    best_pair, best = (i, j), est
        i_t, j_t = best_pair
        mask = self.space.member[alloc_row[i_t]] | self.space.member[alloc_row[j_t]]
        goods = tuple(int(g) for g in np.flatnonzero(mask))
        if not goods:  # both chosen bundles empty: keep exploring
            goods = (int(np.argmin(state.counts)),)
        return EpochDecision(
            allocation=self.space.allocation_at(row),
            feedback_arms=goods,
            feedback_agents=best_pair,
            space_row=row,
        )


class FeasibilityUlcb:
    """Algorithm: stability hypothesis test with coalition feedback."""

    name = "feasibility-ulcb"

    def __init__(self, instance: ProblemInstance, market: MarriageMarket):
        self.instance = instance
        self.market = market
        self.n = instance.n_goods
        self.n_arms = self.n
        self.init_len = self.n
        if market.n_goods != self.n:
            raise InputError("market and instance disagree on the good count")

    def init_arm(self, t: int) -> int:
        return t - 1

    def step(self, state: ConfidenceState) -> EpochDecision:
        res = feasibility_oracle(
            self.market.eta,
            self.market.epsilon,
            state.lcb_vector(),
            state.ucb_vector(),
            self.market,
        )
        if res.decision == 1:
            # No witness to probe; keep the tail-bound machinery alive by
            # sampling the least-pulled arm.
            arm = int(np.argmin(state.counts))
            return EpochDecision(
                allocation=res.allocation,
                feedback_arms=(arm,),
                feedback_agents=(),
                decision_bit=1,
            )
        dev = res.deviation
        goods = tuple(sorted(set(dev.stay_goods) | set(dev.leave_goods)))
        return EpochDecision(
            allocation=res.allocation,
            feedback_arms=goods,
            feedback_agents=dev.agents,
            decision_bit=0,
            coalition=dev.agents,
        )


ALGORITHMS = {
    "dueling-ulcb": DuelingUlcb,
    "second-best-ucb": SecondBestUcb,
    "sequential-ucb": SequentialUcb,
    "ucb-only": UcbOnlyMaxmin,
    "maxmin-bundle-ulcb": MaxminBundleUlcb,
    "envy-ulcb": EnvyUlcb,
    "feasibility-ulcb": FeasibilityUlcb,
}


def make_learner(algorithm: str, instance: ProblemInstance, market: MarriageMarket | None = None):
    if algorithm not in ALGORITHMS:
        raise InputError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}")
    if algorithm == "feasibility-ulcb":
        if market is None:
            raise InputError("feasibility-ulcb needs a market")
        return FeasibilityUlcb(instance, market)
    if algorithm == "ucb-only" and instance.bundles is not None:
        return UcbOnlyBundle(instance)
    if algorithm in ("maxmin-bundle-ulcb", "envy-ulcb"):
        return ALGORITHMS[algorithm](instance)
    return ALGORITHMS[algorithm](instance)


# ---------------------------------------------------------------------------
# Episode driver


class _RegretScorer:
    """Instantaneous regret against the brute-force optimum from true mu."""

    def __init__(self, learner, instance: ProblemInstance, market, hypothesis):
        self.instance = instance
        self.kind = "maxmin"
        if isinstance(learner, FeasibilityUlcb):
            self.kind = "stability"
            self.hypothesis = hypothesis or (
                "ha" if bf_stable_set(market, instance.qualities, 0.0) else "h0"
            )
            eta = market.eta
            self.feasible = {
                p: True for p in bf_stable_set(market, instance.qualities, eta)
            }
        elif isinstance(learner, EnvyUlcb):
            self.kind = "envy"
        if isinstance(learner, (MaxminBundleUlcb, EnvyUlcb)):
            space = learner.space
            truth = space.agent_values(instance.qualities, learner.rewards)
            per_agent = np.stack(
                [truth[j][space.allocations[:, j]] for j in range(learner.k)]
            )
            self.row_min = per_agent.min(axis=0)
            if self.kind == "envy":
                self.row_envy = space.envy_objectives(
                    instance.qualities, instance.qualities, learner.rewards
                )
                self.opt = float(self.row_envy.min())
            else:
                _, self.opt = bf_bundle_maxmin(
                    instance.qualities, instance.bundles, learner.rewards
                )
        elif self.kind == "maxmin":
            mu = instance.qualities
            if instance.agent_specific:
                _, self.opt = bf_maxmin_assignment(mu)
            else:
                self.opt = float(np.sort(mu)[::-1][instance.n_agents - 1])

    def score(self, dec: EpochDecision) -> float:
        mu = self.instance.qualities
        if self.kind == "envy":
            return float(self.row_envy[dec.space_row] - self.opt)
        if dec.space_row is not None:
            return float(self.opt - self.row_min[dec.space_row])
        if dec.allocation is None:  # arm-emitting baseline
            arm = dec.feedback_arms[0]
            return float(abs(self.opt - mu[arm]))
        if self.instance.agent_specific:
            phi = dec.allocation.assignment()
            value = min(mu[j, g] for j, g in enumerate(phi))
        else:
            value = min(mu[g] for g in dec.selected_goods)
        return float(self.opt - value)


def run_episode(
    algorithm,
    instance: ProblemInstance,
    horizon: int,
    seed: int,
    market: MarriageMarket | None = None,
    hypothesis: str | None = None,
    noise: NoiseModel | None = None,
    backend: str | None = None,
    alpha: float = 3.0,
) -> RegretLedger:
    """Drive one learner for ``horizon`` epochs and account its regret.

    Initialization epochs (one pull per arm) record zero regret since the
    pseudocode emits no allocation during them. Replaying the same seed
    yields a bit-identical ledger.
    """
    learner = make_learner(algorithm, instance, market) if isinstance(algorithm, str) else algorithm
    if horizon <= learner.init_len:
        raise InputError(
            f"horizon {horizon} must exceed the initialization length {learner.init_len}"
        )
    if noise is None:
        noise = NoiseModel("gaussian", instance.noise_sigma, seed)

    from . import fastpath

    resolved = fastpath.resolve_backend(backend)
    if resolved == "numba" and fastpath.supports(learner):
        return fastpath.run_episode_fast(learner, instance, horizon, noise, hypothesis, alpha)

    scorer = _RegretScorer(learner, instance, market, hypothesis)
    panel = noise_panel(noise, learner.n_arms, horizon)
    mu_flat = instance.qualities.reshape(-1)

    state = ConfidenceState(learner.n_arms, alpha=alpha, sigma=instance.noise_sigma)
    inst = np.zeros(horizon)
    decisions = np.full(horizon, -1, dtype=np.int64)
    stability = isinstance(learner, FeasibilityUlcb)
    delta_err = np.zeros(horizon, dtype=np.int64)
    infeasible = np.zeros(horizon, dtype=np.int64)

    for t in range(1, horizon + 1):
        state.set_epoch(t)
        if t <= learner.init_len:
            arm = learner.init_arm(t)
            state.record(arm, mu_flat[arm] + panel[t, arm])
            continue
        dec = learner.step(state)
        if stability:
            decisions[t - 1] = dec.decision_bit
            if scorer.hypothesis == "h0":
                delta_err[t - 1] = int(dec.decision_bit == 1)
                inst[t - 1] = delta_err[t - 1]
            else:
                delta_err[t - 1] = int(dec.decision_bit == 0)
                matching = tuple(
                    g[0] % learner.market.n_women for g in dec.allocation.bundles[: learner.market.n_men]
                )
                infeasible[t - 1] = int(matching not in scorer.feasible)
                inst[t - 1] = infeasible[t - 1]
        else:
            inst[t - 1] = scorer.score(dec)
        for arm in dec.feedback_arms:
            state.record(arm, mu_flat[arm] + panel[t, arm])

    if stability and scorer.hypothesis == "h0":
        type_i, type_ii = np.cumsum(delta_err), np.zeros(horizon, dtype=np.int64)
        infeasible_cum = np.zeros(horizon, dtype=np.int64)
    elif stability:
        type_i = np.zeros(horizon, dtype=np.int64)
        type_ii = np.cumsum(delta_err)
        infeasible_cum = np.cumsum(infeasible)
    else:
        type_i = type_ii = infeasible_cum = np.zeros(horizon, dtype=np.int64)

    return RegretLedger(
        instantaneous=inst,
        pulls=state.counts.copy(),
        decisions=decisions,
        type_i=type_i,
        type_ii=type_ii,
        infeasible=infeasible_cum,
    )
