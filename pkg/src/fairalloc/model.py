"""Domain types for allocation instances plus exact (noise-free) evaluation.

Everything here is immutable after construction and safe to share across
concurrently running experiment replications.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError
from .rewards import LinearReward, RewardFunction, reward_from_dict

__all__ = [
    "Bundle",
    "BundleFamily",
    "Allocation",
    "ProblemInstance",
    "GapParameters",
    "evaluate_reward",
    "envy_between",
    "allocation_envy",
    "group_benefit",
    "load_instance",
    "dump_instance",
]

Bundle = tuple[int, ...]


def canonical_bundle(goods: Iterable[int]) -> Bundle:
    """Sorted, deduplicated tuple; the canonical encoding used by tie-breaks."""
    return tuple(sorted(set(int(g) for g in goods)))


@dataclass(frozen=True)
class BundleFamily:
    """Per-agent feasible bundle lists A_j, in canonical order.

    ``allow_overlap`` selects the replenishing-items variant: bundles in an
    allocation must merely be pairwise distinct, not disjoint.
    """

    feasible: tuple[tuple[Bundle, ...], ...]
    allow_overlap: bool = False

    def __post_init__(self):
        canon = tuple(
            tuple(sorted(canonical_bundle(b) for b in agent_bundles))
            for agent_bundles in self.feasible
        )
        object.__setattr__(self, "feasible", canon)
        for agent_bundles in canon:
            if not agent_bundles:
                raise InputError("every agent needs at least one feasible bundle")

    @property
    def n_agents(self) -> int:
        return len(self.feasible)

    def max_bundle_size(self) -> int:
        return max((len(b) for bundles in self.feasible for b in bundles), default=0)

    @staticmethod
    def all_subsets(n_goods: int, n_agents: int, max_size: int | None = None,
                    allow_overlap: bool = False) -> "BundleFamily":
        """Every subset of size <= max_size (including the empty bundle)."""
        m = n_goods if max_size is None else max_size
        subsets: list[Bundle] = [()]
        for g in range(n_goods):
            subsets += [s + (g,) for s in subsets if len(s) < m]
        bundles = tuple(sorted(canonical_bundle(s) for s in subsets))
        return BundleFamily((bundles,) * n_agents, allow_overlap=allow_overlap)

    @staticmethod
    def singletons(n_goods: int, n_agents: int, allow_overlap: bool = False) -> "BundleFamily":
        """One-good bundles only; no empty bundle, so allocations are complete."""
        bundles = tuple((g,) for g in range(n_goods))
        return BundleFamily((bundles,) * n_agents, allow_overlap=allow_overlap)


@dataclass(frozen=True)
class Allocation:
    """Map from agents to bundles (phi). Unit-demand bundles are singletons."""

    bundles: tuple[Bundle, ...]

    def __post_init__(self):
        object.__setattr__(self, "bundles", tuple(canonical_bundle(b) for b in self.bundles))

    @property
    def n_agents(self) -> int:
        return len(self.bundles)

    def assignment(self) -> tuple[int, ...]:
        """Good index per agent; only valid for unit-demand allocations."""
        if any(len(b) != 1 for b in self.bundles):
            raise InputError("assignment() requires single-good bundles")
        return tuple(b[0] for b in self.bundles)

    def validate(self, family: BundleFamily) -> None:
        if len(self.bundles) != family.n_agents:
            raise InputError("allocation agent count does not match the bundle family")
        for j, b in enumerate(self.bundles):
            if b not in family.feasible[j]:
                raise InputError(f"bundle {b} is not feasible for agent {j}")
        for i in range(len(self.bundles)):
            for j in range(i + 1, len(self.bundles)):
                if family.allow_overlap:
                    if self.bundles[i] == self.bundles[j]:
                        raise InputError("bundles must be pairwise distinct")
                elif set(self.bundles[i]) & set(self.bundles[j]):
                    raise InputError("bundles must be pairwise disjoint")


@dataclass(frozen=True)
class GapParameters:
    """Instance-level separation constants used by the bound calculators."""

    delta_min: float | None = None
    delta_max: float | None = None
    tilde_delta_min: float | None = None
    tilde_delta_max: float | None = None
    delta_e_min: float | None = None
    delta_e_max: float | None = None
    delta_mq: float | None = None
    hat_delta: float = 2.0

    def __post_init__(self):
        for name in ("delta_min", "delta_max", "tilde_delta_min", "tilde_delta_max",
                     "delta_e_min", "delta_e_max", "delta_mq"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise InputError(f"gap {name} must be strictly positive, got {v}")
        if self.hat_delta < 2:
            raise InputError("hat_delta must be >= 2")


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """True qualities plus the structural data of one allocation problem.

    ``qualities`` is either an N-vector (agent-shared) or a K x N matrix
    (agent-specific). ``bundles`` is None for unit-demand instances.
    """

    qualities: np.ndarray
    n_agents: int
    noise_sigma: float = 0.0
    rewards: tuple[RewardFunction, ...] | None = None
    bundles: BundleFamily | None = None
    bundle_capacity: int = 1
    quality_box: float | None = None
    gaps: GapParameters = field(default_factory=GapParameters)

    def __post_init__(self):
        q = np.array(self.qualities, dtype=float)
        q.setflags(write=False)
        object.__setattr__(self, "qualities", q)
        if q.ndim not in (1, 2):
            raise InputError("qualities must be a vector or a K x N matrix")
        if not np.all(np.isfinite(q)):
            raise InputError("all quality entries must be finite")
        if self.n_agents < 1:
            raise InputError("need at least one agent")
        if q.ndim == 2 and q.shape[0] != self.n_agents:
            raise InputError("quality matrix must have one row per agent")
        if self.noise_sigma < 0:
            raise InputError("noise sigma must be nonnegative")
        if self.bundles is None:
            if self.n_goods < self.n_agents:
                raise InputError("unit demand requires N >= K")
            if self.bundle_capacity != 1:
                raise InputError("unit-demand instances have bundle capacity 1")
        else:
            if self.bundles.n_agents != self.n_agents:
                raise InputError("bundle family agent count mismatch")
            if self.bundles.max_bundle_size() > self.bundle_capacity:
                raise InputError("bundle family violates the capacity bound")
            if self.rewards is not None and len(self.rewards) != self.n_agents:
                raise InputError("need one reward function per agent")

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (
            self.qualities.shape == other.qualities.shape
            and bool(np.array_equal(self.qualities, other.qualities))
            and self.n_agents == other.n_agents
            and self.noise_sigma == other.noise_sigma
            and self.rewards == other.rewards
            and self.bundles == other.bundles
            and self.bundle_capacity == other.bundle_capacity
            and self.quality_box == other.quality_box
            and self.gaps == other.gaps
        )

    def __hash__(self):
        return hash((self.qualities.tobytes(), self.n_agents, self.noise_sigma))

    @property
    def n_goods(self) -> int:
        return self.qualities.shape[-1]

    @property
    def agent_specific(self) -> bool:
        return self.qualities.ndim == 2

    def reward_fns(self) -> tuple[RewardFunction, ...]:
        if self.rewards is None:
            return (LinearReward(),) * self.n_agents
        return self.rewards

    def quality_row(self, agent: int) -> np.ndarray:
        return self.qualities[agent] if self.agent_specific else self.qualities


# ---------------------------------------------------------------------------
# Exact evaluation


def evaluate_reward(rf: RewardFunction, qualities: Sequence[float], bundle: Iterable[int]) -> float:
    """r(qualities; bundle); deterministic, 0 for the empty bundle."""
    return rf.value(np.asarray(qualities, dtype=float), bundle)


def envy_between(
    rf_i: RewardFunction,
    x_give: Sequence[float],
    x_keep: Sequence[float],
    phi: Allocation,
    i: int,
    j: int,
) -> float:
    """Clamped gain of agent i from taking agent j's bundle.

    With x_give = x_keep = mu this is the true envy ev_{i->j}(mu, phi);
    with (ucb, lcb) resp. (lcb, ucb) it is the optimistic resp. pessimistic
    envy estimate.
    """
    if i == j:
        raise InputError("envy is defined between two distinct agents")
    gain = evaluate_reward(rf_i, x_give, phi.bundles[j]) - evaluate_reward(rf_i, x_keep, phi.bundles[i])
    return max(gain, 0.0)


def allocation_envy(
    rewards: Sequence[RewardFunction],
    x_give: Sequence[float],
    x_keep: Sequence[float],
    phi: Allocation,
) -> float:
    """Maximum envy over ordered agent pairs (i, j), i != j."""
    k = phi.n_agents
    if k < 2:
        raise InputError("allocation envy needs at least two agents")
    return max(
        envy_between(rewards[i], x_give, x_keep, phi, i, j)
        for i in range(k)
        for j in range(k)
        if i != j
    )


def group_benefit(
    rewards: Sequence[RewardFunction],
    x_stay: Sequence[float],
    x_leave: Sequence[float],
    phi: Mapping[int, Bundle] | Allocation,
    phi_dev: Mapping[int, Bundle],
    coalition: Sequence[int],
) -> float:
    """g^L: the coalition's largest benefit from staying in phi vs deviating.

    Negative values mean every member strictly gains by deviating. With
    x_stay = x_leave = mu this is the true g^L(mu; phi -> phi').
    """
    if len(coalition) == 0:
        raise InputError("coalition must be nonempty")
    current = phi.bundles.__getitem__ if isinstance(phi, Allocation) else phi.__getitem__
    best = -np.inf
    for j in coalition:
        stay = evaluate_reward(rewards[j], x_stay, current(j))
        leave = evaluate_reward(rewards[j], x_leave, phi_dev[j])
        best = max(best, stay - leave)
    return float(best)


# ---------------------------------------------------------------------------
# Instance description files (JSON or TOML); round-trips losslessly.


def _bundles_to_dict(inst: ProblemInstance) -> dict | str | None:
    fam = inst.bundles
    if fam is None:
        return None
    explicit = [[list(b) for b in agent] for agent in fam.feasible]
    return {"explicit": explicit, "allow_overlap": fam.allow_overlap}


def instance_to_dict(inst: ProblemInstance) -> dict:
    d: dict = {
        "n_goods": inst.n_goods,
        "n_agents": inst.n_agents,
        "qualities": inst.qualities.tolist(),
        "sigma": inst.noise_sigma,
    }
    if inst.rewards is not None:
        d["reward"] = {"per_agent": [rf.to_dict() for rf in inst.rewards]}
    if inst.bundles is not None:
        d["bundles"] = _bundles_to_dict(inst)
        d["bundle_capacity"] = inst.bundle_capacity
    if inst.quality_box is not None:
        d["quality_box"] = inst.quality_box
    gaps = {
        k: v
        for k, v in vars(inst.gaps).items()
        if v is not None and not (k == "hat_delta" and v == 2.0)
    }
    if gaps:
        d["gaps"] = gaps
    return d


def _bundles_from_spec(spec, n_goods: int, n_agents: int, capacity: int) -> BundleFamily:
    if isinstance(spec, str):
        if spec == "singletons":
            return BundleFamily.singletons(n_goods, n_agents)
        if spec.startswith("all_subsets_up_to "):
            return BundleFamily.all_subsets(n_goods, n_agents, int(spec.split()[-1]))
        if spec == "all_subsets":
            return BundleFamily.all_subsets(n_goods, n_agents, capacity)
        raise InputError(f"unknown bundle family spec {spec!r}")
    overlap = bool(spec.get("allow_overlap", False))
    if "named" in spec:
        if spec["named"] == "singletons":
            return BundleFamily.singletons(n_goods, n_agents, allow_overlap=overlap)
        if spec["named"] == "all_subsets_up_to":
            return BundleFamily.all_subsets(n_goods, n_agents, int(spec["m"]),
                                            allow_overlap=overlap)
        raise InputError(f"unknown named bundle family {spec['named']!r}")
    explicit = tuple(tuple(canonical_bundle(b) for b in agent) for agent in spec["explicit"])
    return BundleFamily(explicit, allow_overlap=overlap)


def instance_from_dict(d: Mapping) -> ProblemInstance:
    qualities = np.array(d["qualities"], dtype=float)
    n_agents = int(d["n_agents"])
    n_goods = int(d["n_goods"])
    if qualities.shape[-1] != n_goods:
        raise InputError("qualities length does not match n_goods")
    rewards = None
    if "reward" in d:
        spec = d["reward"]
        if "per_agent" in spec:
            rewards = tuple(reward_from_dict(r) for r in spec["per_agent"])
        else:
            rewards = (reward_from_dict(spec),) * n_agents
    bundles = None
    capacity = int(d.get("bundle_capacity", 1))
    if "bundles" in d and d["bundles"] is not None:
        bundles = _bundles_from_spec(d["bundles"], n_goods, n_agents, capacity)
        if capacity == 1 and bundles.max_bundle_size() > 1:
            capacity = bundles.max_bundle_size()
    gaps = GapParameters(**d.get("gaps", {}))
    return ProblemInstance(
        qualities=qualities,
        n_agents=n_agents,
        noise_sigma=float(d.get("sigma", 0.0)),
        rewards=rewards,
        bundles=bundles,
        bundle_capacity=capacity,
        quality_box=d.get("quality_box"),
        gaps=gaps,
    )


def load_instance(path: str | Path) -> ProblemInstance:
    path = Path(path)
    text = path.read_bytes()
    if path.suffix == ".toml":
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib
        data = tomllib.loads(text.decode())
    else:
        data = json.loads(text)
    return instance_from_dict(data)


def dump_instance(inst: ProblemInstance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2) + "\n")
