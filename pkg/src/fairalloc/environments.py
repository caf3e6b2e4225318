"""Noisy-feedback generators, experiment presets and market constructors."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .bruteforce import bf_stable_set
from .errors import InputError
from .markets import MarriageMarket, market_from_dict, matching_margin
from .model import ProblemInstance, instance_from_dict

__all__ = [
    "NoiseModel",
    "noise_panel",
    "sample_feedback",
    "build_ha_market",
    "build_h0_market",
    "ExperimentPreset",
    "PresetRun",
    "Threshold",
    "make_preset",
    "PRESET_NAMES",
]


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean sigma^2-subgaussian feedback noise.

    ``bounded-uniform`` draws from [-a, a] with a = sigma * sqrt(3), so its
    variance is sigma^2; a uniform variable is subgaussian with its own
    variance parameter (sinh(x)/x <= exp(x^2/6)), which makes sigma a valid
    subgaussian parameter for the confidence bonus.
    """

    kind: str = "gaussian"
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "bounded-uniform", "zero"):
            raise InputError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise InputError("noise sigma must be nonnegative")


def noise_panel(noise: NoiseModel, n_arms: int, horizon: int) -> np.ndarray:
    """Noise for epochs 1..horizon as a (horizon+1, n_arms) array.

    Row t holds epoch t's draws in arm-index order. Rows are filled from one
    seeded stream in row-major order, so the value at (t, arm) depends only
    on (seed, t, arm), never on the horizon: replays and horizon extensions
    agree sample for sample.
    """
    rng = np.random.default_rng(noise.seed)
    shape = (horizon + 1, n_arms)
    if noise.kind == "zero" or noise.sigma == 0.0:
        return np.zeros(shape)
    if noise.kind == "gaussian":
        return noise.sigma * rng.standard_normal(shape)
    a = noise.sigma * math.sqrt(3.0)
    return rng.uniform(-a, a, shape)


def sample_feedback(
    instance: ProblemInstance, noise: NoiseModel, goods: Sequence[int], epoch: int
) -> dict[int, float]:
    """Noisy qualities X_i = mu_i + eps_i for the queried goods at one epoch.

    Deterministic in (noise.seed, epoch, good); draws are consumed in
    good-index order within the epoch. Convenience wrapper over the panels
    the episode runners use.
    """
    if len(goods) == 0:
        raise InputError("queried good set must be nonempty")
    if instance.agent_specific:
        raise InputError("sample_feedback addresses shared base goods")
    panel = noise_panel(noise, instance.n_goods, epoch)
    return {int(g): float(instance.qualities[g] + panel[epoch, g]) for g in goods}


def load_problem(path: str | Path) -> tuple[ProblemInstance, MarriageMarket | None]:
    """Read an instance description file, including its optional market block."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    instance = instance_from_dict(data)
    market = None
    if "market" in data:
        market = market_from_dict(data["market"], n_goods=instance.n_goods)
        if market.n_goods != instance.n_goods:
            raise InputError("market size disagrees with the instance's good count")
    return instance, market


# ---------------------------------------------------------------------------
# Stable-market constructors (brute-force verified)


def build_ha_market(
    size: int = 3,
    seed: int = 0,
    quality_scale: float = 5.0,
    max_tries: int = 2000,
) -> tuple[MarriageMarket, np.ndarray]:
    """Random marriage market with an eta-stable matching and a healthy gap.

    Searches random quality tables until some matching's worst coalition
    margin is clearly positive, sets eta below it, and verifies the
    separation constant and the epsilon window by enumeration.
    """
    rng = np.random.default_rng(seed)
    proto = MarriageMarket.full(size)
    for _ in range(max_tries):
        men = rng.uniform(0.0, quality_scale, (size, size))
        women = rng.uniform(0.0, quality_scale, (size, size))
        mu = proto.quality_vector(men, women)
        margins = {p: matching_margin(proto, mu, p) for p in proto.matchings}
        stable_margin = max(margins.values())
        if stable_margin <= 0.1 * quality_scale:
            continue
        eta = 0.8 * stable_margin
        below = [
            max(mu[s] - mu[l] for s, l in zip(d.stay_goods, d.leave_goods))
            for p in proto.matchings
            if margins[p] < eta
            for d in proto.deviations(p)
            if max(mu[s] - mu[l] for s, l in zip(d.stay_goods, d.leave_goods)) < eta
        ]
        if not below:
            continue
        gap = eta - max(below)
        if gap <= 0.05 * quality_scale:
            continue
        epsilon = eta / 2 if eta - gap < eta / 2 else eta - gap / 2
        market = MarriageMarket(
            size, size, proto.matchings, eta=eta, epsilon=epsilon, stability_gap=gap
        )
        if not bf_stable_set(market, mu, eta):
            continue
        return market, mu
    raise InputError("could not construct an Ha market; widen the search")


def build_h0_market(
    size: int = 3,
    seed: int = 0,
    quality_scale: float = 5.0,
    min_violation: float = 0.25,
    max_tries: int = 2000,
) -> tuple[MarriageMarket, np.ndarray]:
    """Random marriage market whose feasible set has no stable matching.

    A full one-to-one market always has a stable matching, so the feasible
    set M* is restricted to the matchings that are strictly blocked; the
    absence of a 0-stable matching within M* is re-verified by enumeration.
    """
    rng = np.random.default_rng(seed)
    proto = MarriageMarket.full(size)
    for _ in range(max_tries):
        men = rng.uniform(0.0, quality_scale, (size, size))
        women = rng.uniform(0.0, quality_scale, (size, size))
        mu = proto.quality_vector(men, women)
        blocked = [
            p
            for p in proto.matchings
            if matching_margin(proto, mu, p) <= -min_violation
        ]
        if not blocked:
            continue
        market = MarriageMarket(size, size, tuple(blocked), eta=1.0, epsilon=0.5)
        if bf_stable_set(market, mu, 0.0):
            continue
        return market, mu
    raise InputError("could not construct an H0 market; widen the search")


# ---------------------------------------------------------------------------
# Presets


@dataclass(frozen=True)
class Threshold:
    value: float
    provenance: str


@dataclass(frozen=True)
class PresetRun:
    """One labelled curve: an algorithm on an instance (plus market)."""

    label: str
    algorithm: str
    instance: ProblemInstance
    market: MarriageMarket | None = None
    hypothesis: str | None = None  # "h0" | "ha" for stability runs


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    horizon: int
    n_seeds: int
    runs: tuple[PresetRun, ...]
    thresholds: Mapping[str, Threshold] = field(default_factory=dict)

    def threshold(self, key: str) -> float:
        return self.thresholds[key].value


PRESET_NAMES = (
    "toy-second-best",
    "vary-K",
    "vary-N",
    "bundle-same-reward",
    "bundle-mixed-reward",
    "bundle-vs-benchmark",
    "topk-replenish",
    "stability-H0",
    "stability-Ha",
)


def _load_preset_dict(name: str) -> dict:
    try:
        from importlib.resources import files
    except ImportError:  # pragma: no cover
        raise
    path = files("fairalloc").joinpath(f"presets/{name}.toml")
    if not path.is_file():
        raise InputError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(path.read_text())


def _run_from_dict(d: Mapping) -> PresetRun:
    market = None
    hypothesis = d.get("hypothesis")
    if "market" in d:
        spec = d["market"]
        scale = float(spec.get("scale", 5.0))
        if spec["kind"] == "marriage-ha":
            market, mu = build_ha_market(int(spec["size"]), int(spec["seed"]), quality_scale=scale)
            hypothesis = hypothesis or "ha"
        elif spec["kind"] == "marriage-h0":
            market, mu = build_h0_market(int(spec["size"]), int(spec["seed"]), quality_scale=scale)
            hypothesis = hypothesis or "h0"
        else:
            raise InputError(f"unknown market kind {spec['kind']!r}")
        instance = ProblemInstance(
            qualities=mu,
            n_agents=market.n_agents,
            noise_sigma=float(spec.get("sigma", 1.0)),
        )
    else:
        instance = instance_from_dict(d["instance"])
    return PresetRun(
        label=d["label"],
        algorithm=d["algorithm"],
        instance=instance,
        market=market,
        hypothesis=hypothesis,
    )


def make_preset(name: str) -> ExperimentPreset:
    """Load one of the shipped experiment presets by name."""
    data = _load_preset_dict(name)
    thresholds = {
        t["name"]: Threshold(float(t["value"]), t.get("provenance", ""))
        for t in data.get("thresholds", [])
    }
    runs = tuple(_run_from_dict(r) for r in data["runs"])
    return ExperimentPreset(
        name=data["name"],
        horizon=int(data["horizon"]),
        n_seeds=int(data["seeds"]),
        runs=runs,
        thresholds=thresholds,
    )


def preset_to_json(preset: ExperimentPreset) -> str:
    """Debugging helper: a JSON view of a fully built preset."""
    out = {
        "name": preset.name,
        "horizon": preset.horizon,
        "seeds": preset.n_seeds,
        "runs": [
            {"label": r.label, "algorithm": r.algorithm, "hypothesis": r.hypothesis}
            for r in preset.runs
        ],
        "thresholds": {k: vars(v) for k, v in preset.thresholds.items()},
    }
    return json.dumps(out, indent=2)
