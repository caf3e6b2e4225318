"""Fused whole-episode kernels, numba-compiled.

The step-function API in ``algorithms`` is the reference (pure numpy) path;
these kernels replay the exact same arithmetic in compiled loops for the
per-epoch-hot preset families: agent-shared unit demand, enumerated
bundle/envy spaces over sum-family rewards, and marriage-market stability.
Backend selection: FAIRALLOC_BACKEND in {auto, numba, numpy}, default auto
(numba when importable). Equality of the two paths is covered by tests and
measured by benchmarks/backend_bench.py.
"""
from __future__ import annotations

import math
import os

import numpy as np

from .environments import NoiseModel, noise_panel
from .errors import InputError
from .ledger import RegretLedger
from .rewards import KIND_CLIPPED_SQUARE, KIND_LINEAR, KIND_POWER

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap(args[0]) if args and callable(args[0]) else wrap


ALGO_DUELING = 0
ALGO_SECOND_BEST = 1
ALGO_SEQUENTIAL = 2
ALGO_UCB_ONLY = 3


def resolve_backend(override: str | None = None) -> str:
    choice = override or os.environ.get("FAIRALLOC_BACKEND", "auto")
    if choice not in ("auto", "numba", "numpy"):
        raise InputError(f"unknown backend {choice!r}; use auto, numba or numpy")
    if choice == "auto":
        return "numba" if NUMBA_AVAILABLE else "numpy"
    if choice == "numba" and not NUMBA_AVAILABLE:
        raise InputError("numba backend requested but numba is not importable")
    return choice


_SUM_KINDS = (KIND_LINEAR, KIND_POWER, KIND_CLIPPED_SQUARE)


def supports(learner) -> bool:
    """Whether a fused kernel reproduces this learner exactly.

    Bundle/envy kernels require sum-family rewards and N < 8 (numpy's
    pairwise summation is sequential below 8 terms, which keeps the two
    backends bit-identical).
    """
    from . import algorithms as alg

    if isinstance(learner, (alg.SecondBestUcb, alg.SequentialUcb)):
        return True
    if isinstance(learner, (alg.DuelingUlcb, alg.UcbOnlyMaxmin)) and not isinstance(
        learner, alg.MaxminBundleUlcb
    ):
        return not learner.matrix_mode
    if isinstance(learner, (alg.MaxminBundleUlcb, alg.EnvyUlcb)):
        return learner.n < 8 and all(
            rf.kind_code in _SUM_KINDS for rf in learner.rewards
        )
    if isinstance(learner, alg.FeasibilityUlcb):
        return True
    return False


# ---------------------------------------------------------------------------
# Kernels. All loops mirror the step API's tie-breaks: first index wins under
# strict comparison. fastmath stays off to keep IEEE semantics.


@njit(cache=True)
def _topk_episode(mu, k, sigma, alpha, horizon, panel, algo_id, opt):
    n = mu.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    means = np.zeros(n)
    inst = np.zeros(horizon)
    picks = np.empty(k, dtype=np.int64)
    taken = np.zeros(n, dtype=np.bool_)

    for t in range(1, horizon + 1):
        if t <= n:
            arm = t - 1
        else:
            coeff = math.sqrt(2.0 * sigma * sigma * alpha * math.log(t))
            for i in range(n):
                taken[i] = False
            for slot in range(k):
                best = -1
                best_v = -np.inf
                for i in range(n):
                    if not taken[i]:
                        v = means[i] + coeff / math.sqrt(counts[i])
                        if v > best_v:
                            best, best_v = i, v
                picks[slot] = best
                taken[best] = True

            if algo_id == ALGO_SECOND_BEST:
                arm = picks[k - 1]
            elif algo_id == ALGO_SEQUENTIAL:
                arm = picks[0] if t % 2 == 1 else picks[k - 1]
            else:
                arm = -1
                best_v = np.inf
                for i in range(n):
                    if taken[i]:
                        b = coeff / math.sqrt(counts[i])
                        v = means[i] - b if algo_id == ALGO_DUELING else means[i] + b
                        if v < best_v:
                            arm, best_v = i, v

            if algo_id == ALGO_SECOND_BEST or algo_id == ALGO_SEQUENTIAL:
                inst[t - 1] = abs(opt - mu[arm])
            else:
                worst = np.inf
                for i in range(n):
                    if taken[i] and mu[i] < worst:
                        worst = mu[i]
                inst[t - 1] = opt - worst

        counts[arm] += 1
        means[arm] += (mu[arm] + panel[t, arm] - means[arm]) / counts[arm]
    return inst, counts


@njit(cache=True)
def _subset_values(x, member, kind, power, out):
    n = x.shape[0]
    gx = np.empty(n)
    if kind == 0:
        for i in range(n):
            gx[i] = x[i]
    elif kind == 1:
        for i in range(n):
            gx[i] = x[i] ** power
    else:
        for i in range(n):
            v = x[i] if x[i] > 0.0 else 0.0
            gx[i] = v * v
    for s in range(member.shape[0]):
        acc = 0.0
        for i in range(n):
            if member[s, i]:
                acc += gx[i]
        out[s] = acc


@njit(cache=True)
def _bundle_episode(mu, member, alloc, kinds, powers, row_regret,
                    sigma, alpha, horizon, panel, use_lcb):
    n = mu.shape[0]
    n_rows, k = alloc.shape
    n_sub = member.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    means = np.zeros(n)
    inst = np.zeros(horizon)
    ucb = np.empty(n)
    lcb = np.empty(n)
    su = np.empty((k, n_sub))
    sl = np.empty((k, n_sub))

    for t in range(1, horizon + 1):
        if t <= n:
            arm = t - 1
            counts[arm] += 1
            means[arm] += (mu[arm] + panel[t, arm] - means[arm]) / counts[arm]
            continue
        coeff = math.sqrt(2.0 * sigma * sigma * alpha * math.log(t))
        for i in range(n):
            b = coeff / math.sqrt(counts[i])
            ucb[i] = means[i] + b
            lcb[i] = means[i] - b
        for j in range(k):
            _subset_values(ucb, member, kinds[j], powers[j], su[j])
            _subset_values(lcb, member, kinds[j], powers[j], sl[j])

        best_row = 0
        best_v = -np.inf
        for a in range(n_rows):
            v = np.inf
            for j in range(k):
                w = su[j, alloc[a, j]]
                if w < v:
                    v = w
            if v > best_v:
                best_row, best_v = a, v

        pick = sl if use_lcb else su
        agent = 0
        worst = np.inf
        for j in range(k):
            v = pick[j, alloc[best_row, j]]
            if v < worst:
                agent, worst = j, v

        inst[t - 1] = row_regret[best_row]
        s = alloc[best_row, agent]
        for g in range(n):
            if member[s, g]:
                counts[g] += 1
                means[g] += (mu[g] + panel[t, g] - means[g]) / counts[g]
    return inst, counts


@njit(cache=True)
def _envy_episode(mu, member, alloc, kinds, powers, row_regret,
                  sigma, alpha, horizon, panel):
    n = mu.shape[0]
    n_rows, k = alloc.shape
    n_sub = member.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    means = np.zeros(n)
    inst = np.zeros(horizon)
    ucb = np.empty(n)
    lcb = np.empty(n)
    su = np.empty((k, n_sub))
    sl = np.empty((k, n_sub))

    for t in range(1, horizon + 1):
        if t <= n:
            arm = t - 1
            counts[arm] += 1
            means[arm] += (mu[arm] + panel[t, arm] - means[arm]) / counts[arm]
            continue
        coeff = math.sqrt(2.0 * sigma * sigma * alpha * math.log(t))
        for i in range(n):
            b = coeff / math.sqrt(counts[i])
            ucb[i] = means[i] + b
            lcb[i] = means[i] - b
        for j in range(k):
            _subset_values(ucb, member, kinds[j], powers[j], su[j])
            _subset_values(lcb, member, kinds[j], powers[j], sl[j])

        # argmin over rows of the lower envy estimate
        best_row = 0
        best_v = np.inf
        for a in range(n_rows):
            worst = 0.0
            for i in range(k):
                own = su[i, alloc[a, i]]
                for j in range(k):
                    if i != j:
                        gain = sl[i, alloc[a, j]] - own
                        if gain > worst:
                            worst = gain
            if worst < best_v:
                best_row, best_v = a, worst

        # argmax over ordered pairs of the upper envy estimate
        bi, bj = 0, 1
        best_est = -np.inf
        for i in range(k):
            own = sl[i, alloc[best_row, i]]
            for j in range(k):
                if i != j:
                    est = su[i, alloc[best_row, j]] - own
                    if est < 0.0:
                        est = 0.0
                    if est > best_est:
                        bi, bj, best_est = i, j, est

        inst[t - 1] = row_regret[best_row]
        si = alloc[best_row, bi]
        sj = alloc[best_row, bj]
        queried = False
        for g in range(n):
            if member[si, g] or member[sj, g]:
                queried = True
                counts[g] += 1
                means[g] += (mu[g] + panel[t, g] - means[g]) / counts[g]
        if not queried:  # both bundles empty: probe the least-pulled arm
            arm = 0
            fewest = counts[0]
            for g in range(1, n):
                if counts[g] < fewest:
                    arm, fewest = g, counts[g]
            counts[arm] += 1
            means[arm] += (mu[arm] + panel[t, arm] - means[arm]) / counts[arm]
    return inst, counts


@njit(cache=True)
def _stability_episode(mu, dev_start, dev_stay, dev_leave, feasible,
                       eta, epsilon, sigma, alpha, horizon, panel, is_h0):
    n = mu.shape[0]
    n_match = dev_start.shape[0] - 1
    counts = np.zeros(n, dtype=np.int64)
    means = np.zeros(n)
    inst = np.zeros(horizon)
    decisions = np.full(horizon, -1, dtype=np.int64)
    err = np.zeros(horizon, dtype=np.int64)
    infeasible = np.zeros(horizon, dtype=np.int64)
    ucb = np.empty(n)
    lcb = np.empty(n)

    for t in range(1, horizon + 1):
        if t <= n:
            arm = t - 1
            counts[arm] += 1
            means[arm] += (mu[arm] + panel[t, arm] - means[arm]) / counts[arm]
            continue
        coeff = math.sqrt(2.0 * sigma * sigma * alpha * math.log(t))
        for i in range(n):
            b = coeff / math.sqrt(counts[i])
            ucb[i] = means[i] + b
            lcb[i] = means[i] - b

        decision = 0
        chosen = -1
        for m in range(n_match):
            ok = True
            for d in range(dev_start[m], dev_start[m + 1]):
                g1 = lcb[dev_stay[d, 0]] - ucb[dev_leave[d, 0]]
                g2 = lcb[dev_stay[d, 1]] - ucb[dev_leave[d, 1]]
                g = g1 if g1 > g2 else g2
                if g < epsilon:
                    ok = False
                    break
            if ok:
                decision = 1
                chosen = m
                break

        if decision == 0:
            for m in range(n_match):
                ok = True
                for d in range(dev_start[m], dev_start[m + 1]):
                    g1 = ucb[dev_stay[d, 0]] - lcb[dev_leave[d, 0]]
                    g2 = ucb[dev_stay[d, 1]] - lcb[dev_leave[d, 1]]
                    g = g1 if g1 > g2 else g2
                    if g < eta:
                        ok = False
                        break
                if ok:
                    chosen = m
                    break
            if chosen == -1:
                chosen = 0

        decisions[t - 1] = decision
        if is_h0:
            err[t - 1] = 1 if decision == 1 else 0
            inst[t - 1] = float(err[t - 1])
        else:
            err[t - 1] = 1 if decision == 0 else 0
            infeasible[t - 1] = 0 if feasible[chosen] else 1
            inst[t - 1] = float(infeasible[t - 1])

        if decision == 1:
            arm = 0
            fewest = counts[0]
            for g in range(1, n):
                if counts[g] < fewest:
                    arm, fewest = g, counts[g]
            counts[arm] += 1
            means[arm] += (mu[arm] + panel[t, arm] - means[arm]) / counts[arm]
        else:
            witness = -1
            for d in range(dev_start[chosen], dev_start[chosen + 1]):
                g1 = lcb[dev_stay[d, 0]] - ucb[dev_leave[d, 0]]
                g2 = lcb[dev_stay[d, 1]] - ucb[dev_leave[d, 1]]
                g = g1 if g1 > g2 else g2
                if g < epsilon:
                    witness = d
                    break
            for idx in range(2):
                for g in (dev_stay[witness, idx], dev_leave[witness, idx]):
                    counts[g] += 1
                    means[g] += (mu[g] + panel[t, g] - means[g]) / counts[g]
    return inst, counts, decisions, err, infeasible


# ---------------------------------------------------------------------------
# Dispatch


def run_episode_fast(learner, instance, horizon, noise: NoiseModel, hypothesis, alpha: float = 3.0):
    from . import algorithms as alg

    panel = noise_panel(noise, learner.n_arms, horizon)
    scorer = alg._RegretScorer(
        learner, instance, getattr(learner, "market", None), hypothesis
    )

    if isinstance(learner, (alg.MaxminBundleUlcb, alg.EnvyUlcb)):
        kinds = np.array([rf.kind_code for rf in learner.rewards], dtype=np.int64)
        powers = np.array(
            [getattr(rf, "power", 0) for rf in learner.rewards], dtype=np.int64
        )
        member = learner.space.member
        alloc = learner.space.allocations
        if isinstance(learner, alg.EnvyUlcb):
            row_regret = scorer.row_envy - scorer.opt
            inst, counts = _envy_episode(
                instance.qualities, member, alloc, kinds, powers, row_regret,
                instance.noise_sigma, alpha, horizon, panel,
            )
        else:
            row_regret = scorer.opt - scorer.row_min
            inst, counts = _bundle_episode(
                instance.qualities, member, alloc, kinds, powers, row_regret,
                instance.noise_sigma, alpha, horizon, panel, learner.use_lcb,
            )
        return RegretLedger(instantaneous=inst, pulls=counts)

    if isinstance(learner, alg.FeasibilityUlcb):
        market = learner.market
        stays, leaves, starts = [], [], [0]
        feas = []
        for p in market.matchings:
            for dev in market.deviations(p):
                stays.append(dev.stay_goods)
                leaves.append(dev.leave_goods)
            starts.append(len(stays))
            feas.append(p in scorer.feasible)
        inst, counts, decisions, err, infeasible = _stability_episode(
            instance.qualities,
            np.array(starts, dtype=np.int64),
            np.array(stays, dtype=np.int64).reshape(-1, 2),
            np.array(leaves, dtype=np.int64).reshape(-1, 2),
            np.array(feas, dtype=np.bool_),
            market.eta, market.epsilon, instance.noise_sigma, alpha, horizon, panel,
            scorer.hypothesis == "h0",
        )
        zero = np.zeros(horizon, dtype=np.int64)
        return RegretLedger(
            instantaneous=inst,
            pulls=counts,
            decisions=decisions,
            type_i=np.cumsum(err) if scorer.hypothesis == "h0" else zero,
            type_ii=zero if scorer.hypothesis == "h0" else np.cumsum(err),
            infeasible=np.cumsum(infeasible) if scorer.hypothesis == "ha" else zero,
        )

    algo_id = {
        alg.DuelingUlcb: ALGO_DUELING,
        alg.SecondBestUcb: ALGO_SECOND_BEST,
        alg.SequentialUcb: ALGO_SEQUENTIAL,
        alg.UcbOnlyMaxmin: ALGO_UCB_ONLY,
    }[type(learner)]
    inst, counts = _topk_episode(
        instance.qualities, instance.n_agents, instance.noise_sigma, alpha,
        horizon, panel, algo_id, scorer.opt,
    )
    return RegretLedger(instantaneous=inst, pulls=counts)
