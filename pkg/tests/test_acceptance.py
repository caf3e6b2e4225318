"""Acceptance suite: one test (and one printed pass/fail line) per criterion.

Heavy experiment results are shared through module-scoped fixtures. Lines are
written straight to the terminal so they show under plain ``pytest``.
"""
import dataclasses
import sys
import time

import numpy as np
import pytest

from fairalloc import ProblemInstance
from fairalloc.algorithms import run_episode
from fairalloc.cli import (
    _verify_assignment,
    _verify_bundles,
    _verify_envy,
    _verify_stability,
)
from fairalloc.environments import NoiseModel, make_preset
from fairalloc.harness import (
    last_half_slope,
    paired_separation,
    run_experiment,
    stability_null_bound,
    tail_bound_test,
    theorem1_bound,
)

ALPHA = 3.0


@pytest.fixture(scope="module")
def report(request):
    """One pass/fail line per criterion, written to the live terminal."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def _report(name: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        if reporter is not None:
            reporter.write_line(line)
        else:  # pragma: no cover
            sys.__stdout__.write(line + "\n")

    return _report


@pytest.fixture(scope="module")
def warm_kernels():
    # Compile (or load the disk cache of) every fused kernel outside the
    # timed sections.
    inst = ProblemInstance(qualities=np.array([1.0, 2.0, 3.0]), n_agents=2, noise_sigma=1.0)
    run_episode("dueling-ulcb", inst, 10, seed=0)
    for name in ("bundle-same-reward", "stability-H0"):
        preset = make_preset(name)
        run = preset.runs[0]
        run_episode(run.algorithm, run.instance, run.instance.n_goods + 5, 0,
                    market=run.market, hypothesis=run.hypothesis)
    return True


@pytest.fixture(scope="module")
def toy_result():
    return run_experiment(make_preset("toy-second-best"))


@pytest.fixture(scope="module")
def vary_k_result():
    return run_experiment(make_preset("vary-K"))


@pytest.fixture(scope="module")
def vary_n_result():
    return run_experiment(make_preset("vary-N"))


@pytest.fixture(scope="module")
def bundle_results():
    return {
        name: run_experiment(make_preset(name))
        for name in ("bundle-same-reward", "bundle-mixed-reward", "bundle-vs-benchmark")
    }


# ---------------------------------------------------------------------------
# Criterion: oracle equivalence


def test_oracle_equivalence(report):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    results = {
        "assignment": _verify_assignment(rng, 200),
        "bundles": _verify_bundles(rng, 100, 5),
        "envy": _verify_envy(rng, 100, 5),
        "stability": _verify_stability(rng, 100),
    }
    elapsed = time.perf_counter() - t0
    ok = (
        results["assignment"] == 200
        and all(results[k] == 100 for k in ("bundles", "envy", "stability"))
        and elapsed < 60.0
    )
    report(
        "oracle-equivalence",
        ok,
        f"assignment {results['assignment']}/200, bundles {results['bundles']}/100, "
        f"envy {results['envy']}/100, stability {results['stability']}/100 in {elapsed:.1f}s (<60s)",
    )
    assert ok


# ---------------------------------------------------------------------------
# Criterion: zero-noise collapse


def test_zero_noise_collapse(warm_kernels, report):
    t0 = time.perf_counter()
    failures = []
    covered = 0
    for name in (
        "toy-second-best", "vary-K", "vary-N", "bundle-same-reward",
        "bundle-mixed-reward", "bundle-vs-benchmark", "topk-replenish",
    ):
        preset = make_preset(name)
        for run in preset.runs:
            if run.algorithm not in ("dueling-ulcb", "maxmin-bundle-ulcb", "envy-ulcb"):
                continue
            inst = dataclasses.replace(run.instance, noise_sigma=0.0)
            ledger = run_episode(run.algorithm, inst, 400, seed=0)
            covered += 1
            if ledger.instantaneous.sum() != 0.0:
                failures.append(f"{name}/{run.label}")
            # Algorithm 3 on the same bundle instances
            if run.algorithm == "maxmin-bundle-ulcb" and not inst.bundles.allow_overlap:
                ledger = run_episode("envy-ulcb", inst, 400, seed=0)
                covered += 1
                if ledger.instantaneous.sum() != 0.0:
                    failures.append(f"{name}/{run.label}/envy")
    for name in ("stability-H0", "stability-Ha"):
        preset = make_preset(name)
        run = preset.runs[0]
        inst = dataclasses.replace(run.instance, noise_sigma=0.0)
        ledger = run_episode(run.algorithm, inst, 400, seed=0,
                             market=run.market, hypothesis=run.hypothesis)
        covered += 1
        post = slice(inst.n_goods, None)
        want = 1 if run.hypothesis == "ha" else 0
        if not np.all(ledger.decisions[post] == want):
            failures.append(f"{name}/delta")
        if run.hypothesis == "ha" and ledger.infeasible[-1] != 0:
            failures.append(f"{name}/feasible-output")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 10.0
    report(
        "zero-noise-collapse",
        ok,
        f"{covered} sigma=0 runs exact in {elapsed:.1f}s (<10s)"
        + (f"; failures: {failures}" if failures else ""),
    )
    assert ok


# ---------------------------------------------------------------------------
# Criterion: Figure-2 reproduction (property form)


def test_figure2_reproduction(toy_result, report):
    res = toy_result
    preset = make_preset("toy-second-best")
    dueling = res.curves["dueling-ulcb"]
    second = res.curves["second-best-ucb"]
    sequential = res.curves["sequential-ucb"]

    ratio = dueling.final_mean() / res.horizon
    a_ok = ratio <= preset.threshold("dueling-ratio-max")

    d_slope = last_half_slope(dueling.mean)
    sb_slope = last_half_slope(second.mean)
    sq_slope = last_half_slope(sequential.mean)
    b_ok = (
        d_slope <= preset.threshold("dueling-slope-max")
        and sb_slope >= preset.threshold("baseline-slope-min")
        and sq_slope >= preset.threshold("baseline-slope-min")
    )

    min_sep = preset.threshold("stderr-separation")
    sep_sb = paired_separation(second, dueling)
    sep_sq = paired_separation(sequential, dueling)
    c_ok = (
        dueling.final_mean() < second.final_mean()
        and dueling.final_mean() < sequential.final_mean()
        and sep_sb >= min_sep
        and sep_sq >= min_sep
    )

    report(
        "figure2-reproduction",
        a_ok and b_ok and c_ok,
        f"R(T)/T={ratio:.4f} (<=0.05); slopes dueling={d_slope:.4f} (<=0.01), "
        f"second-best={sb_slope:.3f}, sequential={sq_slope:.3f} (>=0.1); "
        f"separations {sep_sb:.1f}/{sep_sq:.1f} sigma (>=3)",
    )
    assert a_ok and b_ok and c_ok


# ---------------------------------------------------------------------------
# Criterion: Theorem-1 dominance


def test_theorem1_dominance(warm_kernels, report):
    preset = make_preset("toy-second-best")
    run = preset.runs[0]
    gaps = run.instance.gaps
    details = []
    ok = True
    for horizon in (1_000, 10_000):
        finals = [
            run_episode(run.algorithm, run.instance, horizon, seed).final_regret()
            for seed in range(20)
        ]
        empirical = float(np.mean(finals))
        bound = theorem1_bound(
            run.instance.n_goods, run.instance.n_agents, run.instance.noise_sigma,
            ALPHA, gaps.delta_min, gaps.delta_max, horizon,
        )
        ok &= empirical <= bound
        details.append(f"T={horizon}: {empirical:.1f} <= {bound:.0f}")
    report("theorem1-dominance", ok, "; ".join(details))
    assert ok


# ---------------------------------------------------------------------------
# Criterion: monotonicity in K and N


def test_monotonicity_vary_k(vary_k_result, report):
    res = vary_k_result
    preset = make_preset("vary-K")
    labels = [r.label for r in preset.runs]
    finals = [res.curves[l].final_mean() for l in labels]
    decreasing = all(a > b for a, b in zip(finals, finals[1:]))
    seps = [
        paired_separation(res.curves[l1], res.curves[l2])
        for l1, l2 in zip(labels, labels[1:])
    ]
    sep_ok = all(s >= preset.threshold("stderr-separation") for s in seps)
    report(
        "monotonicity-vary-K",
        decreasing and sep_ok,
        "finals " + " > ".join(f"{v:.1f}" for v in finals)
        + "; adjacent separations " + ", ".join(f"{s:.1f}" for s in seps) + " sigma",
    )
    assert decreasing and sep_ok


def test_monotonicity_vary_n(vary_n_result, report):
    res = vary_n_result
    preset = make_preset("vary-N")
    labels = [r.label for r in preset.runs]
    finals = [res.curves[l].final_mean() for l in labels]
    increasing = all(a < b for a, b in zip(finals, finals[1:]))
    seps = [
        paired_separation(res.curves[l2], res.curves[l1])
        for l1, l2 in zip(labels, labels[1:])
    ]
    sep_ok = all(s >= preset.threshold("stderr-separation") for s in seps)
    report(
        "monotonicity-vary-N",
        increasing and sep_ok,
        "finals " + " < ".join(f"{v:.1f}" for v in finals)
        + "; adjacent separations " + ", ".join(f"{s:.1f}" for s in seps) + " sigma",
    )
    assert increasing and sep_ok


# ---------------------------------------------------------------------------
# Criterion: bundle experiments


def test_bundle_experiments(bundle_results, report):
    slope_max = make_preset("bundle-same-reward").threshold("dueling-slope-max")
    slope_min = make_preset("bundle-vs-benchmark").threshold("benchmark-slope-min")
    details = []
    ok = True
    for name in ("bundle-same-reward", "bundle-mixed-reward"):
        for label, curve in bundle_results[name].curves.items():
            s = last_half_slope(curve.mean)
            ok &= s <= slope_max
            details.append(f"{label}={s:.4f}")
    vs = bundle_results["bundle-vs-benchmark"]
    dueling_slope = last_half_slope(vs.curves["maxmin-bundle-ulcb"].mean)
    bench_slope = last_half_slope(vs.curves["ucb-only"].mean)
    ok &= dueling_slope <= slope_max and bench_slope >= slope_min
    details.append(f"benchmark={bench_slope:.3f} (>= {slope_min})")
    report("bundle-experiments", ok, "slopes " + ", ".join(details))
    assert ok


# ---------------------------------------------------------------------------
# Criterion: stability


def test_stability_h0(warm_kernels, report):
    preset = make_preset("stability-H0")
    res = run_experiment(preset)
    run = preset.runs[0]
    counter = res.counters[run.label]
    finals = np.array(
        [
            run_episode(run.algorithm, run.instance, preset.horizon, seed,
                        market=run.market, hypothesis="h0").type_i[-1]
            for seed in range(preset.n_seeds)
        ]
    )
    mean = float(finals.mean())
    stderr = float(finals.std(ddof=1) / np.sqrt(len(finals)))
    bound = stability_null_bound(run.instance.n_goods, ALPHA)
    ok = mean <= bound + 3 * stderr and abs(mean - counter.type_i[-1]) < 1e-9
    report(
        "stability-H0",
        ok,
        f"mean Type-I at T={preset.horizon}: {mean:.2f} <= {bound:.0f} + 3*{stderr:.2f}",
    )
    assert ok


def test_stability_ha(warm_kernels, report):
    preset = make_preset("stability-Ha")
    res = run_experiment(preset)
    counter = res.counters[preset.runs[0].label]
    tail = preset.horizon // 10
    rate = float(counter.infeasible[-1] - counter.infeasible[-tail - 1]) / tail
    rate_ok = rate <= preset.threshold("infeasible-rate-max")
    slope_max = preset.threshold("counter-slope-max")
    t2_slope = last_half_slope(counter.type_ii)
    inf_slope = last_half_slope(counter.infeasible)
    slope_ok = t2_slope <= slope_max and inf_slope <= slope_max
    report(
        "stability-Ha",
        rate_ok and slope_ok,
        f"last-10% infeasible rate={rate:.4f} (<=0.05); counter slopes "
        f"typeII={t2_slope:.4f}, infeasible={inf_slope:.4f} (<= {slope_max})",
    )
    assert rate_ok and slope_ok


# ---------------------------------------------------------------------------
# Criterion: tail-bound suite


def test_tail_bound_suite(report):
    report_obj = tail_bound_test(
        NoiseModel("gaussian", 1.0, seed=0), alpha=ALPHA,
        checkpoints=(10, 100, 1000), reps=10_000,
    )
    detail = "; ".join(
        f"t={c.checkpoint}: ucb={c.ucb_rate:.4f} lcb={c.lcb_rate:.4f} limit={c.limit:.4f}"
        for c in report_obj.checks
    )
    report("tail-bound-suite", report_obj.passed, detail)
    assert report_obj.passed
