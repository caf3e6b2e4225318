"""Command-line entry point.

Subcommands: ``run`` (presets or instance files), ``verify-oracles``
(production vs brute-force references), ``bounds`` (closed-form regret
ceilings), ``tail-test`` (confidence-bound coverage). Exit codes: 0 success,
2 usage error, 3 oracle budget exceeded, 1 anything else. Errors print one
machine-parsable line ``error: <kind>: <message>`` on stderr.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .bruteforce import (
    bf_bundle_maxmin,
    bf_feasibility,
    bf_maxmin_assignment,
    bf_min_envy_allocation,
)
from .environments import PRESET_NAMES, ExperimentPreset, PresetRun, load_problem, make_preset
from .errors import BudgetExceededError, FairallocError, InputError
from .harness import (
    emit_counters_csv,
    emit_curves_csv,
    run_experiment,
    tail_bound_test,
)
from .markets import MarriageMarket
from .model import BundleFamily, LinearReward
from .environments import NoiseModel
from .oracles import bundle_maxmin, feasibility_oracle, maxmin_assignment, min_envy_allocation

USAGE_EXIT = 2
BUDGET_EXIT = 3


def _fail(kind: str, message: str, code: int) -> int:
    print(f"error: {kind}: {message}", file=sys.stderr)
    return code


def _default_seed() -> int:
    return int(os.environ.get("FAIRALLOC_SEED", "0"))


def _write(path: Path, text: str, force: bool) -> None:
    if path.exists() and not force:
        raise InputError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _cmd_run(args) -> int:
    if bool(args.preset) == bool(args.instance):
        return _fail("usage", "run needs exactly one of --preset or --instance", USAGE_EXIT)
    if args.preset:
        if args.preset not in PRESET_NAMES:
            return _fail(
                "usage",
                f"unknown preset {args.preset!r}; choose from {', '.join(PRESET_NAMES)}",
                USAGE_EXIT,
            )
        preset = make_preset(args.preset)
    else:
        if not args.algo:
            return _fail("usage", "--instance requires --algo", USAGE_EXIT)
        instance, market = load_problem(args.instance)
        run = PresetRun(label=args.algo, algorithm=args.algo, instance=instance, market=market)
        preset = ExperimentPreset(
            name=Path(args.instance).stem,
            horizon=args.horizon or 10_000,
            n_seeds=args.seeds or 20,
            runs=(run,),
        )
    result = run_experiment(
        preset,
        n_seeds=args.seeds,
        horizon=args.horizon,
        seed_base=_default_seed(),
        jobs=args.jobs,
        backend=args.backend,
    )
    out = Path(args.out)
    curves_path = out / f"{preset.name}.csv"
    _write(curves_path, emit_curves_csv(result), args.force)
    written = [curves_path]
    for label, counter in result.counters.items():
        path = out / f"{preset.name}_counters.csv"
        _write(path, emit_counters_csv(counter), args.force)
        written.append(path)
    if result.bound_reports:
        lines = ["theorem,algorithm,bound,empirical,margin,note"]
        lines += [
            f"{br.theorem},{br.label},{float(br.bound)!r},{float(br.empirical)!r},"
            f"{float(br.margin)!r},{br.note}"
            for br in result.bound_reports
        ]
        path = out / f"{preset.name}_bounds.csv"
        _write(path, "\n".join(lines) + "\n", args.force)
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    return 0


def _verify_assignment(rng, trials: int) -> int:
    matches = 0
    for _ in range(trials):
        k = int(rng.integers(1, 5))
        n = int(rng.integers(k, 7))
        values = np.round(rng.standard_normal((k, n)) * 3, 2)
        res = maxmin_assignment(values)
        phi, obj = bf_maxmin_assignment(values)
        matches += int(res.objective == obj and res.allocation.assignment() == phi)
    return matches


def _verify_bundles(rng, trials: int, max_n: int) -> int:
    matches = 0
    rewards_pool = [LinearReward()]
    for _ in range(trials):
        n = int(rng.integers(2, max_n + 1))
        k = int(rng.integers(1, 4))
        fam = BundleFamily.all_subsets(n, k, max_size=int(rng.integers(1, n + 1)))
        x = np.round(rng.standard_normal(n) * 2, 2)
        rewards = rewards_pool * k
        res = bundle_maxmin(x, fam, rewards, k)
        alloc, obj = bf_bundle_maxmin(x, fam, rewards)
        matches += int(abs(res.objective - obj) < 1e-12 and res.allocation == alloc)
    return matches


def _verify_envy(rng, trials: int, max_n: int) -> int:
    matches = 0
    for _ in range(trials):
        n = int(rng.integers(2, max_n + 1))
        k = int(rng.integers(2, 4))
        fam = BundleFamily.all_subsets(n, k, max_size=int(rng.integers(1, n + 1)))
        mu = np.round(rng.standard_normal(n), 2)
        pad = rng.uniform(0, 0.5, n)
        rewards = [LinearReward()] * k
        res = min_envy_allocation(mu - pad, mu + pad, fam, rewards, k)
        alloc, obj = bf_min_envy_allocation(mu - pad, mu + pad, fam, rewards)
        matches += int(abs(res.objective - obj) < 1e-12 and res.allocation == alloc)
    return matches


def _verify_stability(rng, trials: int) -> int:
    matches = 0
    for _ in range(trials):
        n = int(rng.integers(2, 4))
        full = MarriageMarket.full(n)
        subset = tuple(p for p in full.matchings if rng.random() < 0.75) or full.matchings
        market = MarriageMarket(n, n, subset, eta=1.0, epsilon=0.4)
        mu = rng.uniform(0, 5, market.n_goods)
        pad = rng.uniform(0, 1.0, market.n_goods)
        res = feasibility_oracle(1.0, 0.4, mu - pad, mu + pad, market)
        decision, phi = bf_feasibility(1.0, 0.4, mu - pad, mu + pad, market)
        ok = res.decision == decision and (decision == 0 or res.matching == phi)
        matches += int(ok)
    return matches


def _cmd_verify(args) -> int:
    rng = np.random.default_rng(_default_seed())
    total_ok = True
    for name, runner in (
        ("maxmin-assignment", lambda: _verify_assignment(rng, args.trials)),
        ("bundle-maxmin", lambda: _verify_bundles(rng, args.trials, args.max_n)),
        ("min-envy", lambda: _verify_envy(rng, args.trials, args.max_n)),
        ("stability", lambda: _verify_stability(rng, args.trials)),
    ):
        matches = runner()
        print(f"{name}: {matches}/{args.trials} match")
        total_ok &= matches == args.trials
    return 0 if total_ok else 1


def _cmd_bounds(args) -> int:
    if args.preset not in PRESET_NAMES:
        return _fail(
            "usage",
            f"unknown preset {args.preset!r}; choose from {', '.join(PRESET_NAMES)}",
            USAGE_EXIT,
        )
    preset = make_preset(args.preset)
    horizon = args.horizon or preset.horizon
    from .harness import _bound_reports_for, CurveAggregate, CounterAggregate

    shown = 0
    for run in preset.runs:
        empty_curve = CurveAggregate(run.label, np.zeros(1), np.zeros(1), 0)
        counter = None
        if run.market is not None:
            zero = np.zeros(1)
            counter = CounterAggregate(run.label, zero, zero, zero, zero)
        for br in _bound_reports_for(run, empty_curve, counter, horizon, alpha=3.0):
            print(f"{br.theorem} {br.label}: bound={br.bound:.6g} at T={horizon}")
            shown += 1
    if shown == 0:
        print("no bounds available: the preset declares no gap parameters")
    return 0


def _cmd_tail_test(args) -> int:
    noise = NoiseModel(args.noise, args.sigma, seed=_default_seed())
    report = tail_bound_test(
        noise, alpha=args.alpha, checkpoints=tuple(args.checkpoints), reps=args.reps
    )
    for c in report.checks:
        status = "pass" if c.passed else "FAIL"
        print(
            f"t={c.checkpoint}: P(ucb<mu)={c.ucb_rate:.5f} P(lcb>mu)={c.lcb_rate:.5f} "
            f"limit={c.limit:.5f} [{status}]"
        )
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairalloc",
        description="Active-learning fair/stable allocation experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a custom instance file")
    run.add_argument("--preset", help=f"preset name: {', '.join(PRESET_NAMES)}")
    run.add_argument("--instance", help="instance description file (.json or .toml)")
    run.add_argument("--algo", help="algorithm for --instance runs")
    run.add_argument("--seeds", type=int, help="replication count (default: preset)")
    run.add_argument("--horizon", type=int, help="epochs per episode (default: preset)")
    run.add_argument("--out", default="out", help="output directory (default: ./out)")
    run.add_argument("--force", action="store_true", help="overwrite existing outputs")
    run.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                     help="parallel replications (default: available cores)")
    run.add_argument("--backend", choices=("auto", "numba", "numpy"),
                     help="episode engine (default: auto)")
    run.set_defaults(func=_cmd_run)

    verify = sub.add_parser("verify-oracles", help="check oracles against brute force")
    verify.add_argument("--trials", type=int, default=100, help="instances per oracle family")
    verify.add_argument("--max-n", type=int, default=5, dest="max_n",
                        help="max good count for bundle/envy instances")
    verify.set_defaults(func=_cmd_verify)

    bounds = sub.add_parser("bounds", help="evaluate closed-form regret ceilings")
    bounds.add_argument("--preset", required=True, help="preset name")
    bounds.add_argument("--horizon", type=int, help="evaluate at this horizon")
    bounds.set_defaults(func=_cmd_bounds)

    tail = sub.add_parser("tail-test", help="confidence-bound coverage check")
    tail.add_argument("--reps", type=int, default=10_000, help="replications (>= 1000)")
    tail.add_argument("--checkpoints", type=int, nargs="+", default=[10, 100, 1000],
                      help="epochs at which coverage is checked")
    tail.add_argument("--alpha", type=float, default=3.0, help="confidence exponent (> 2)")
    tail.add_argument("--sigma", type=float, default=1.0, help="noise scale")
    tail.add_argument("--noise", choices=("gaussian", "bounded-uniform", "zero"),
                      default="gaussian", help="noise model")
    tail.set_defaults(func=_cmd_tail_test)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        return _fail("budget-exceeded", str(exc), BUDGET_EXIT)
    except InputError as exc:
        return _fail("input", str(exc), USAGE_EXIT)
    except FairallocError as exc:
        return _fail("failure", str(exc), 1)
    except OSError as exc:
        return _fail("io", str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
