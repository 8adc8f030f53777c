"""Command-line interface.

Every subcommand validates its arguments before running anything, writes a
CSV table (stdout or ``--out``) and, with ``--plot``, a matplotlib script
that reads it.  All randomness is keyed by ``--seed``, falling back to the
ORTHOSDE_SEED environment variable.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import csvio, systems
from .errors import CapacityError, DomainError, NumericalError
from .harness import CI_95, REPRODUCTION_CI, McConfig, bench, convergence_study, run_mc, running_means, \
    stopping_time_experiment, trial_values
from .increments import GeneratorSpec, Scheme, default_K
from .moments import (MAX_PRODUCT_ATOMS, exact_terminal_expectation, fourth_moment_bias,
                      gaussian_fourth_norm, verify_moment_conditions)
from .sde import FOURTH_NORM, MODELS, TEST_FUNCTIONS, model_brownian, model_ou

SCHEMES = [s.value for s in Scheme]
DISCRETE = [s.value for s in Scheme if s.is_discrete]


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _scheme_list(text: str) -> list[str]:
    out = [v.strip() for v in text.split(",") if v.strip()]
    if out == ["all"]:
        return list(SCHEMES)
    bad = [v for v in out if v not in SCHEMES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown scheme(s) {bad}; choose from {SCHEMES}")
    return out


def _default_seed() -> int:
    env = os.environ.get("ORTHOSDE_SEED")
    if env is None:
        return 0
    try:
        return int(env, 0)
    except ValueError:
        raise SystemExit(f"ORTHOSDE_SEED must be an integer, got {env!r}")


def _common(p: argparse.ArgumentParser, *, mc: bool = True) -> None:
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--plot", help="also write a matplotlib script for the CSV to this path")
    if mc:
        p.add_argument("--seed", type=int, default=None, help="master seed (default: $ORTHOSDE_SEED or 0)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--paper-ci", action="store_true",
                       help=f"use the {REPRODUCTION_CI} interval multiplier instead of {CI_95}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orthosde", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="exact moment conditions and odd-ordered checks")
    p.add_argument("--scheme", type=_scheme_list, default=None,
                   help="comma-separated schemes or 'all' (default: all discrete schemes)")
    p.add_argument("--d", type=int, help="dimension; omit to sweep every d <= 2^(K-1) for K <= --K")
    p.add_argument("--K", type=int)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--odd-ordered", action="store_true", help="check the Gray-code map for all k <= --K")
    _common(p, mc=False)

    p = sub.add_parser("simulate", help="running Monte Carlo mean of E f(X_T)")
    p.add_argument("--model", choices=sorted(MODELS), default="case1")
    p.add_argument("--f", choices=sorted(TEST_FUNCTIONS), default="cos-sum")
    p.add_argument("--scheme", type=_scheme_list, default=["walsh-gray"])
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--K", type=int)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--m", type=int, default=65536)
    _common(p)

    p = sub.add_parser("bias", help="fourth-moment bias for Brownian motion, |x|^4")
    p.add_argument("--scheme", type=_scheme_list, default=["walsh-gray"])
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--K", type=int)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--m", type=int, default=100000)
    _common(p)

    p = sub.add_parser("convergence", help="weak error against a closed form, with fitted slope")
    p.add_argument("--model", choices=["ou", "brownian"], default="ou")
    p.add_argument("--f", choices=sorted(TEST_FUNCTIONS), default="square-norm")
    p.add_argument("--rate", type=float, default=1.0, help="OU mean-reversion rate")
    p.add_argument("--scheme", type=_scheme_list, default=["gaussian"])
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--K", type=int)
    p.add_argument("--n", type=_int_list, default=[4, 8, 16, 32])
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--m", type=int, default=100000)
    _common(p)

    p = sub.add_parser("bench", help="wall time, draw counts and variance per scheme and d")
    p.add_argument("--model", choices=sorted(MODELS), default="case1")
    p.add_argument("--f", choices=sorted(TEST_FUNCTIONS), default="cos-sum")
    p.add_argument("--scheme", type=_scheme_list, default=list(SCHEMES))
    p.add_argument("--d", type=_int_list, default=[32, 64, 128, 256])
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--m", type=int, default=10000)
    _common(p)

    p = sub.add_parser("stopping", help="time until the Brownian |x|^2/d estimate is within epsilon")
    p.add_argument("--scheme", type=_scheme_list, default=list(SCHEMES))
    p.add_argument("--d", type=_int_list, default=[32])
    p.add_argument("--K", type=int)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--batch", type=int, default=1024)
    p.add_argument("--max-trials", type=int, default=10 ** 8)
    _common(p)
    return parser


def _config(args, m: int) -> McConfig:
    seed = args.seed if args.seed is not None else _default_seed()
    return McConfig(m=m, seed=seed, threads=args.threads,
                    ci_multiplier=REPRODUCTION_CI if args.paper_ci else CI_95)


def _spec(scheme, d, T, n, K) -> GeneratorSpec:
    return GeneratorSpec.make(scheme, d, T, n, K if Scheme(scheme).is_discrete else None)


# -- commands ----------------------------------------------------------------
# Each returns (columns, rows, comments, exit_code, plot_axes).

def cmd_verify(args):
    schemes = args.scheme or DISCRETE
    if args.d is not None:
        specs = [_spec(s, args.d, args.T, args.n, args.K) for s in schemes]
    elif args.odd_ordered and args.scheme is None:
        specs = []
    else:
        top = args.K if args.K is not None else 6
        if top > 10:
            raise UsageError("sweeps are limited to K <= 10; pass --d for a single dimension")
        specs = [GeneratorSpec.make(s, d, args.T, args.n, K)
                 for s in schemes if Scheme(s).is_discrete
                 for K in range(1, top + 1) for d in range(1, 2 ** (K - 1) + 1)]
    if args.odd_ordered and args.K is None:
        raise UsageError("--odd-ordered needs --K")
    if args.odd_ordered and not 1 <= args.K <= 24:
        raise UsageError("--odd-ordered supports K in 1..24")

    rows, failed = [], []
    for spec in specs:
        rep = verify_moment_conditions(spec)
        for row in rep.csv_rows():
            rows.append(row + (int(row[-1] <= rep.tolerance),))
        failed += [f"{spec.kind.value} d={spec.d} K={spec.K}: {c} moment off by "
                   f"{rep.violations()[c]:.3g}" for c in rep.failures()]
    if args.odd_ordered:
        ok = systems.is_odd_ordered(systems.phi_gray, args.K)
        rows.append(("phi-gray", None, args.K, "odd-ordered", 0.0 if ok else 1.0, int(ok)))
        if not ok:
            failed.append(f"phi-gray is not odd-ordered at K={args.K}")
    for msg in failed:
        print(f"FAIL {msg}", file=sys.stderr)
    columns = ["scheme", "d", "K", "condition", "max_abs_violation", "pass"]
    return columns, rows, [f"dt={args.T / args.n!r}"], 1 if failed else 0, ("d", "max_abs_violation")


def _checkpoints(m: int) -> list[int]:
    pts = {m}
    k = 2
    while k < m:
        pts.add(k)
        k *= 2
    step = max(2, m // 64)
    pts.update(range(step, m, step))
    return sorted(pts)


def cmd_simulate(args):
    factory = MODELS[args.model]
    model = factory(args.d)
    f = TEST_FUNCTIONS[args.f]
    specs = [_spec(s, args.d, args.T, args.n, args.K) for s in args.scheme]
    cfg = _config(args, args.m)
    rows = []
    for spec in specs:
        values, _ = trial_values(model, f, spec, args.n, args.T, cfg)
        for k, mean, lo, hi in running_means(values, _checkpoints(args.m), cfg.ci_multiplier):
            rows.append((spec.kind.value, k, mean, lo, hi))
    comments = [f"model={args.model} f={args.f} d={args.d} n={args.n} T={args.T!r} seed={cfg.seed} "
                f"ci_multiplier={cfg.ci_multiplier}"]
    return ["scheme", "trials", "running_mean", "ci_low", "ci_high"], rows, comments, 0, ("trials", "running_mean")


def cmd_bias(args):
    specs = [_spec(s, args.d, args.T, args.n, args.K) for s in args.scheme]
    cfg = _config(args, args.m)
    model = model_brownian(args.d)
    g = gaussian_fourth_norm(args.d, args.T)
    rows = []
    for spec in specs:
        analytic = fourth_moment_bias(spec.kind, args.d, spec.K, args.T, args.n).value
        exact = None
        if spec.kind.is_discrete and (1 << spec.K) ** args.n <= MAX_PRODUCT_ATOMS:
            exact = g - exact_terminal_expectation(model, FOURTH_NORM, spec, args.n)
        res = run_mc(model, FOURTH_NORM, spec, args.n, args.T, cfg)
        rows.append((spec.kind.value, args.d, spec.K, args.n, args.T, args.m, analytic, exact,
                     g - res.mean, g - res.ci_high, g - res.ci_low, res.std_error))
    columns = ["scheme", "d", "K", "n", "T", "m", "analytic_bias", "enumerated_bias",
               "empirical_bias", "ci_low", "ci_high", "std_error"]
    return columns, rows, [f"bias = E|W_T|^4 - E|X_T^(n)|^4; seed={cfg.seed}"], 0, ("n", "empirical_bias")


def cmd_convergence(args):
    model = model_ou(args.d, args.rate) if args.model == "ou" else model_brownian(args.d)
    f = TEST_FUNCTIONS[args.f]
    for s in args.scheme:
        for n in args.n:
            _spec(s, args.d, args.T, n, args.K)
    if len(args.n) < 2:
        raise UsageError("--n needs at least two step counts")
    cfg = _config(args, args.m)
    rows = []
    for s in args.scheme:
        study = convergence_study(model, f, s, args.T, args.n, cfg,
                                  K=args.K if Scheme(s).is_discrete else None)
        for p in study.points:
            rows.append((s, p.n, p.mean, study.reference, abs(p.error), p.std_error, abs(p.error) * p.n,
                         study.slope))
    columns = ["scheme", "n", "mean", "reference", "abs_error", "std_error", "n_times_error", "fitted_slope"]
    comments = [f"model={args.model} f={args.f} d={args.d} T={args.T!r} m={args.m} seed={cfg.seed}"]
    return columns, rows, comments, 0, ("n", "abs_error")


def cmd_bench(args):
    for d in args.d:
        MODELS[args.model](d)
        for s in args.scheme:
            _spec(s, d, args.T, args.n, None)
    cfg = _config(args, args.m)
    out = bench(args.scheme, args.d, args.n, args.T, cfg, MODELS[args.model], TEST_FUNCTIONS[args.f])
    rows = [(r.scheme, r.d, r.K, r.wall_seconds, r.uniform_draws, r.uniform_draws / (args.m * args.n),
             r.variance, r.stddev_per_second) for r in out]
    columns = ["scheme", "d", "K", "wall_seconds", "uniform_draws", "draws_per_step", "variance",
               "stddev_per_second"]
    comments = [f"model={args.model} f={args.f} n={args.n} m={args.m} seed={cfg.seed} threads={cfg.threads}"]
    return columns, rows, comments, 0, ("d", "wall_seconds")


def cmd_stopping(args):
    if not args.epsilon > 0:
        raise UsageError("--epsilon must be positive")
    for d in args.d:
        for s in args.scheme:
            _spec(s, d, args.T, args.n, args.K)
    cfg = McConfig(m=max(2, args.batch), seed=args.seed if args.seed is not None else _default_seed(),
                   threads=args.threads)
    rows = []
    for d in args.d:
        for s in args.scheme:
            r = stopping_time_experiment(s, d, args.n, args.T, args.epsilon, args.repeats, cfg,
                                         K=args.K if Scheme(s).is_discrete else None,
                                         batch=args.batch, max_trials=args.max_trials)
            rows.append((s, d, args.n, args.epsilon, args.repeats, r.mean_seconds, r.mean_trials, r.capped))
    columns = ["scheme", "d", "n", "epsilon", "repeats", "mean_wall_seconds", "mean_trials", "capped"]
    return columns, rows, [f"batch={args.batch} seed={cfg.seed}"], 0, ("d", "mean_wall_seconds")


COMMANDS = {
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "bias": cmd_bias,
    "convergence": cmd_convergence,
    "bench": cmd_bench,
    "stopping": cmd_stopping,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        columns, rows, comments, code, axes = COMMANDS[args.command](args)
    except (DomainError, UsageError, CapacityError) as exc:
        parser.error(str(exc))
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    text = csvio.render(columns, rows, comments)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return 4
    else:
        sys.stdout.write(text)
    if args.plot:
        target = args.out or "results.csv"
        script = csvio.plot_script(target, *axes, loglog=args.command == "convergence")
        try:
            Path(args.plot).write_text(script)
        except OSError as exc:
            print(f"error: cannot write {args.plot}: {exc.strerror}", file=sys.stderr)
            return 4
    return code
