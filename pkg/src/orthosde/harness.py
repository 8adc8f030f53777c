"""Monte Carlo drivers: estimates with confidence intervals, convergence
studies, stopping-time runs and timing benchmarks.

Trial ``t`` always runs on stream ``t`` of ``cfg.seed``, so results do not
depend on how trials are chunked or spread over threads.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError
from .increments import GeneratorSpec, Scheme
from .sde import (COS_SUM, SCALED_SQUARE_NORM, SdeModel, TestFunction, model_brownian,
                  model_case1, reference_expectation, simulate_terminal_batch)
from .rng import StreamBlock

log = logging.getLogger(__name__)

CI_95 = 1.96
REPRODUCTION_CI = 2.262


@dataclass(frozen=True)
class McConfig:
    m: int
    seed: int = 0
    ci_multiplier: float = CI_95
    threads: int = 1
    chunk_size: int = 1 << 16

    def __post_init__(self):
        if self.m < 2:
            raise DomainError(f"need at least 2 trials for an unbiased variance, got m={self.m}")
        if self.threads < 1:
            raise DomainError(f"threads must be >= 1, got {self.threads}")
        if self.chunk_size < 1:
            raise DomainError("chunk_size must be positive")


@dataclass(frozen=True)
class McResult:
    mean: float
    unbiased_variance: float
    ci_low: float
    ci_high: float
    wall_seconds: float
    uniform_draws: int
    m: int

    @property
    def std_error(self) -> float:
        return math.sqrt(self.unbiased_variance / self.m)


def summarize(values: np.ndarray, ci_multiplier: float, wall_seconds: float = 0.0,
              uniform_draws: int = 0) -> McResult:
    m = len(values)
    mean = float(np.mean(values))
    var = float(np.var(values, ddof=1))
    half = ci_multiplier * math.sqrt(var / m)
    return McResult(mean, var, mean - half, mean + half, wall_seconds, uniform_draws, m)


def trial_values(model: SdeModel, f: TestFunction, spec: GeneratorSpec, n: int, T: float,
                 cfg: McConfig, first_trial: int = 0, count: int | None = None) -> tuple[np.ndarray, int]:
    """f(X_T) for trials ``first_trial .. first_trial + count - 1`` and the
    number of uniform words they consumed."""
    count = cfg.m if count is None else count
    values = np.empty(count)
    chunk = max(1, min(cfg.chunk_size, (1 << 22) // model.d))
    bounds = [(s, min(s + chunk, count)) for s in range(0, count, chunk)]

    def run(b):
        lo, hi = b
        block = StreamBlock(cfg.seed, np.arange(first_trial + lo, first_trial + hi))
        values[lo:hi] = f(simulate_terminal_batch(model, spec, n, T, block))
        return block.total_draws

    if cfg.threads == 1 or len(bounds) == 1:
        draws = sum(map(run, bounds))
    else:
        with ThreadPoolExecutor(cfg.threads) as pool:
            draws = sum(pool.map(run, bounds))
    bad = np.flatnonzero(~np.isfinite(values))
    if len(bad):
        raise NumericalError(f"trial {first_trial + int(bad[0])} produced a non-finite value")
    return values, int(draws)


def run_mc(model: SdeModel, f: TestFunction, spec: GeneratorSpec, n: int, T: float,
           cfg: McConfig) -> McResult:
    """Sample mean of f(X_T^(n)) over cfg.m independent trials."""
    t0 = time.perf_counter()
    values, draws = trial_values(model, f, spec, n, T, cfg)
    elapsed = time.perf_counter() - t0
    return summarize(values, cfg.ci_multiplier, elapsed, draws)


def running_means(values: np.ndarray, checkpoints, ci_multiplier: float) -> list[tuple]:
    """(trials, mean, ci_low, ci_high) after each checkpoint count."""
    s1 = np.cumsum(values)
    s2 = np.cumsum(values * values)
    rows = []
    for k in checkpoints:
        mean = s1[k - 1] / k
        var = max(0.0, (s2[k - 1] - k * mean * mean) / (k - 1)) if k > 1 else 0.0
        half = ci_multiplier * math.sqrt(var / k)
        rows.append((k, float(mean), float(mean - half), float(mean + half)))
    return rows


@dataclass(frozen=True)
class ConvergencePoint:
    n: int
    mean: float
    error: float
    std_error: float


@dataclass(frozen=True)
class ConvergenceStudy:
    reference: float
    points: list[ConvergencePoint]
    slope: float


def fit_slope(ns, errors) -> float:
    """Least-squares slope of log|error| against log n."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.abs(np.asarray(errors, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])


def convergence_study(model: SdeModel, f: TestFunction, scheme, T: float, n_list,
                      cfg: McConfig, K: int | None = None) -> ConvergenceStudy:
    """Weak error against the model's closed-form E f(X_T) for each n."""
    reference = reference_expectation(model, f, T)
    if len(n_list) < 2:
        raise DomainError("need at least two step counts to fit a slope")
    points = []
    for n in n_list:
        spec = GeneratorSpec.make(scheme, model.d, T, n, K)
        res = run_mc(model, f, spec, n, T, cfg)
        points.append(ConvergencePoint(n, res.mean, reference - res.mean, res.std_error))
        log.info("n=%d mean=%.6g error=%.3g se=%.2g", n, res.mean, reference - res.mean, res.std_error)
    slope = fit_slope([p.n for p in points], [p.error for p in points])
    return ConvergenceStudy(reference, points, slope)


@dataclass(frozen=True)
class StoppingResult:
    mean_seconds: float
    mean_trials: float
    capped: int
    seconds: list[float] = field(default_factory=list)
    trials: list[int] = field(default_factory=list)


def stopping_time_experiment(scheme, d: int, n: int, T: float, epsilon: float, repeats: int,
                             cfg: McConfig, K: int | None = None, batch: int = 1024,
                             max_trials: int = 10 ** 8) -> StoppingResult:
    """Time until the running mean of |X_T|^2/d for Brownian motion first
    lands within epsilon of its exact value T.

    The running mean is tested after every ``batch`` trials.  Repeat ``r``
    uses trial streams starting at ``r * 2^40``.
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if repeats < 1 or batch < 1:
        raise DomainError("repeats and batch must be positive")
    model = model_brownian(d)
    spec = GeneratorSpec.make(scheme, d, T, n, K)
    target = reference_expectation(model, SCALED_SQUARE_NORM, T)
    seconds, trials, capped = [], [], 0
    for r in range(repeats):
        total, done = 0.0, 0
        t0 = time.perf_counter()
        while True:
            vals, _ = trial_values(model, SCALED_SQUARE_NORM, spec, n, T, cfg,
                                   first_trial=(r << 40) + done, count=batch)
            total += math.fsum(vals.tolist())
            done += batch
            if abs(target - total / done) < epsilon:
                break
            if done >= max_trials:
                capped += 1
                log.warning("repeat %d hit the trial cap %d", r, max_trials)
                break
        seconds.append(time.perf_counter() - t0)
        trials.append(done)
    return StoppingResult(float(np.mean(seconds)), float(np.mean(trials)), capped, seconds, trials)


@dataclass(frozen=True)
class BenchRow:
    scheme: str
    d: int
    K: int | None
    wall_seconds: float
    uniform_draws: int
    variance: float
    stddev_per_second: float


def bench(schemes, d_list, n: int, T: float, cfg: McConfig, model_factory=None,
          f: TestFunction = COS_SUM) -> list[BenchRow]:
    """Time the full m-trial loop per (scheme, d); model defaults to case 1."""
    model_factory = model_factory or model_case1
    rows = []
    for d in d_list:
        model = model_factory(d)
        for scheme in schemes:
            spec = GeneratorSpec.make(scheme, d, T, n)
            res = run_mc(model, f, spec, n, T, cfg)
            sd = math.sqrt(res.unbiased_variance)
            rows.append(BenchRow(Scheme(scheme).value, d, spec.K, res.wall_seconds,
                                 res.uniform_draws, res.unbiased_variance,
                                 sd / res.wall_seconds if res.wall_seconds > 0 else math.inf))
    return rows
