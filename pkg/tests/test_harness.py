import math

import numpy as np
import pytest

from orthosde.errors import DomainError, NumericalError
from orthosde.harness import (CI_95, REPRODUCTION_CI, McConfig, bench, convergence_study, fit_slope, run_mc,
                              running_means, stopping_time_experiment, summarize, trial_values)
from orthosde.increments import GeneratorSpec
from orthosde.sde import (COS_SUM, SCALED_SQUARE_NORM, SQUARE_NORM, SdeModel, IdentityDiffusion,
                          model_brownian, model_case1, model_ou)


def brownian_run(scheme, d, n, m, seed=0, **kw):
    spec = GeneratorSpec.make(scheme, d, 1.0, n)
    return run_mc(model_brownian(d), SCALED_SQUARE_NORM, spec, n, 1.0, McConfig(m=m, seed=seed, **kw))


def test_brownian_scaled_norm_ci_contains_one():
    res = brownian_run("walsh-gray", 32, 16, 10_000, seed=3)
    assert res.ci_low <= 1.0 <= res.ci_high
    assert res.m == 10_000


def test_ci_multiplier_sets_half_width():
    a = brownian_run("haar", 4, 4, 2000, seed=1)
    b = brownian_run("haar", 4, 4, 2000, seed=1, ci_multiplier=REPRODUCTION_CI)
    assert a.mean == b.mean
    assert math.isclose((b.ci_high - b.mean) / (a.ci_high - a.mean), REPRODUCTION_CI / CI_95)
    assert math.isclose(a.ci_high - a.mean, CI_95 * a.std_error)


@pytest.mark.parametrize("kw", [{"m": 1}, {"m": 0}, {"m": 10, "threads": 0}, {"m": 10, "chunk_size": 0}])
def test_config_rejects(kw):
    with pytest.raises(DomainError):
        McConfig(**kw)


def test_summarize_uses_unbiased_variance():
    res = summarize(np.array([1.0, 2.0, 3.0, 6.0]), 2.0)
    assert res.mean == 3.0
    assert res.unbiased_variance == pytest.approx(14 / 3)
    assert res.ci_low == pytest.approx(3.0 - 2.0 * math.sqrt(14 / 12))


@pytest.mark.parametrize("scheme", ["gaussian", "haar", "walsh-gray", "walsh-bitmask"])
def test_thread_and_chunk_invariance(scheme):
    model = model_case1(32)
    spec = GeneratorSpec.make(scheme, 32, 1.0, 64)
    ref = run_mc(model, COS_SUM, spec, 64, 1.0, McConfig(m=3000, seed=11))
    for threads in (1, 4, 8):
        res = run_mc(model, COS_SUM, spec, 64, 1.0, McConfig(m=3000, seed=11, threads=threads, chunk_size=257))
        assert (res.mean, res.unbiased_variance, res.uniform_draws) == \
            (ref.mean, ref.unbiased_variance, ref.uniform_draws)


def test_trial_values_slices_agree():
    model = model_brownian(5)
    spec = GeneratorSpec.make("gaussian", 5, 1.0, 8)
    cfg = McConfig(m=100, seed=4)
    whole, _ = trial_values(model, SQUARE_NORM, spec, 8, 1.0, cfg)
    part, _ = trial_values(model, SQUARE_NORM, spec, 8, 1.0, cfg, first_trial=40, count=25)
    assert np.array_equal(whole[40:65], part)


def test_seed_changes_result():
    assert brownian_run("haar", 4, 4, 500, seed=1).mean != brownian_run("haar", 4, 4, 500, seed=2).mean


def test_ci_coverage_over_200_seeds():
    runs = [brownian_run("walsh-gray", 8, 8, 1000, seed=s) for s in range(200)]
    hits = sum(r.ci_low <= 1.0 <= r.ci_high for r in runs)
    assert hits >= 180


@pytest.mark.slow
def test_variance_parity_case1():
    model = model_case1(32)
    variances = {}
    for scheme in ("gaussian", "haar", "walsh-gray", "walsh-bitmask"):
        spec = GeneratorSpec.make(scheme, 32, 1.0, 64)
        variances[scheme] = run_mc(model, COS_SUM, spec, 64, 1.0, McConfig(m=100_000, seed=5)).unbiased_variance
    assert max(variances.values()) / min(variances.values()) < 1.5


def test_non_finite_trial_is_reported():
    d = 2
    blowup = SdeModel(d, np.full(d, 10.0), lambda x: x ** 3, IdentityDiffusion(), "blowup")
    spec = GeneratorSpec.make("haar", d, 1.0, 8)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NumericalError, match="trial 0"):
            run_mc(blowup, SQUARE_NORM, spec, 8, 1.0, McConfig(m=4))


def test_running_means_final_point_matches_summary():
    vals = np.random.default_rng(0).normal(size=1000)
    rows = running_means(vals, [2, 10, 1000], 1.96)
    full = summarize(vals, 1.96)
    assert [r[0] for r in rows] == [2, 10, 1000]
    assert rows[-1][1] == pytest.approx(full.mean, rel=1e-12)
    assert rows[-1][2] == pytest.approx(full.ci_low, rel=1e-9)
    assert rows[0][1] == pytest.approx(vals[:2].mean())


def test_fit_slope_exact_power_law():
    ns = [4, 8, 16, 32]
    assert fit_slope(ns, [3.0 / n for n in ns]) == pytest.approx(-1.0)
    assert fit_slope(ns, [-2.0 / n ** 2 for n in ns]) == pytest.approx(-2.0)


def test_convergence_study_shape_and_reference():
    study = convergence_study(model_ou(4), SQUARE_NORM, "walsh-gray", 1.0, [2, 4, 8], McConfig(m=20_000, seed=2))
    assert study.reference == pytest.approx(2.270671, abs=1e-6)
    assert [p.n for p in study.points] == [2, 4, 8]
    for p in study.points:
        assert p.error == pytest.approx(study.reference - p.mean)
    assert study.slope < 0


def test_convergence_study_needs_two_points():
    with pytest.raises(DomainError):
        convergence_study(model_ou(2), SQUARE_NORM, "gaussian", 1.0, [4], McConfig(m=10))


def test_stopping_loose_epsilon_stops_after_first_batch():
    res = stopping_time_experiment("walsh-gray", 8, 4, 1.0, 1.0, 3, McConfig(m=2), batch=256)
    assert res.trials == [256, 256, 256]
    assert res.capped == 0
    assert res.mean_seconds > 0


def test_stopping_cap_is_counted():
    res = stopping_time_experiment("haar", 8, 4, 1.0, 1e-12, 2, McConfig(m=2), batch=64, max_trials=128)
    assert res.trials == [128, 128]
    assert res.capped == 2


@pytest.mark.parametrize("eps", [0.0, -1.0, math.nan])
def test_stopping_rejects_bad_epsilon(eps):
    with pytest.raises(DomainError):
        stopping_time_experiment("haar", 8, 4, 1.0, eps, 1, McConfig(m=2))


def test_stopping_repeats_use_disjoint_streams():
    res = stopping_time_experiment("gaussian", 4, 4, 1.0, 1e-9, 2, McConfig(m=2), batch=32, max_trials=32)
    assert res.capped == 2
    cfg = McConfig(m=2)
    spec = GeneratorSpec.make("gaussian", 4, 1.0, 4)
    a, _ = trial_values(model_brownian(4), SCALED_SQUARE_NORM, spec, 4, 1.0, cfg, first_trial=0, count=32)
    b, _ = trial_values(model_brownian(4), SCALED_SQUARE_NORM, spec, 4, 1.0, cfg, first_trial=1 << 40, count=32)
    assert not np.array_equal(a, b)


def test_bench_draw_counts():
    m, n = 500, 64
    rows = bench(["haar", "walsh-gray", "walsh-bitmask", "gaussian"], [32, 64], n, 1.0, McConfig(m=m, seed=1))
    assert [(r.scheme, r.d) for r in rows] == [(s, d) for d in (32, 64)
                                              for s in ("haar", "walsh-gray", "walsh-bitmask", "gaussian")]
    for r in rows:
        if r.scheme == "gaussian":
            assert r.uniform_draws >= m * n * r.d
            assert r.K is None
        else:
            assert r.uniform_draws == m * n
        assert r.wall_seconds > 0 and r.variance > 0
    for d in (32, 64):
        by = {r.scheme: r.uniform_draws for r in rows if r.d == d}
        assert by["haar"] == by["walsh-gray"] == by["walsh-bitmask"] < by["gaussian"]
