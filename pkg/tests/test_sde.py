import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from orthosde.errors import DomainError, NumericalError
from orthosde.increments import GeneratorSpec, Scheme, sample
from orthosde.rng import StreamBlock, UniformSource
from orthosde.sde import (COS_SUM, FOURTH_NORM, SCALED_SQUARE_NORM, SQUARE_NORM, EmState,
                          IdentityDiffusion, SdeModel, em_step, model_brownian, model_case1,
                          model_case2, model_ou, reference_expectation, simulate_terminal,
                          simulate_terminal_batch)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_em_step_identity_noise():
    model = model_brownian(3)
    out = em_step(model, EmState(np.zeros(3)), [0.1, -0.2, 0.3], 0.5)
    assert np.array_equal(out.x, [0.1, -0.2, 0.3])
    assert out.step_index == 1


def test_em_step_scalar_linear_model():
    model = SdeModel(1, [1.0], lambda x: x, _DiagX())
    out = em_step(model, EmState(np.array([1.0])), [0.1], 0.01)
    assert out.x[0] == pytest.approx(1.11, abs=1e-15)


class _DiagX(IdentityDiffusion):
    def apply(self, x, dz):
        return x * dz


def test_em_step_case1_fixed_point():
    model = model_case1(5)
    out = em_step(model, EmState(np.ones(5)), np.zeros(5), 0.3)
    assert np.array_equal(out.x, np.ones(5))


def test_em_step_errors():
    model = model_brownian(2)
    with pytest.raises(DomainError):
        em_step(model, EmState(np.zeros(2)), [1.0], 0.1)
    with pytest.raises(DomainError):
        em_step(model, EmState(np.zeros(2)), [1.0, 1.0], 0.0)
    blowup = SdeModel(1, [1e300], lambda x: x * 1e300, IdentityDiffusion())
    with np.errstate(over="ignore"), pytest.raises(NumericalError):
        em_step(blowup, EmState(np.array([1e300])), [0.0], 1.0)


def test_case1_drift():
    drift = model_case1(2).drift
    assert np.array_equal(drift(np.array([1.0, 3.0])), [-1.0, 1.0])
    assert np.array_equal(model_case1(3).drift(np.array([0.0, 1.0, 2.0])), [-1.0, 0.0, 1.0])
    assert np.array_equal(model_case1(4).drift(np.full(4, 2.5)), np.zeros(4))


@given(arrays(float, st.integers(1, 40), elements=finite))
def test_case1_drift_sums_to_zero(x):
    b = model_case1(len(x)).drift(x)
    assert abs(b.sum()) <= 1e-9 * max(1.0, np.abs(x).max()) * len(x)


def test_case2_rows():
    x = np.array([1.0, 2.0, 3.0])
    sigma = model_case2(3).diffusion.matrix(x)
    assert np.array_equal(sigma[1], [1, 2, 3])
    assert np.array_equal(sigma[0], [1, 2, 0])
    assert np.array_equal(sigma[2], [0, 2, 3])
    with pytest.raises(DomainError):
        model_case2(1)


@given(st.integers(2, 12).flatmap(lambda d: st.tuples(
    arrays(float, d, elements=finite), arrays(float, d, elements=finite))))
def test_case2_structured_product_matches_matrix(xz):
    x, dz = xz
    diff = model_case2(len(x)).diffusion
    np.testing.assert_allclose(diff.apply(x, dz), diff.matrix(x) @ dz, rtol=1e-12, atol=1e-9)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_em_step_linear_in_noise_without_drift(a, b):
    model = model_case2(4)
    x = np.array([0.5, -1.0, 2.0, 1.5])
    dz1 = np.array([0.1, 0.2, -0.3, 0.4])
    dz2 = np.array([-0.5, 0.0, 0.25, 1.0])
    step = lambda dz: em_step(model, EmState(x), dz, 0.1).x - x
    np.testing.assert_allclose(step(a * dz1 + b * dz2), a * step(dz1) + b * step(dz2), atol=1e-12)


def test_builtin_drifts():
    assert np.array_equal(model_brownian(3).drift(np.array([1.0, 2.0, 3.0])), np.zeros(3))
    assert np.array_equal(model_ou(2, 1.0).drift(np.array([2.0, -2.0])), [-2.0, 2.0])
    assert np.array_equal(model_ou(3).x0, np.ones(3))
    assert np.array_equal(model_brownian(3).x0, np.zeros(3))


def em_ou_second_moment(d, T, n, rate=1.0, x0=1.0):
    """Exact E|X_n|^2 for the EM recursion x <- (1 - r h) x + dz with
    uncorrelated unit-variance-per-time noise."""
    h = T / n
    a = (1 - rate * h) ** 2
    return d * (a ** n * x0 ** 2 + h * (1 - a ** n) / (1 - a))


def test_ou_closed_form():
    ref = reference_expectation(model_ou(4), SQUARE_NORM, 1.0)
    assert ref == pytest.approx(4 * (math.exp(-2) + (1 - math.exp(-2)) / 2), rel=1e-14)
    assert ref == pytest.approx(2.270671, abs=5e-7)
    assert em_ou_second_moment(4, 1.0, 10 ** 6) == pytest.approx(ref, abs=1e-5)


def test_ou_closed_form_against_fine_gaussian_em():
    model = model_ou(4)
    n = 256
    spec = GeneratorSpec.make(Scheme.GAUSSIAN, 4, 1.0, n)
    x = simulate_terminal_batch(model, spec, n, 1.0, StreamBlock(21, np.arange(40000)))
    vals = SQUARE_NORM(x)
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - em_ou_second_moment(4, 1.0, n)) < 4 * se


def test_brownian_references():
    m = model_brownian(5)
    assert reference_expectation(m, FOURTH_NORM, 2.0) == (25 + 10) * 4.0
    assert reference_expectation(m, SCALED_SQUARE_NORM, 1.0) == 1.0
    assert reference_expectation(m, COS_SUM, 1.0) == pytest.approx(math.exp(-2.5))
    with pytest.raises(DomainError):
        reference_expectation(model_case2(3), SQUARE_NORM, 1.0)


def test_simulate_one_step_brownian():
    model = model_brownian(4)
    spec = GeneratorSpec.make(Scheme.WALSH_GRAY, 4, 1.0, 1)
    x = simulate_terminal(model, spec, 1, 1.0, UniformSource(3, 1))
    assert np.array_equal(x, sample(spec, UniformSource(3, 1)))


def test_simulate_rejects_bad_grid():
    model = model_brownian(2)
    with pytest.raises(DomainError):
        simulate_terminal(model, GeneratorSpec(Scheme.HAAR, 2, 1.0), 0, 1.0, UniformSource(0))
    with pytest.raises(DomainError):
        simulate_terminal(model, GeneratorSpec(Scheme.HAAR, 2, 0.5), 4, 1.0, UniformSource(0))
    with pytest.raises(DomainError):
        simulate_terminal(model, GeneratorSpec(Scheme.HAAR, 3, 0.25), 4, 1.0, UniformSource(0))


def test_ou_stability_smoke():
    n = 2 ** 10
    spec = GeneratorSpec.make(Scheme.GAUSSIAN, 1, 1.0, n)
    x = simulate_terminal_batch(model_ou(1), spec, n, 1.0, StreamBlock(0, np.arange(1000)))
    assert np.all(np.isfinite(x))
    assert np.abs(x).max() < 10
    assert np.all(np.isfinite(simulate_terminal(model_ou(1), spec, n, 1.0, UniformSource(0, 7))))


@pytest.mark.parametrize("factory", [model_case1, model_case2, model_ou, model_brownian])
@pytest.mark.parametrize("kind", list(Scheme))
def test_batch_simulation_matches_scalar(factory, kind):
    model = factory(6)
    spec = GeneratorSpec.make(kind, 6, 1.0, 8)
    batch = simulate_terminal_batch(model, spec, 8, 1.0, StreamBlock(9, np.arange(20)))
    for t in range(20):
        assert np.array_equal(batch[t], simulate_terminal(model, spec, 8, 1.0, UniformSource(9, t)))


@pytest.mark.parametrize("d", [2, 8])
def test_gaussian_brownian_covariance(d):
    T = 1.5
    spec = GeneratorSpec.make(Scheme.GAUSSIAN, d, T, 4)
    x = simulate_terminal_batch(model_brownian(d), spec, 4, T, StreamBlock(4, np.arange(10 ** 5)))
    cov = np.cov(x, rowvar=False)
    np.testing.assert_allclose(np.diag(cov), T, rtol=0.02)
    off = cov[~np.eye(d, dtype=bool)]
    assert np.abs(off).max() < 0.02 * T


def test_test_functions():
    x = np.array([[1.0, 2.0], [0.0, 0.0]])
    assert np.array_equal(SQUARE_NORM(x), [5.0, 0.0])
    assert np.array_equal(SCALED_SQUARE_NORM(x), [2.5, 0.0])
    assert np.array_equal(FOURTH_NORM(x), [25.0, 0.0])
    assert COS_SUM(np.array([math.pi, 0.0])) == pytest.approx(-1.0)
