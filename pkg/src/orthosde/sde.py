"""Euler-Maruyama stepping with structured diffusion coefficients.

Arrays of states carry the dimension on the last axis, so every drift,
diffusion and test function works unchanged on a single state ``(d,)`` or
on a batch of trials ``(m, d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, NumericalError
from .increments import GeneratorSpec, sample, sample_batch
from .rng import StreamBlock, UniformSource


class Diffusion:
    """sigma(x); ``apply`` returns sigma(x) @ dz without forming the matrix."""

    def apply(self, x: np.ndarray, dz: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def matrix(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class IdentityDiffusion(Diffusion):
    def apply(self, x, dz):
        return dz

    def matrix(self, x):
        return np.eye(x.shape[-1])


class NeighbourDiffusion(Diffusion):
    """sigma[i, j] = x[j] for |i - j| <= 1, zero elsewhere; no wraparound."""

    def apply(self, x, dz):
        y = x * dz
        out = y.copy()
        out[..., 1:] += y[..., :-1]
        out[..., :-1] += y[..., 1:]
        return out

    def matrix(self, x):
        d = x.shape[-1]
        i, j = np.indices((d, d))
        return np.where(np.abs(i - j) <= 1, x[j], 0.0)


@dataclass(frozen=True)
class DenseDiffusion(Diffusion):
    fn: Callable[[np.ndarray], np.ndarray]

    def apply(self, x, dz):
        return np.einsum("...ij,...j->...i", self.fn(x), dz)

    def matrix(self, x):
        return self.fn(x)


@dataclass(frozen=True)
class SdeModel:
    d: int
    x0: np.ndarray
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Diffusion
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (self.d,):
            raise DomainError(f"x0 has shape {x0.shape}, expected ({self.d},)")
        object.__setattr__(self, "x0", x0)


def _zero_drift(x):
    return np.zeros_like(x)


def _case1_drift(x):
    return x - x.mean(axis=-1, keepdims=True)


def model_case1(d: int) -> SdeModel:
    """Mean-repelling interaction: b_i(x) = x_i - mean(x), unit noise."""
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    return SdeModel(d, np.ones(d), _case1_drift, IdentityDiffusion(), "case1")


def model_case2(d: int) -> SdeModel:
    """Driftless, tridiagonal state-dependent diffusion."""
    if d < 2:
        raise DomainError(f"case2 needs d >= 2, got {d}")
    return SdeModel(d, np.ones(d), _zero_drift, NeighbourDiffusion(), "case2")


def model_brownian(d: int) -> SdeModel:
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    return SdeModel(d, np.zeros(d), _zero_drift, IdentityDiffusion(), "brownian")


def model_ou(d: int, rate: float = 1.0) -> SdeModel:
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    if not rate > 0:
        raise DomainError(f"rate must be positive, got {rate}")

    def drift(x):
        return -rate * x

    return SdeModel(d, np.ones(d), drift, IdentityDiffusion(), "ou", {"rate": rate})


MODELS: dict[str, Callable[[int], SdeModel]] = {
    "case1": model_case1,
    "case2": model_case2,
    "brownian": model_brownian,
    "ou": model_ou,
}


@dataclass(frozen=True)
class TestFunction:
    __test__ = False

    name: str
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))


def _sq(x):
    return np.einsum("...i,...i->...", x, x)


COS_SUM = TestFunction("cos-sum", lambda x: np.cos(x.sum(axis=-1)))
SCALED_SQUARE_NORM = TestFunction("scaled-square-norm", lambda x: _sq(x) / x.shape[-1])
SQUARE_NORM = TestFunction("square-norm", _sq)
FOURTH_NORM = TestFunction("fourth-norm", lambda x: _sq(x) ** 2)

TEST_FUNCTIONS = {f.name: f for f in (COS_SUM, SCALED_SQUARE_NORM, SQUARE_NORM, FOURTH_NORM)}


@dataclass(frozen=True)
class EmState:
    x: np.ndarray
    step_index: int = 0


def _advance(model: SdeModel, x: np.ndarray, dz: np.ndarray, dt: float) -> np.ndarray:
    return x + model.diffusion.apply(x, dz) + model.drift(x) * dt


def em_step(model: SdeModel, state: EmState, dz, dt: float) -> EmState:
    """x' = x + sigma(x) dz + b(x) dt."""
    dz = np.asarray(dz, dtype=float)
    x = np.asarray(state.x, dtype=float)
    if dz.shape != (model.d,) or x.shape != (model.d,):
        raise DomainError(f"expected vectors of length {model.d}, got x{x.shape} dz{dz.shape}")
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    out = _advance(model, x, dz, dt)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"non-finite state after step {state.step_index + 1}")
    return EmState(out, state.step_index + 1)


def _check_grid(spec: GeneratorSpec, model: SdeModel, n: int, T: float) -> None:
    if n < 1:
        raise DomainError(f"number of steps must be >= 1, got {n}")
    if spec.d != model.d:
        raise DomainError(f"generator dimension {spec.d} != model dimension {model.d}")
    if not math.isclose(spec.dt, T / n, rel_tol=1e-12):
        raise DomainError(f"generator step {spec.dt} does not match T/n = {T / n}")


def simulate_terminal(model: SdeModel, spec: GeneratorSpec, n: int, T: float,
                      src: UniformSource) -> np.ndarray:
    _check_grid(spec, model, n, T)
    state = EmState(model.x0.copy())
    for _ in range(n):
        state = em_step(model, state, sample(spec, src), spec.dt)
    return state.x


def simulate_terminal_batch(model: SdeModel, spec: GeneratorSpec, n: int, T: float,
                            block: StreamBlock) -> np.ndarray:
    """Terminal values for every stream of ``block``, shape ``(m, d)``.

    Row ``i`` equals ``simulate_terminal`` driven by a fresh
    ``UniformSource`` on stream ``block.stream_ids[i]``.
    """
    _check_grid(spec, model, n, T)
    x = np.broadcast_to(model.x0, (len(block), model.d)).copy()
    for _ in range(n):
        x = _advance(model, x, sample_batch(spec, block), spec.dt)
    return x


# -- closed-form references -------------------------------------------------

def _gaussian_product_moments(f: TestFunction, mean: np.ndarray, var: float,
                              sum_var: float) -> float | None:
    """E f(X) for X with independent N(mean_i, var) coordinates, or for
    cos-sum only, any Gaussian X whose coordinate sum has variance sum_var."""
    d = len(mean)
    mu2 = float(mean @ mean)
    second = mu2 + d * var
    if f.name == "square-norm":
        return second
    if f.name == "scaled-square-norm":
        return second / d
    if f.name == "fourth-norm":
        return second ** 2 + 2 * d * var ** 2 + 4 * mu2 * var
    if f.name == "cos-sum":
        return math.cos(float(mean.sum())) * math.exp(-sum_var / 2)
    return None


def reference_expectation(model: SdeModel, f: TestFunction, T: float) -> float:
    """Exact E f(X_T) for the built-in models that have one."""
    d = model.d
    value = None
    if model.name == "brownian":
        value = _gaussian_product_moments(f, model.x0, T, d * T)
    elif model.name == "ou":
        r = model.params["rate"]
        var = -math.expm1(-2 * r * T) / (2 * r)
        value = _gaussian_product_moments(f, model.x0 * math.exp(-r * T), var, d * var)
    elif model.name == "case1" and f.name == "cos-sum":
        # drift components sum to zero, so sum(X) is a Brownian motion with variance d*T
        value = math.cos(float(model.x0.sum())) * math.exp(-d * T / 2)
    if value is None:
        raise DomainError(f"no closed-form reference for {f.name} under model {model.name}")
    return value
