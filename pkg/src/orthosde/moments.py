"""Exact moments of the mimicking increments by enumerating atoms.

Every discrete scheme is a function of one uniform K-bit word, so its law is
the uniform distribution over 2^K atoms and every expectation is a finite
sum.  Sums are compensated so that "exact" comparisons are meaningful in
double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import systems
from .errors import CapacityError, DomainError
from .increments import GeneratorSpec, Scheme
from .sde import IdentityDiffusion, SdeModel, TestFunction, reference_expectation

MAX_ENUM_K = 20
MAX_PRODUCT_ATOMS = 1 << 24
TOLERANCE = 1e-12


def compensated_sum(terms: np.ndarray, axis: int = 0) -> np.ndarray:
    """Neumaier summation along ``axis``, vectorized over the other axes."""
    terms = np.moveaxis(np.asarray(terms, dtype=float), axis, 0)
    s = np.zeros(terms.shape[1:])
    c = np.zeros(terms.shape[1:])
    for t in terms:
        u = s + t
        c += np.where(np.abs(s) >= np.abs(t), (s - u) + t, (t - u) + s)
        s = u
    return s + c


def _index_masks(spec: GeneratorSpec) -> list[int]:
    if spec.kind is Scheme.WALSH_GRAY:
        return [systems.phi_gray(j, spec.K).mask for j in range(1, spec.d + 1)]
    return systems.bitmask_masks(spec.K, spec.d)


def enumerate_atoms(spec: GeneratorSpec) -> tuple[np.ndarray, np.ndarray]:
    """All 2^K outcomes as rows of a ``(2^K, d)`` array, with probabilities."""
    if not spec.kind.is_discrete:
        raise DomainError("the Gaussian increment has a continuous law; nothing to enumerate")
    if spec.K > MAX_ENUM_K:
        raise CapacityError(f"K={spec.K} exceeds the enumeration limit {MAX_ENUM_K}")
    n_atoms = 1 << spec.K
    probs = np.full(n_atoms, 1.0 / n_atoms)
    if spec.kind is Scheme.HAAR:
        values = np.zeros((n_atoms, spec.d))
        # h_j is +amp at x = 2j-1 and -amp at x = 2j (rows are x - 1)
        amp = systems.haar_amplitude(spec.K, spec.dt)
        j = np.arange(spec.d)
        values[2 * j, j] = amp
        values[2 * j + 1, j] = -amp
        return values, probs
    omega = np.arange(n_atoms, dtype=np.uint64)[:, None]
    masks = np.array(_index_masks(spec), dtype=np.uint64)[None, :]
    values = 1.0 - 2.0 * (np.bitwise_count(omega & masks) & 1)
    return values * spec.scale, probs


@dataclass(frozen=True)
class MomentReport:
    scheme: str
    d: int
    K: int | None
    dt: float
    first: float
    second: float
    third: float
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return max(self.first, self.second, self.third) <= self.tolerance

    def failures(self) -> list[str]:
        return [name for name, v in self.violations().items() if not v <= self.tolerance]

    def violations(self) -> dict[str, float]:
        return {"first": self.first, "second": self.second, "third": self.third}

    def csv_rows(self) -> list[tuple]:
        return [(self.scheme, self.d, self.K, cond, v) for cond, v in self.violations().items()]


def mixed_moments(spec: GeneratorSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """E[z_a], E[z_a z_b] and E[z_a z_b z_c] by exact enumeration."""
    values, probs = enumerate_atoms(spec)
    d = spec.d
    if (d ** 3) * len(probs) > 1 << 30:
        raise CapacityError(f"third-moment tensor for d={d}, K={spec.K} is too large")
    weighted = values * probs[:, None]
    m1 = compensated_sum(weighted)
    m2 = compensated_sum(np.einsum("xa,xb->xab", weighted, values))
    m3 = compensated_sum(np.einsum("xa,xb,xc->xabc", weighted, values, values))
    return m1, m2, m3


def verify_moment_conditions(spec: GeneratorSpec, tolerance: float = TOLERANCE) -> MomentReport:
    """Max deviation of the first three mixed moments from 0, dt*I and 0."""
    if spec.kind is Scheme.GAUSSIAN:
        # moments of N(0, dt I) match by definition
        return MomentReport(spec.kind.value, spec.d, None, spec.dt, 0.0, 0.0, 0.0, tolerance)
    m1, m2, m3 = mixed_moments(spec)
    target2 = spec.dt * np.eye(spec.d)
    return MomentReport(
        spec.kind.value, spec.d, spec.K, spec.dt,
        float(np.abs(m1).max()),
        float(np.abs(m2 - target2).max()),
        float(np.abs(m3).max()),
        tolerance,
    )


def enumerated_M2p(spec: GeneratorSpec, p: int) -> float:
    values, probs = enumerate_atoms(spec)
    norms = np.einsum("xa,xa->x", values, values)
    return math.fsum((probs * norms ** p).tolist())


def closed_form_M2p(spec: GeneratorSpec, p: int) -> float:
    """E|dZ|^(2p) in closed form."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    d, h = spec.d, spec.dt
    if spec.kind is Scheme.HAAR:
        return d * float(2 ** ((spec.K - 1) * (p - 1))) * h ** p
    if spec.kind.is_walsh:
        return float(d ** p) * h ** p
    # chi-square with d degrees of freedom: E[(chi2_d)^p] = d (d+2) ... (d+2p-2)
    return float(math.prod(d + 2 * i for i in range(p))) * h ** p


def gaussian_M2p_bounds(d: int, p: int, dt: float) -> tuple[float, float]:
    """Lower (multinomial count) and upper (power-mean) bounds on the
    Gaussian E|dW|^(2p)."""
    lower = math.factorial(p + d - 1) / math.factorial(d - 1)
    upper = d ** p * math.prod(range(1, 2 * p, 2))
    return lower * dt ** p, upper * dt ** p


@dataclass(frozen=True)
class BiasFormula:
    scheme: str
    d: int
    K: int | None
    T: float
    n: int
    value: float


def fourth_moment_bias(scheme, d: int, K: int | None, T: float, n: int) -> BiasFormula:
    """E|W_T|^4 - E|sum of n increments|^4 for the driftless unit-noise model
    started at the origin."""
    scheme = Scheme(scheme)
    if n < 1 or d < 1 or not T > 0:
        raise DomainError("need n >= 1, d >= 1, T > 0")
    if scheme is Scheme.GAUSSIAN:
        return BiasFormula(scheme.value, d, None, T, n, 0.0)
    K = GeneratorSpec(scheme, d, T / n, K).K
    if scheme is Scheme.HAAR:
        value = (2 * d + d * (d - 2 ** (K - 1))) * T ** 2 / n
    else:
        value = 2 * d * T ** 2 / n
    return BiasFormula(scheme.value, d, K, T, n, value)


def gaussian_fourth_norm(d: int, T: float) -> float:
    return (d * d + 2 * d) * T ** 2


def _is_driftless_unit_noise(model: SdeModel) -> bool:
    if not isinstance(model.diffusion, IdentityDiffusion):
        return False
    probes = np.vstack([model.x0, np.linspace(-2.0, 3.0, 5 * model.d).reshape(5, model.d)])
    return bool(np.all(model.drift(probes) == 0))


def exact_terminal_expectation(model: SdeModel, f: TestFunction, spec: GeneratorSpec, n: int) -> float:
    """E f(x0 + dZ_1 + ... + dZ_n) over the full product law.

    For the Gaussian scheme the Brownian closed form is returned instead.
    """
    if not _is_driftless_unit_noise(model):
        raise DomainError("exact enumeration needs a driftless model with identity diffusion")
    if spec.d != model.d:
        raise DomainError(f"generator dimension {spec.d} != model dimension {model.d}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    T = spec.dt * n
    if spec.kind is Scheme.GAUSSIAN:
        return reference_expectation(model, f, T)
    base = 1 << spec.K
    total = base ** n
    if total > MAX_PRODUCT_ATOMS:
        raise CapacityError(f"(2^{spec.K})^{n} = {total} atoms exceeds {MAX_PRODUCT_ATOMS}")
    atoms, _ = enumerate_atoms(spec)
    partial = []
    chunk = 1 << 16
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        x = np.broadcast_to(model.x0, (len(idx), model.d)).copy()
        for _ in range(n):
            x += atoms[idx % base]
            idx = idx // base
        partial.append(math.fsum(f(x).tolist()))
    return math.fsum(partial) / total
