"""Mimicking and Gaussian increments drawn from uniform 64-bit words.

Each sampler exists in two forms: a scalar one that reads words from a
:class:`~orthosde.rng.UniformSource`, and a batch one that draws one
increment per stream of a :class:`~orthosde.rng.StreamBlock`.  Both forms
consume the same words in the same order and return identical values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import systems
from .errors import DomainError
from .rng import StreamBlock, UniformSource


class Scheme(str, enum.Enum):
    GAUSSIAN = "gaussian"
    HAAR = "haar"
    WALSH_GRAY = "walsh-gray"
    WALSH_BITMASK = "walsh-bitmask"

    @property
    def is_discrete(self) -> bool:
        return self is not Scheme.GAUSSIAN

    @property
    def is_walsh(self) -> bool:
        return self in (Scheme.WALSH_GRAY, Scheme.WALSH_BITMASK)


def default_K(d: int) -> int:
    """Smallest K with d <= 2^(K-1)."""
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    return max(1, (d - 1).bit_length() + 1)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: Scheme
    d: int
    dt: float
    K: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Scheme(self.kind))
        if self.d < 1:
            raise DomainError(f"dimension must be >= 1, got {self.d}")
        if not self.dt >= 0 or not math.isfinite(self.dt):
            raise DomainError(f"step size must be finite and >= 0, got {self.dt}")
        if self.kind.is_discrete:
            if self.K is None:
                object.__setattr__(self, "K", default_K(self.d))
            if not 1 <= self.K <= systems.MAX_K:
                raise DomainError(f"K must be in 1..{systems.MAX_K}, got {self.K}")
            if self.d > 1 << (self.K - 1):
                raise DomainError(f"d={self.d} exceeds 2^(K-1)={1 << (self.K - 1)} for K={self.K}")

    @classmethod
    def make(cls, kind, d: int, T: float = 1.0, n: int = 1, K: int | None = None) -> "GeneratorSpec":
        if n < 1:
            raise DomainError(f"number of steps must be >= 1, got {n}")
        return cls(Scheme(kind), d, T / n, K)

    @property
    def scale(self) -> float:
        return math.sqrt(self.dt)

    @property
    def low_mask(self) -> int:
        return (1 << self.K) - 1


def draws_per_step(spec: GeneratorSpec) -> int | str:
    """Words consumed per increment: exactly 1 for the mimicking schemes."""
    return 1 if spec.kind.is_discrete else "variable"


def min_draws_per_step(spec: GeneratorSpec) -> int:
    return 1 if spec.kind.is_discrete else 2 * ((spec.d + 1) // 2)


# -- value tables -----------------------------------------------------------

@lru_cache(maxsize=128)
def _theta_shifts(d: int) -> np.ndarray:
    """Bit position theta(j)-1 for j = 2..d."""
    return np.array([systems.theta(j) - 1 for j in range(2, d + 1)], dtype=np.uint64)


@lru_cache(maxsize=128)
def _bitmask_masks(K: int, d: int) -> np.ndarray:
    return np.array(systems.bitmask_masks(K, d), dtype=np.uint64)


# -- scalar samplers --------------------------------------------------------

def haar_increment(spec: GeneratorSpec, u: int) -> np.ndarray:
    """Increment for the uniform integer ``u`` in 1..2^K."""
    if not 1 <= u <= 1 << spec.K:
        raise DomainError(f"u={u} not in 1..2^{spec.K}")
    out = np.zeros(spec.d)
    k = (u + 1) // 2
    if k <= spec.d:
        amp = systems.haar_amplitude(spec.K, spec.dt)
        out[k - 1] = amp if u % 2 else -amp
    return out


def walsh_gray_increment(spec: GeneratorSpec, omega: systems.SignVector) -> np.ndarray:
    """Components tau_phi(j)(omega) updated online: two sign flips per j."""
    if omega.K != spec.K:
        raise DomainError(f"sign vector has K={omega.K}, spec has K={spec.K}")
    bits = omega.bits
    t1 = -1 if bits & 1 else 1
    out = np.empty(spec.d)
    v = t1
    out[0] = v
    for j in range(2, spec.d + 1):
        v = v * t1 * (-1 if bits >> (systems.theta(j) - 1) & 1 else 1)
        out[j - 1] = v
    return out * spec.scale


def walsh_bitmask_increment(spec: GeneratorSpec, omega: systems.SignVector) -> np.ndarray:
    if omega.K != spec.K:
        raise DomainError(f"sign vector has K={omega.K}, spec has K={spec.K}")
    masks = systems.bitmask_masks(spec.K, spec.d)
    out = np.array([-1.0 if (m & omega.bits).bit_count() & 1 else 1.0 for m in masks])
    return out * spec.scale


def _require(spec: GeneratorSpec, kind: Scheme) -> None:
    if spec.kind is not kind:
        raise DomainError(f"expected a {kind.value} spec, got {spec.kind.value}")


def sample_haar(spec: GeneratorSpec, src: UniformSource) -> np.ndarray:
    _require(spec, Scheme.HAAR)
    return haar_increment(spec, (src.next_u64() & spec.low_mask) + 1)


def sample_walsh_gray(spec: GeneratorSpec, src: UniformSource) -> np.ndarray:
    _require(spec, Scheme.WALSH_GRAY)
    return walsh_gray_increment(spec, systems.SignVector(src.next_u64() & spec.low_mask, spec.K))


def sample_walsh_bitmask(spec: GeneratorSpec, src: UniformSource) -> np.ndarray:
    _require(spec, Scheme.WALSH_BITMASK)
    return walsh_bitmask_increment(spec, systems.SignVector(src.next_u64() & spec.low_mask, spec.K))


def sample_gaussian(spec: GeneratorSpec, src: UniformSource) -> np.ndarray:
    """Polar Box-Muller: each attempt takes two words and is accepted with
    probability pi/4; an accepted attempt yields two normals."""
    _require(spec, Scheme.GAUSSIAN)
    d = spec.d
    pairs = (d + 1) // 2
    v = np.empty((pairs, 2))
    s = np.empty(pairs)
    for p in range(pairs):
        while True:
            v1 = 2.0 * src.next_unit() - 1.0
            v2 = 2.0 * src.next_unit() - 1.0
            s_p = v1 * v1 + v2 * v2
            if 0.0 < s_p < 1.0:
                break
        v[p] = v1, v2
        s[p] = s_p
    out = (v * _polar_factor(s)[:, None]).reshape(-1)
    return out[:d] * spec.scale


_SCALAR = {
    Scheme.GAUSSIAN: sample_gaussian,
    Scheme.HAAR: sample_haar,
    Scheme.WALSH_GRAY: sample_walsh_gray,
    Scheme.WALSH_BITMASK: sample_walsh_bitmask,
}


def sample(spec: GeneratorSpec, src: UniformSource) -> np.ndarray:
    return _SCALAR[spec.kind](spec, src)


# -- batch samplers ---------------------------------------------------------

def _signs(bits: np.ndarray, shift) -> np.ndarray:
    return 1 - 2 * ((bits >> shift) & np.uint64(1)).astype(np.int8)


def haar_batch(spec: GeneratorSpec, words: np.ndarray) -> np.ndarray:
    u0 = words & np.uint64(spec.low_mask)
    comp = (u0 >> np.uint64(1)).astype(np.int64)
    out = np.zeros((len(words), spec.d))
    hit = np.flatnonzero(comp < spec.d)
    amp = systems.haar_amplitude(spec.K, spec.dt)
    sign = np.where(u0[hit] & np.uint64(1), -amp, amp)
    out[hit, comp[hit]] = sign
    return out


def walsh_gray_batch(spec: GeneratorSpec, words: np.ndarray) -> np.ndarray:
    bits = words & np.uint64(spec.low_mask)
    t1 = _signs(bits, np.uint64(0))
    factors = np.empty((len(words), spec.d), dtype=np.int8)
    factors[:, 0] = t1
    if spec.d > 1:
        factors[:, 1:] = t1[:, None] * _signs(bits[:, None], _theta_shifts(spec.d)[None, :])
    return np.cumprod(factors, axis=1, dtype=np.int8) * spec.scale


def walsh_bitmask_batch(spec: GeneratorSpec, words: np.ndarray) -> np.ndarray:
    bits = words & np.uint64(spec.low_mask)
    parity = np.bitwise_count(bits[:, None] & _bitmask_masks(spec.K, spec.d)[None, :]) & 1
    return (1 - 2 * parity.astype(np.int8)) * spec.scale


def _polar_factor(s: np.ndarray) -> np.ndarray:
    return np.sqrt(-2.0 * np.log(s) / s)


def _units(words: np.ndarray) -> np.ndarray:
    return (words >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def gaussian_batch(spec: GeneratorSpec, block: StreamBlock) -> np.ndarray:
    """Batch polar Box-Muller: pair by pair, streams whose attempt was
    rejected retry until every stream has accepted one."""
    m = len(block)
    pairs = (spec.d + 1) // 2
    z = np.empty((m, 2 * pairs))
    for p in range(pairs):
        rows = None
        while rows is None or len(rows):
            w1, w2 = block.take_pair(rows)
            v1 = 2.0 * _units(w1) - 1.0
            v2 = 2.0 * _units(w2) - 1.0
            s = v1 * v1 + v2 * v2
            acc = (s > 0.0) & (s < 1.0)
            hit = np.flatnonzero(acc) if rows is None else rows[acc]
            f = _polar_factor(s[acc])
            z[hit, 2 * p] = v1[acc] * f
            z[hit, 2 * p + 1] = v2[acc] * f
            rows = np.flatnonzero(~acc) if rows is None else rows[~acc]
    return z[:, : spec.d] * spec.scale


def sample_batch(spec: GeneratorSpec, block: StreamBlock) -> np.ndarray:
    """One increment per stream, shape ``(len(block), d)``."""
    if spec.kind is Scheme.GAUSSIAN:
        return gaussian_batch(spec, block)
    words = block.next_words()
    if spec.kind is Scheme.HAAR:
        return haar_batch(spec, words)
    if spec.kind is Scheme.WALSH_GRAY:
        return walsh_gray_batch(spec, words)
    return walsh_bitmask_batch(spec, words)
