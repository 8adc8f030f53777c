"""Haar point values, Walsh index sets and odd-ordered maps.

Index sets are K-bit integer masks: element ``i`` of a subset of
``{1, ..., K}`` is bit ``i - 1``.  Sign vectors use the same layout, a set
bit meaning ``tau_i = -1``, so evaluating a Walsh function is a popcount
parity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

from .errors import DomainError

MAX_K = 63


def _check_K(K: int) -> None:
    if not 1 <= K <= MAX_K:
        raise DomainError(f"K must be in 1..{MAX_K}, got {K}")


@dataclass(frozen=True)
class IndexSet:
    """Subset S of {1, ..., K} stored as a bit mask."""

    mask: int
    K: int

    def __post_init__(self):
        _check_K(self.K)
        if self.mask < 0 or self.mask >> self.K:
            raise DomainError(f"mask {self.mask:#x} has bits outside 0..{self.K - 1}")

    @classmethod
    def of(cls, elements: Iterable[int], K: int) -> "IndexSet":
        mask = 0
        for i in elements:
            if not 1 <= i <= K:
                raise DomainError(f"element {i} not in 1..{K}")
            mask |= 1 << (i - 1)
        return cls(mask, K)

    @property
    def elements(self) -> frozenset[int]:
        return frozenset(i + 1 for i in range(self.K) if self.mask >> i & 1)

    @property
    def is_odd(self) -> bool:
        return self.mask.bit_count() % 2 == 1

    def __xor__(self, other: "IndexSet") -> "IndexSet":
        if self.K != other.K:
            raise DomainError("index sets over different K")
        return IndexSet(self.mask ^ other.mask, self.K)

    def __repr__(self):
        return f"IndexSet({sorted(self.elements)}, K={self.K})"


@dataclass(frozen=True)
class SignVector:
    """One outcome in {-1, 1}^K; bit i-1 set means tau_i = -1."""

    bits: int
    K: int

    def __post_init__(self):
        _check_K(self.K)
        if self.bits < 0 or self.bits >> self.K:
            raise DomainError(f"sign bits {self.bits:#x} exceed K={self.K}")

    @classmethod
    def from_signs(cls, signs: Sequence[int]) -> "SignVector":
        bits = 0
        for i, s in enumerate(signs):
            if s not in (-1, 1):
                raise DomainError(f"sign must be +1 or -1, got {s}")
            if s == -1:
                bits |= 1 << i
        return cls(bits, len(signs))

    def signs(self) -> tuple[int, ...]:
        return tuple(-1 if self.bits >> i & 1 else 1 for i in range(self.K))


@dataclass(frozen=True)
class HaarIndex:
    K: int
    k: int

    def __post_init__(self):
        _check_K(self.K)
        if not 1 <= self.k <= 1 << (self.K - 1):
            raise DomainError(f"Haar index k={self.k} not in 1..2^{self.K - 1}")


def haar_amplitude(K: int, dt: float = 1.0) -> float:
    """sqrt(2^(K-1) * dt) with a single rounding."""
    return math.sqrt(math.ldexp(dt, K - 1))


def haar_value(idx: HaarIndex, x: int) -> float:
    if not 1 <= x <= 1 << idx.K:
        raise DomainError(f"x={x} not in 1..2^{idx.K}")
    if x == 2 * idx.k - 1:
        return haar_amplitude(idx.K)
    if x == 2 * idx.k:
        return -haar_amplitude(idx.K)
    return 0.0


def tau_eval(S: IndexSet, omega: SignVector) -> int:
    if S.K != omega.K:
        raise DomainError(f"index set has K={S.K}, sign vector has K={omega.K}")
    return -1 if (S.mask & omega.bits).bit_count() & 1 else 1


def _trailing_zeros(x: int) -> int:
    return (x & -x).bit_length() - 1


def theta(k: int) -> int:
    """Position of the second flipped factor in the Gray-code step k-1 -> k."""
    if k < 2:
        raise DomainError(f"theta needs k >= 2, got {k}")
    if k % 2 == 0:
        return 2
    return _trailing_zeros(k - 1) + 2


def eta(k: int) -> int:
    if k < 2:
        raise DomainError(f"eta needs k >= 2, got {k}")
    if k % 2 == 0:
        return 1
    return _trailing_zeros(k - 1) + 1


def _check_range(j: int, hi: int, name: str) -> None:
    if not 1 <= j <= hi:
        raise DomainError(f"{name} index {j} not in 1..{hi}")


def phi_gray_step(prev_mask: int, j: int) -> int:
    """Mask of phi(j) from the mask of phi(j-1), for j >= 2."""
    return prev_mask ^ 1 ^ (1 << (theta(j) - 1))


@lru_cache(maxsize=64)
def phi_gray_table(K: int) -> tuple[int, ...]:
    """Masks of phi(1), ..., phi(2^(K-1)) as a tuple (0-based)."""
    _check_K(K)
    if K > 24:
        raise DomainError(f"full phi table for K={K} is too large; use phi_gray")
    size = 1 << (K - 1)
    out = [1] * size
    for j in range(2, size + 1):
        out[j - 1] = phi_gray_step(out[j - 2], j)
    return tuple(out)


def phi_gray(j: int, K: int) -> IndexSet:
    """The odd-ordered Gray-code map, evaluated in closed form.

    Unrolling the recurrence gives phi(j) = psi(2j) with psi the binary
    reflected Gray code shifted by one, so no iteration over 1..j is needed.
    """
    _check_K(K)
    _check_range(j, 1 << (K - 1), "phi")
    return IndexSet(_psi_mask(2 * j), K)


def _psi_mask(j: int) -> int:
    # psi(j) flips tau_eta(j) at each step starting from the empty set, i.e.
    # the reflected Gray code of j - 1.
    g = j - 1
    return g ^ (g >> 1)


def psi(j: int, K: int) -> IndexSet:
    _check_K(K)
    _check_range(j, 1 << K, "psi")
    return IndexSet(_psi_mask(j), K)


def psi_recursive(j: int, K: int) -> IndexSet:
    """psi by direct iteration of its defining recurrence; O(j)."""
    _check_K(K)
    _check_range(j, 1 << K, "psi")
    mask = 0
    for k in range(2, j + 1):
        mask ^= 1 << (eta(k) - 1)
    return IndexSet(mask, K)


def phi_gray_recursive(j: int, K: int) -> IndexSet:
    """phi by direct iteration of its defining recurrence; O(j)."""
    _check_K(K)
    _check_range(j, 1 << (K - 1), "phi")
    mask = 1
    for k in range(2, j + 1):
        mask = phi_gray_step(mask, k)
    return IndexSet(mask, K)


@lru_cache(maxsize=64)
def _bitmask_table(K: int) -> tuple[int, ...]:
    if K > 24:
        raise DomainError(f"bitmask table for K={K} is too large")
    odd = [m for m in range(1 << K) if m.bit_count() & 1]
    odd.sort(key=lambda m: (m.bit_count(), m))
    return tuple(odd)


def bitmask_masks(K: int, count: int) -> list[int]:
    """First ``count`` masks of the bit-mask enumeration, without building
    the full table: singletons, then triples, quintuples, ... each group in
    increasing mask order."""
    _check_K(K)
    if not 0 <= count <= 1 << (K - 1):
        raise DomainError(f"count {count} exceeds 2^{K - 1}")
    out: list[int] = []
    weight = 1
    while len(out) < count:
        out.extend(_masks_of_weight(K, weight, count - len(out)))
        weight += 2
    return out


def _masks_of_weight(K: int, w: int, limit: int) -> list[int]:
    # Gosper's hack enumerates same-popcount masks in increasing order.
    out = []
    if w > K:
        return out
    m = (1 << w) - 1
    top = 1 << K
    while m < top and len(out) < limit:
        out.append(m)
        c = m & -m
        r = m + c
        m = (((r ^ m) >> 2) // c) | r
    return out


def phi_bitmask(j: int, K: int) -> IndexSet:
    """j-th odd-cardinality subset ordered by (cardinality, mask value)."""
    _check_K(K)
    _check_range(j, 1 << (K - 1), "phi_bitmask")
    return IndexSet(bitmask_masks(K, j)[-1], K)


def odd_sets(k: int) -> frozenset[int]:
    """Masks of all odd-cardinality subsets of {1, ..., k}."""
    return frozenset(m for m in range(1 << k) if m.bit_count() & 1)


def is_odd_ordered(mapping: Callable[[int, int], IndexSet], K: int) -> bool:
    """Check that the images of 1..2^(k-1) are exactly the odd subsets of
    {1..k}, for every k <= K."""
    _check_K(K)
    images = [mapping(j, K).mask for j in range(1, (1 << (K - 1)) + 1)]
    for k in range(1, K + 1):
        if frozenset(images[: 1 << (k - 1)]) != odd_sets(k):
            return False
    return True


def walsh_product_expectation(sets: Sequence[IndexSet]) -> int:
    """E[prod tau_S] under uniform signs: 1 iff the symmetric difference of
    all sets is empty."""
    acc = 0
    K = None
    for s in sets:
        if K is not None and s.K != K:
            raise DomainError("index sets over different K")
        K = s.K
        acc ^= s.mask
    return 1 if acc == 0 else 0


def haar_product_moment(K: int, indices: Sequence[int]) -> float:
    """E[prod_k h_{j_k}(U)] for U uniform on {1, ..., 2^K}."""
    _check_K(K)
    if not indices:
        raise DomainError("need at least one index")
    for j in indices:
        HaarIndex(K, j)
    p = len(indices)
    if p % 2 or any(j != indices[0] for j in indices):
        return 0.0
    e = (p - 2) * (K - 1)
    return haar_amplitude(e + 1)
