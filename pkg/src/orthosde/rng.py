"""Counter-based 64-bit uniform words keyed by (seed, stream_id).

Word ``c`` of a stream is a fixed function of ``(seed, stream_id, c)``, so a
stream can be evaluated one word at a time (:class:`UniformSource`) or for
many streams at once (:class:`StreamBlock`) with identical results.  The
mixing function is the SplitMix64 finalizer applied twice, with the stream
key folded in between so that streams never coincide up to a counter shift.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream_id: int) -> int:
    return mix64(mix64(seed & MASK64) ^ ((stream_id * GOLDEN) & MASK64) ^ 0x5851F42D4C957F2D)


def word_at(key: int, counter: int) -> int:
    z = mix64(key + (counter + 1) * GOLDEN)
    return mix64(z + key)


class UniformSource:
    """Sequential view of one stream; counts every word handed out."""

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = seed & MASK64
        self.stream_id = stream_id & MASK64
        self._key = stream_key(self.seed, self.stream_id)
        self.draw_count = 0

    def next_u64(self) -> int:
        w = word_at(self._key, self.draw_count)
        self.draw_count += 1
        return w

    def next_unit(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits of one word."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def __repr__(self):
        return f"UniformSource(seed={self.seed}, stream_id={self.stream_id}, draw_count={self.draw_count})"


_U = np.uint64


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U(30))) * _U(_M1)
    z = (z ^ (z >> _U(27))) * _U(_M2)
    return z ^ (z >> _U(31))


def stream_keys(seed: int, stream_ids: np.ndarray) -> np.ndarray:
    ids = np.asarray(stream_ids, dtype=np.uint64)
    s = _U(mix64(seed & MASK64))
    return _mix64_np(s ^ (ids * _U(GOLDEN)) ^ _U(0x5851F42D4C957F2D))


def words_at(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Vectorized :func:`word_at`; broadcasting over keys and counters."""
    z = _mix64_np(keys + (counters + _U(1)) * _U(GOLDEN))
    return _mix64_np(z + keys)


class StreamBlock:
    """Many streams advanced in lockstep, each with its own counter.

    ``draw_counts[i]`` always equals the number of words stream ``i`` has
    consumed, matching what a :class:`UniformSource` for the same stream
    would report after the same sequence of calls.
    """

    def __init__(self, seed: int, stream_ids):
        self.seed = seed & MASK64
        self.stream_ids = np.asarray(stream_ids, dtype=np.uint64)
        self.keys = stream_keys(self.seed, self.stream_ids)
        self.draw_counts = np.zeros(len(self.stream_ids), dtype=np.uint64)

    def __len__(self):
        return len(self.stream_ids)

    def next_words(self) -> np.ndarray:
        """One word per stream."""
        w = words_at(self.keys, self.draw_counts)
        self.draw_counts += _U(1)
        return w

    def take_pair(self, rows: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Next two words of the selected streams (all streams if ``rows`` is None)."""
        if rows is None:
            keys, ctr = self.keys, self.draw_counts
        else:
            keys, ctr = self.keys[rows], self.draw_counts[rows]
        pair = words_at(keys, ctr), words_at(keys, ctr + _U(1))
        if rows is None:
            self.draw_counts += _U(2)
        else:
            self.draw_counts[rows] += _U(2)
        return pair

    @property
    def total_draws(self) -> int:
        return int(self.draw_counts.sum(dtype=np.uint64))
