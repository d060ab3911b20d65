"""Keyed counter-based random streams.

A stream is the Philox4x64-10 sequence under a 128-bit key.  The key is
itself a Philox block of ``(scenario, grid_index, sample_index, channel)``
under a seed-derived key, so deriving a stream is O(1) and depends on
nothing but ``(seed, key)``.

Draw ``i`` of a stream is lane ``i % 4`` of the block with counter
``i // 4 + 1`` (numpy's ``Philox`` convention), so any draw can be addressed
directly.  The compiled core implements the same function.

Conversions from a raw 64-bit draw ``x``:

* uniform: ``(x >> 11) * 2**-53`` in ``[0, 1)``
* open uniform: ``((x >> 11) + 0.5) * 2**-53`` in ``(0, 1)``
* normal: ``ndtri(open uniform)``
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.special import ndtri

MASK64 = (1 << 64) - 1
DOMAIN = 0x6974657273757276  # "itersurv"
_M0, _M1 = 0xD2E7470EE14C6C93, 0xCA5A826395121157
_W0, _W1 = 0x9E3779B97F4A7C15, 0xBB67AE8584CAA73B
_TWO53 = 2.0**-53

INNER, OUTER_PLUS, OUTER_MINUS = 0, 1, 2


class StreamKey(NamedTuple):
    scenario: int = 0
    grid_index: int = 0
    sample_index: int = 0
    channel: int = 0


def philox_block(key: tuple[int, int], counter: tuple[int, int, int, int]) -> tuple[int, ...]:
    """One Philox4x64-10 block."""
    k0, k1 = key
    c0, c1, c2, c3 = counter
    for r in range(10):
        if r:
            k0 = (k0 + _W0) & MASK64
            k1 = (k1 + _W1) & MASK64
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (p1 >> 64) ^ c1 ^ k0, p1 & MASK64, (p0 >> 64) ^ c3 ^ k1, p0 & MASK64
    return c0, c1, c2, c3


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream_key(seed: int, key: StreamKey | tuple) -> tuple[int, int]:
    """The 128-bit Philox key of the stream ``(seed, key)``."""
    key = StreamKey(*key)
    for part in key:
        if not 0 <= int(part) <= MASK64:
            raise ValueError(f"stream key fields must be nonnegative 64-bit integers: {key}")
    out = philox_block((_check_seed(seed), DOMAIN), tuple(int(p) for p in key))
    return out[0], out[1]


class Stream:
    """Random-access stream with a sequential cursor.

    ``raw``/``uniforms``/``normals`` address draws directly and do not move
    the cursor; ``next_*`` consume from the cursor.
    """

    __slots__ = ("_buf", "_buf_start", "key", "pos")

    _CHUNK = 1024

    def __init__(self, key: tuple[int, int]):
        self.key = (int(key[0]), int(key[1]))
        self.pos = 0
        self._buf = np.empty(0, dtype=np.uint64)
        self._buf_start = 0

    def __repr__(self):
        return f"Stream(key=({self.key[0]:#x}, {self.key[1]:#x}), pos={self.pos})"

    def raw(self, start: int, n: int) -> np.ndarray:
        """Draws ``start .. start+n-1`` as uint64."""
        if n <= 0:
            return np.empty(0, dtype=np.uint64)
        block, lane = divmod(int(start), 4)
        bg = np.random.Philox(
            key=np.array(self.key, dtype=np.uint64),
            counter=np.array([block & MASK64, block >> 64, 0, 0], dtype=np.uint64),
        )
        return bg.random_raw(lane + n)[lane:]

    def uniforms(self, start: int, n: int) -> np.ndarray:
        return to_uniform(self.raw(start, n))

    def open_uniforms(self, start: int, n: int) -> np.ndarray:
        return to_open_uniform(self.raw(start, n))

    def normals(self, start: int, n: int) -> np.ndarray:
        return ndtri(self.open_uniforms(start, n))

    # sequential interface

    def _take(self, n: int) -> np.ndarray:
        end = self._buf_start + len(self._buf)
        if self.pos < self._buf_start or self.pos + n > end:
            self._buf_start = self.pos
            self._buf = self.raw(self.pos, max(n, self._CHUNK))
        lo = self.pos - self._buf_start
        self.pos += n
        return self._buf[lo : lo + n]

    def next_u64(self) -> int:
        return int(self._take(1)[0])

    def next_uniform(self) -> float:
        return float(to_uniform(self._take(1))[0])

    def next_standard_normal(self) -> float:
        return float(ndtri(to_open_uniform(self._take(1)))[0])

    def take_uniforms(self, n: int) -> np.ndarray:
        out = self.uniforms(self.pos, n)
        self.pos += n
        return out

    def take_normals(self, n: int) -> np.ndarray:
        out = self.normals(self.pos, n)
        self.pos += n
        return out


def to_uniform(raw: np.ndarray) -> np.ndarray:
    return (raw >> np.uint64(11)).astype(np.float64) * _TWO53


def to_open_uniform(raw: np.ndarray) -> np.ndarray:
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO53


def derive_stream(seed: int, key: StreamKey | tuple = StreamKey()) -> Stream:
    return Stream(stream_key(seed, key))


def next_standard_normal(stream: Stream) -> float:
    return stream.next_standard_normal()


def next_uniform(stream: Stream) -> float:
    return stream.next_uniform()
