"""Programmable-priority round-robin arbiter.

Every contention-resolution stage of the scheduler is built from this
primitive: given a request bit vector and a priority pointer, grant the
first requester at or after the pointer (wrapping), then advance the
pointer just past the winner.  The pointer moves only when a grant is
produced, which gives one-hot grants, work conservation and
starvation-freedom within ``width`` arbitrations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np
from numba import njit

_DEBRUIJN64 = np.uint64(0x03F79D71B4CB0A89)
_DEBRUIJN_TABLE = np.array(
    [
        0, 1, 48, 2, 57, 49, 28, 3, 61, 58, 50, 42, 38, 29, 17, 4,
        62, 55, 59, 36, 53, 51, 43, 22, 45, 39, 33, 30, 24, 18, 12, 5,
        63, 47, 56, 27, 60, 41, 37, 16, 54, 35, 52, 21, 44, 32, 23, 11,
        46, 26, 40, 15, 34, 20, 31, 10, 25, 14, 19, 9, 13, 8, 7, 6,
    ],
    dtype=np.int64,
)


@njit(cache=True, inline="always")
def _trailing_zeros(x):
    # x must be nonzero; isolate lowest set bit, de Bruijn index
    lsb = x & (np.uint64(0) - x)
    return _DEBRUIJN_TABLE[(lsb * _DEBRUIJN64) >> np.uint64(58)]


@njit(cache=True, inline="always")
def _popcount(x):
    count = 0
    while x != np.uint64(0):
        x &= x - np.uint64(1)
        count += 1
    return count


@njit(cache=True)
def rr_grant(mask, pointer, width):
    """Index of the first set bit of ``mask`` at or after ``pointer``, wrapping.

    Returns -1 when the mask is empty.  ``mask`` is a uint64 bitset over
    ``width`` requesters (width <= 64).
    """
    if mask == np.uint64(0):
        return np.int64(-1)
    w = np.uint64(width)
    p = np.uint64(pointer)
    if width < 64:
        full = (np.uint64(1) << w) - np.uint64(1)
    else:
        full = ~np.uint64(0)
    if p == np.uint64(0):
        rotated = mask & full
    else:
        rotated = ((mask >> p) | (mask << (w - p))) & full
    offset = _trailing_zeros(rotated)
    return np.int64((pointer + offset) % width)


@dataclass
class RoundRobinArbiter:
    """Stateful arbiter over ``width`` requesters.

    ``pointer`` marks the highest-priority position and always stays in
    range.  A requester whose bit is 0 is never granted.
    """

    width: int
    pointer: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.width <= 64:
            raise ValueError("arbiter width must be 1..64")
        if not 0 <= self.pointer < self.width:
            raise ValueError("pointer out of range")

    def arbitrate(self, requests: Union[int, Iterable[bool]]) -> Optional[int]:
        """Grant one requester, or None when no bit is set.

        ``requests`` is either an int bitmask or an iterable of ``width``
        booleans (bit i = requester i).  On a grant the pointer advances to
        (grant + 1) mod width; otherwise it is unchanged.
        """
        mask = self._to_mask(requests)
        grant = int(rr_grant(np.uint64(mask), self.pointer, self.width))
        if grant < 0:
            return None
        self.pointer = (grant + 1) % self.width
        return grant

    def peek(self, requests: Union[int, Iterable[bool]]) -> Optional[int]:
        """Same selection as :meth:`arbitrate` but without state change."""
        mask = self._to_mask(requests)
        grant = int(rr_grant(np.uint64(mask), self.pointer, self.width))
        return None if grant < 0 else grant

    def _to_mask(self, requests: Union[int, Iterable[bool]]) -> int:
        if isinstance(requests, (int, np.integer)):
            mask = int(requests)
            if mask < 0 or mask >> self.width:
                raise ValueError(f"request mask wider than {self.width} bits")
            return mask
        bits = list(requests)
        if len(bits) != self.width:
            raise ValueError(f"expected {self.width} request bits, got {len(bits)}")
        mask = 0
        for i, bit in enumerate(bits):
            if bit:
                mask |= 1 << i
        return mask
