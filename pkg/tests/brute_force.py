"""Exhaustive conflict-free assignment optimum for small instances.

Maximizes total granted slots subject to: one transmission per source per
timeslot, one per destination per timeslot, at most one per wavelength per
timeslot (binding only when W < number of concurrent pairs), and per-pair
demand caps.  Searched by depth-first enumeration of per-timeslot
matchings with memoization on the residual demand vector.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Dict, Tuple


def optimal_granted_slots(
    demands: Dict[Tuple[int, int], int],
    n_nodes: int,
    n_wavelengths: int,
    slots_per_epoch: int,
) -> int:
    """Maximum total slots grantable in one epoch for the given demands.

    ``demands`` maps (source, dest) to the total slots requested across all
    requests of that pair (individual request boundaries do not constrain
    the optimum).
    """
    pairs = sorted(demands)
    base = {p: min(demands[p], slots_per_epoch) for p in pairs}

    def matchings(remaining: Tuple[int, ...]):
        """All maximal-progress per-slot matchings as demand-decrements."""
        sources = sorted({p[0] for p in pairs})
        out = []

        def rec(idx: int, used_dst: frozenset, picked: Tuple[int, ...], count: int):
            if count > n_wavelengths:
                return
            if idx == len(sources):
                out.append(picked)
                return
            s = sources[idx]
            rec(idx + 1, used_dst, picked, count)  # source idle this slot
            for i, (ps, pd) in enumerate(pairs):
                if ps != s or remaining[i] == 0 or pd in used_dst:
                    continue
                if count + 1 > n_wavelengths:
                    continue
                dec = list(picked)
                dec[i] += 1
                rec(idx + 1, used_dst | {pd}, tuple(dec), count + 1)

        rec(0, frozenset(), tuple(0 for _ in pairs), 0)
        return set(out)

    @lru_cache(maxsize=None)
    def best(t: int, remaining: Tuple[int, ...]) -> int:
        if t == slots_per_epoch or sum(remaining) == 0:
            return 0
        cap = slots_per_epoch - t
        remaining = tuple(min(r, cap) for r in remaining)
        result = 0
        for dec in matchings(remaining):
            granted = sum(dec)
            nxt = tuple(r - d for r, d in zip(remaining, dec))
            result = max(result, granted + best(t + 1, nxt))
        return result

    initial = tuple(base[p] for p in pairs)
    out = best(0, initial)
    best.cache_clear()
    return out
