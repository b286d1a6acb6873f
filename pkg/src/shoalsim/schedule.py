"""Round -> anchor-validator mappings.

Weighted schedules use a keyed draw that every replica computes identically:

1. ``x`` = BLAKE2b (8-byte digest) of ``b"shoal-leader"`` followed by
   ``struct.pack("<qqq", seed, epoch_tag, round)``, read as little-endian uint64.
2. ``u = (x >> 11) * 2**-53``, an exact double in ``[0, 1)``.
3. ``total`` and the cumulative table ``cum`` are float64 sums taken left to
   right in validator order; ``target = u * total``.
4. The leader is the smallest index ``i`` with ``target < cum[i]``.  If float
   rounding leaves no such index, the last validator with positive weight wins.

Only IEEE-754 double arithmetic is involved, so the result is platform independent.
"""

from __future__ import annotations

import hashlib
import struct
from bisect import bisect_right
from dataclasses import dataclass, field

_DOMAIN = b"shoal-leader"


def keyed_uniform(seed: int, tag: int, rnd: int) -> float:
    digest = hashlib.blake2b(_DOMAIN + struct.pack("<qqq", seed, tag, rnd), digest_size=8).digest()
    x = int.from_bytes(digest, "little")
    return (x >> 11) * 2.0**-53


def cumulative(weights) -> list[float]:
    out = []
    acc = 0.0
    for w in weights:
        acc += float(w)
        out.append(acc)
    return out


def weighted_pick(cum: list[float], u: float) -> int:
    target = u * cum[-1]
    i = bisect_right(cum, target)
    if i < len(cum):
        return i
    # rounding fallback: last positive-weight slot
    prev = 0.0
    last = 0
    for j, c in enumerate(cum):
        if c > prev:
            last = j
        prev = c
    return last


@dataclass
class AnchorSchedule:
    """Deterministic leader mapping for one protocol instance.

    ``weights=None`` means round robin (``round mod n``).  ``overrides`` pins
    specific rounds to specific leaders; every other round uses the base rule.
    """

    n: int
    start_round: int = 0
    epoch_tag: int = 0
    weights: tuple | None = None
    seed: int = 0
    overrides: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _cum: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.weights is not None:
            if len(self.weights) != self.n or any(w <= 0 for w in self.weights):
                raise ValueError("weights must be positive, one per validator")
            self._cum = cumulative(self.weights)

    def leader_of(self, rnd: int) -> int:
        if rnd < self.start_round:
            raise ValueError(f"round {rnd} precedes schedule start {self.start_round}")
        hit = self._cache.get(rnd)
        if hit is not None:
            return hit
        if rnd in self.overrides:
            leader = self.overrides[rnd]
        elif self.weights is None:
            leader = rnd % self.n
        else:
            leader = weighted_pick(self._cum, keyed_uniform(self.seed, self.epoch_tag, rnd))
        self._cache[rnd] = leader
        return leader

    def restarted(self, start_round: int, epoch_tag: int) -> "AnchorSchedule":
        """Same mapping, new instance boundaries."""
        return AnchorSchedule(self.n, start_round, epoch_tag, self.weights, self.seed, dict(self.overrides))
