"""Network-free lockstep driver: every live validator emits one vertex per round.

Each round's vertices link every live vertex of the previous round, so the
DAG is what a synchronous network with instant delivery would build.  Useful
for long runs where only the ordering layer matters (for instance how often
the reputation schedule still picks crashed validators).
"""

from __future__ import annotations

from collections import Counter

from .dag import LocalDag, Vertex, VertexId
from .framework import ShoalConfig, ShoalState


class LockstepDriver:
    def __init__(self, n: int, crashed=(), config: ShoalConfig = ShoalConfig(), f: int | None = None):
        self.dag = LocalDag(n, f)
        self.crashed = frozenset(crashed)
        if len(self.crashed) > self.dag.f:
            raise ValueError(f"{len(self.crashed)} crashed validators exceed f={self.dag.f}")
        self.live = [v for v in range(n) if v not in self.crashed]
        self.state = ShoalState(n, config)
        self.round = 0

    def advance(self):
        """Add one full round of live vertices and run the orderer."""
        r = self.round
        parents = frozenset(VertexId(r - 1, a) for a in self.live) if r > 0 else frozenset()
        for a in self.live:
            self.dag.insert(Vertex(VertexId(r, a), parents, created_at=float(r)))
        self.state.step(self.dag, float(r))
        self.round += 1

    def run(self, rounds: int) -> ShoalState:
        for _ in range(rounds):
            self.advance()
        return self.state

    def anchor_authors(self, from_round: int = 0) -> Counter:
        """Author counts over decided anchors (ordered and skipped) at round >= ``from_round``."""
        return Counter(a.author for a, _ in self.state.decided if a.round >= from_round)
