"""Round-based DAG: vertices with strong/weak links and the graph queries used by ordering.

A ``LocalDag`` is one validator's view.  Insertion enforces the guarantees the
reliable-broadcast layer would normally provide: a vertex is only added once
all of its parents are present (vertices that arrive early wait in a pending
pool), and at most one vertex exists per ``(round, author)``.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

ValidatorId = int


class VertexId(NamedTuple):
    round: int
    author: ValidatorId

    def __str__(self) -> str:
        return f"{self.round}:{self.author}"


class DagError(Exception):
    pass


class EquivocationError(DagError):
    """A second, different vertex was offered for an existing ``(round, author)``."""


class MalformedVertexError(DagError):
    pass


class VertexNotFound(DagError, KeyError):
    pass


@dataclass(frozen=True)
class PayloadMeta:
    batch_id: str = ""
    tx_count: int = 0
    byte_size: int = 0

    def __post_init__(self):
        if self.tx_count < 0 or self.byte_size < 0:
            raise ValueError("payload counts must be non-negative")


EMPTY_PAYLOAD = PayloadMeta()


@dataclass(frozen=True)
class Vertex:
    """One validator's contribution to one round.

    ``strong_clock`` is optional derived metadata: for every validator, the
    highest round of that validator's vertices reachable from this vertex by
    strong links (-1 if none).  Vertices built by :func:`shoalsim.pacer.build_vertex`
    carry it; it lets the builder test strong reachability without a graph walk.
    """

    id: VertexId
    strong_parents: frozenset = frozenset()
    weak_parents: frozenset = frozenset()
    payload: PayloadMeta = EMPTY_PAYLOAD
    created_at: float = 0.0
    strong_clock: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        r = self.id.round
        if r < 0:
            raise MalformedVertexError(f"negative round in {self.id}")
        if r == 0:
            if self.strong_parents or self.weak_parents:
                raise MalformedVertexError(f"{self.id}: round-0 vertex with parents")
            return
        if any(p.round != r - 1 for p in self.strong_parents):
            raise MalformedVertexError(f"{self.id}: strong parent outside previous round")
        if any(p.round >= r - 1 for p in self.weak_parents):
            raise MalformedVertexError(f"{self.id}: weak parent not older than previous round")

    @property
    def round(self) -> int:
        return self.id.round

    @property
    def author(self) -> ValidatorId:
        return self.id.author

    def parents(self) -> Iterable[VertexId]:
        yield from self.strong_parents
        yield from self.weak_parents


def make_vertex(round, author, strong=(), weak=(), payload=EMPTY_PAYLOAD, created_at=0.0):
    """Convenience constructor taking plain ``(round, author)`` pairs."""
    return Vertex(
        VertexId(round, author),
        frozenset(VertexId(*p) for p in strong),
        frozenset(VertexId(*p) for p in weak),
        payload,
        created_at,
    )


class InsertOutcome(enum.Enum):
    ACCEPTED = "accepted"
    BUFFERED = "buffered"
    DUPLICATE = "duplicate"


class LocalDag:
    """A single validator's view of the round-based DAG."""

    def __init__(self, n: int, f: int | None = None):
        if f is None:
            f = (n - 1) // 3
        if n < 1 or f < 0 or n < 3 * f + 1:
            raise ValueError(f"invalid committee size n={n}, f={f}")
        self.n = n
        self.f = f
        self.vertices: dict[VertexId, Vertex] = {}
        self.rounds: dict[int, dict[ValidatorId, Vertex]] = {}
        self.latest: dict[ValidatorId, int] = {}
        self.max_round = -1
        self._votes: Counter = Counter()

        # pending vertices indexed by one missing parent at a time
        self._waiting: dict[VertexId, list[Vertex]] = {}
        self._pending: dict[VertexId, Vertex] = {}

    @property
    def quorum(self) -> int:
        return self.n - self.f

    def __contains__(self, vid) -> bool:
        return vid in self.vertices

    def __len__(self) -> int:
        return len(self.vertices)

    def __getitem__(self, vid) -> Vertex:
        try:
            return self.vertices[vid]
        except KeyError:
            raise VertexNotFound(vid) from None

    def get(self, vid):
        return self.vertices.get(vid)

    def round_size(self, r: int) -> int:
        return len(self.rounds.get(r, ()))

    def round_vertices(self, r: int) -> list[Vertex]:
        """Vertices of round ``r`` in author order."""
        row = self.rounds.get(r)
        if not row:
            return []
        return [row[a] for a in sorted(row)]

    @property
    def pending_count(self) -> int:
        return len(self._pending)

    def _check_shape(self, v: Vertex):
        # round relations between a vertex and its parents are checked on construction
        if not 0 <= v.id.author < self.n:
            raise MalformedVertexError(f"bad vertex id {v.id}")
        if v.id.round > 0 and len(v.strong_parents) < self.quorum:
            raise MalformedVertexError(
                f"{v.id}: {len(v.strong_parents)} strong parents, need {self.quorum}"
            )

    def insert(self, v: Vertex) -> tuple[InsertOutcome, list[Vertex]]:
        """Offer ``v``; returns the outcome and every vertex actually added.

        Accepting ``v`` may release buffered descendants, which are returned as
        well, in insertion order.
        """
        existing = self.vertices.get(v.id)
        if existing is None:
            existing = self._pending.get(v.id)
        if existing is not None:
            if existing != v:
                raise EquivocationError(f"conflicting vertices for {v.id}")
            return InsertOutcome.DUPLICATE, []
        self._check_shape(v)

        missing = self._first_missing(v)
        if missing is not None:
            self._pending[v.id] = v
            self._waiting.setdefault(missing, []).append(v)
            return InsertOutcome.BUFFERED, []

        added = []
        stack = [v]
        while stack:
            cur = stack.pop()
            self._add(cur)
            added.append(cur)
            for w in self._waiting.pop(cur.id, ()):
                nxt = self._first_missing(w)
                if nxt is None:
                    del self._pending[w.id]
                    stack.append(w)
                else:
                    self._waiting.setdefault(nxt, []).append(w)
        return InsertOutcome.ACCEPTED, added

    def _first_missing(self, v: Vertex):
        vertices = self.vertices
        keys = vertices.keys()
        if keys >= v.strong_parents and keys >= v.weak_parents:
            return None
        for p in v.strong_parents:
            if p not in vertices:
                return p
        for p in v.weak_parents:
            if p not in vertices:
                return p
        return None

    def _add(self, v: Vertex):
        vid = v.id
        self.vertices[vid] = v
        row = self.rounds.get(vid.round)
        if row is None:
            row = self.rounds[vid.round] = {}
        row[vid.author] = v
        if vid.round > self.latest.get(vid.author, -1):
            self.latest[vid.author] = vid.round
        if vid.round > self.max_round:
            self.max_round = vid.round
        self._votes.update(v.strong_parents)

    def dump(self) -> str:
        """Line-oriented debug dump: ``round author strong:<csv> weak:<csv>``."""
        lines = []
        for vid in sorted(self.vertices):
            v = self.vertices[vid]
            strong = ",".join(str(p) for p in sorted(v.strong_parents))
            weak = ",".join(str(p) for p in sorted(v.weak_parents))
            lines.append(f"{vid.round} {vid.author} strong:{strong} weak:{weak}")
        return "\n".join(lines) + ("\n" if lines else "")


def insert_vertex(dag: LocalDag, v: Vertex) -> InsertOutcome:
    return dag.insert(v)[0]


def causal_history(dag: LocalDag, vid, stop=None) -> list[VertexId]:
    """Strong+weak transitive closure of ``vid`` (itself included), sorted by (round, author).

    With ``stop``, the walk does not enter ids in ``stop``; those ids and anything
    reachable only through them are left out.
    """
    vertices = dag.vertices
    if vid not in vertices:
        raise VertexNotFound(vid)
    vid = VertexId(*vid)
    if stop is not None and vid in stop:
        return []
    seen = {vid}
    stack = [vid]
    while stack:
        v = vertices[stack.pop()]
        for p in v.strong_parents:
            if p not in seen and (stop is None or p not in stop):
                seen.add(p)
                stack.append(p)
        for p in v.weak_parents:
            if p not in seen and (stop is None or p not in stop):
                seen.add(p)
                stack.append(p)
    return sorted(seen)


def strong_path_exists(dag: LocalDag, src, dst) -> bool:
    """True iff ``dst`` is reachable from ``src`` using strong links only."""
    vertices = dag.vertices
    if src not in vertices:
        raise VertexNotFound(src)
    if dst not in vertices:
        raise VertexNotFound(dst)
    src, dst = VertexId(*src), VertexId(*dst)
    if src == dst:
        return True
    if src.round <= dst.round:
        return False
    frontier = {src}
    for _ in range(src.round - dst.round - 1):
        nxt = set()
        for x in frontier:
            nxt.update(vertices[x].strong_parents)
        frontier = nxt
        if not frontier:
            return False
    return any(dst in vertices[x].strong_parents for x in frontier)


def count_anchor_votes(dag: LocalDag, anchor) -> int:
    """Number of next-round vertices whose strong parents include ``anchor``."""
    return dag._votes[VertexId(*anchor)]
