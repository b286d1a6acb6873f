"""Partially synchronous Bullshark ordering over a local DAG view.

An anchor is ordered directly once ``f + 1`` vertices of the next round link
it strongly.  Earlier anchors of the same instance are ordered iff a strong
path leads to them from the lowest anchor ordered so far, and skipped
otherwise.  Vertices are released by ordering each ordered anchor's not yet
emitted causal history in ``(round, author)`` order, anchor last.

Two entry points are provided: :func:`try_resolve_first_anchor` resolves a
single instance up to its first ordered anchor (what the Shoal framework
composes), and :class:`BullsharkOrderer` is the classic stand-alone commit
loop, kept separate so the two can be checked against each other.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .dag import LocalDag, VertexId, causal_history, count_anchor_votes, strong_path_exists
from .schedule import AnchorSchedule


class Decision(enum.Enum):
    ORDERED = "ordered"
    SKIPPED = "skipped"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class CommitRecord:
    anchor: VertexId
    epoch_tag: int
    ordered_vertices: tuple
    decided_at: float = 0.0
    skipped: tuple = ()

    def to_json(self) -> dict:
        return {
            "anchor": list(self.anchor),
            "epoch": self.epoch_tag,
            "decided_at": self.decided_at,
            "skipped": [list(s) for s in self.skipped],
            "ordered": [list(v) for v in self.ordered_vertices],
        }

    @classmethod
    def from_json(cls, d: dict) -> "CommitRecord":
        return cls(
            VertexId(*d["anchor"]),
            d["epoch"],
            tuple(VertexId(*v) for v in d["ordered"]),
            d["decided_at"],
            tuple(VertexId(*s) for s in d["skipped"]),
        )


@dataclass
class InstanceState:
    schedule: AnchorSchedule
    decisions: dict = field(default_factory=dict)

    @property
    def start_round(self) -> int:
        return self.schedule.start_round

    def anchor(self, wave: int) -> VertexId:
        r = self.schedule.start_round + 2 * wave
        return VertexId(r, self.schedule.leader_of(r))

    def is_anchor_round(self, r: int) -> bool:
        return r >= self.start_round and (r - self.start_round) % 2 == 0


def _directly_ordered(dag: LocalDag, anchor: VertexId) -> bool:
    return anchor in dag.vertices and count_anchor_votes(dag, anchor) >= dag.f + 1


def try_resolve_first_anchor(dag: LocalDag, inst: InstanceState):
    """Resolve ``inst`` up to its first ordered anchor.

    Returns ``None`` while no anchor of the instance can be ordered yet,
    otherwise ``(first_ordered, skipped_before)`` with the skipped anchors in
    ascending round order.  Decisions are recorded in ``inst.decisions``.
    """
    start = inst.start_round
    top = None
    k = 0
    while start + 2 * k + 1 <= dag.max_round:
        a = inst.anchor(k)
        if _directly_ordered(dag, a):
            top = k
            break
        k += 1
    if top is None:
        return None

    lowest = top
    lowest_id = inst.anchor(top)
    for j in range(top - 1, -1, -1):
        a = inst.anchor(j)
        if a in dag.vertices and strong_path_exists(dag, lowest_id, a):
            lowest, lowest_id = j, a

    skipped = [inst.anchor(j) for j in range(lowest)]
    for j in range(lowest):
        inst.decisions[j] = Decision.SKIPPED
    inst.decisions[lowest] = Decision.ORDERED
    return lowest_id, skipped


def linearize_causal_history(dag: LocalDag, anchor, already_ordered=frozenset(),
                             closed=False) -> list[VertexId]:
    """Not-yet-ordered part of ``anchor``'s causal history, anchor last.

    ``closed=True`` promises that ``already_ordered`` contains the full causal
    history of each of its members, which lets the walk stop at ordered vertices.
    """
    anchor = VertexId(*anchor)
    if closed:
        ids = causal_history(dag, anchor, stop=already_ordered)
    else:
        ids = [v for v in causal_history(dag, anchor) if v not in already_ordered]
    if anchor not in already_ordered:
        ids.remove(anchor)
        ids.append(anchor)
    return ids


def commit_stream(records) -> list:
    """``(anchor, skipped, ordered_vertices, decided_at)`` per record.

    Drops ``epoch_tag``, which only numbers instances inside one orderer.
    """
    return [(r.anchor, r.skipped, r.ordered_vertices, r.decided_at) for r in records]


def rounds_to_commit(v, commit: CommitRecord) -> int:
    """Rounds from ``v``'s round through the vote round that decided the anchor.

    An anchor counts as 2 (its own round plus the vote round).
    """
    v = VertexId(*v)
    if v not in commit.ordered_vertices:
        raise ValueError(f"{v} is not part of the commit for {commit.anchor}")
    return commit.anchor.round + 2 - v.round


class BullsharkOrderer:
    """Classic Bullshark commit loop with a fixed leader per even round.

    On every call, the highest directly ordered anchor above the last commit
    is found, the chain of strongly reachable anchors below it is collected,
    and the chain is committed oldest first.
    """

    def __init__(self, n: int, schedule: AnchorSchedule | None = None):
        self.schedule = schedule or AnchorSchedule(n)
        self.last_committed_round = -2
        self.emitted: set = set()
        self.commit_log: list[CommitRecord] = []

    def _anchor(self, r):
        return VertexId(r, self.schedule.leader_of(r))

    def step(self, dag: LocalDag, now: float = 0.0) -> list[CommitRecord]:
        top = dag.max_round - 1
        top -= top % 2
        found = None
        for r in range(top, self.last_committed_round, -2):
            a = self._anchor(r)
            if _directly_ordered(dag, a):
                found = a
                break
        if found is None:
            return []

        chain = [found]
        cur = found
        for r in range(found.round - 2, self.last_committed_round, -2):
            a = self._anchor(r)
            if a in dag.vertices and strong_path_exists(dag, cur, a):
                chain.append(a)
                cur = a

        out = []
        prev = self.last_committed_round
        for a in reversed(chain):
            skipped = tuple(self._anchor(r) for r in range(prev + 2, a.round, 2))
            ids = linearize_causal_history(dag, a, self.emitted, closed=True)
            self.emitted.update(ids)
            out.append(CommitRecord(a, 0, tuple(ids), now, skipped))
            prev = a.round
        self.last_committed_round = found.round
        self.commit_log.extend(out)
        return out


def multi_anchor_resolve(dag: LocalDag, rnd: int, schedule_for) -> dict:
    """Decide every vertex of round ``rnd`` as a potential anchor (experimental).

    ``schedule_for(rnd, k)`` must return a schedule whose leader at ``rnd`` is
    ``k``.  Validators are processed in index order; once one cannot be
    decided, it and every later validator stay ``UNDECIDED``.
    """
    out = {}
    blocked = False
    for k in range(dag.n):
        if blocked:
            out[k] = Decision.UNDECIDED
            continue
        inst = InstanceState(schedule_for(rnd, k))
        res = try_resolve_first_anchor(dag, inst)
        if res is None:
            out[k] = Decision.UNDECIDED
            blocked = True
        else:
            out[k] = Decision.ORDERED if res[0] == VertexId(rnd, k) else Decision.SKIPPED
    return out


@dataclass(frozen=True)
class RotatingSchedule:
    """Leader ``k`` at ``start_round``, then ``k+1, k+2, ...`` (mod n) every other round."""

    n: int
    start_round: int
    first_leader: int

    @property
    def epoch_tag(self) -> int:
        return self.start_round * self.n + self.first_leader

    def leader_of(self, rnd: int) -> int:
        return (self.first_leader + (rnd - self.start_round) // 2) % self.n


def rotating_schedule(n: int):
    """``schedule_for`` factory built on :class:`RotatingSchedule`."""

    def schedule_for(rnd, k):
        return RotatingSchedule(n, rnd, k)

    return schedule_for


class MultiAnchorOrderer:
    """Incremental driver for the every-vertex-as-anchor mode."""

    def __init__(self, n: int, schedule_for=None):
        self.n = n
        self.schedule_for = schedule_for or rotating_schedule(n)
        self.round = 0
        self.next_author = 0
        self.emitted: set = set()
        self.commit_log: list[CommitRecord] = []
        self.decisions: dict = {}

    def step(self, dag: LocalDag, now: float = 0.0) -> list[CommitRecord]:
        out = []
        while True:
            r, k = self.round, self.next_author
            inst = InstanceState(self.schedule_for(r, k))
            res = try_resolve_first_anchor(dag, inst)
            if res is None:
                return out
            me = VertexId(r, k)
            if res[0] == me:
                ids = linearize_causal_history(dag, me, self.emitted, closed=True)
                self.emitted.update(ids)
                rec = CommitRecord(me, inst.schedule.epoch_tag, tuple(ids), now)
                self.commit_log.append(rec)
                out.append(rec)
                self.decisions[me] = Decision.ORDERED
            else:
                self.decisions[me] = Decision.SKIPPED
            self.next_author += 1
            if self.next_author == self.n:
                self.next_author = 0
                self.round += 1
