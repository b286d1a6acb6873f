"""Round advancement policies and vertex construction.

Four pacing variants are supported:

* ``vanilla``: anchor rounds wait for the anchor, vote rounds wait for 2f+1
  vertices linking the previous anchor; either wait ends at the timeout.
* ``vanilla-no-vote-timeout``: only the anchor-round wait.
* ``baseline``: advance as soon as n-f vertices of the round are present.
* ``baseline-fallback``: baseline until ``fallback_k`` consecutive anchors are
  skipped, then vanilla rules until an anchor of a later round is ordered.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .dag import EMPTY_PAYLOAD, LocalDag, Vertex, VertexId, count_anchor_votes, strong_path_exists


class PacerKind(enum.Enum):
    VANILLA = "vanilla"
    VANILLA_NO_VOTE_TIMEOUT = "vanilla-no-vote-timeout"
    BASELINE = "baseline"
    BASELINE_FALLBACK = "baseline-fallback"


PACER_MODES = tuple(k.value for k in PacerKind)


@dataclass(frozen=True)
class PacerPolicy:
    kind: PacerKind = PacerKind.BASELINE
    timeout_ms: float = 1000.0
    fallback_k: int = 10

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", PacerKind(self.kind))
        if self.kind is not PacerKind.BASELINE and not self.timeout_ms > 0:
            raise ValueError("timeout_ms must be positive for timed pacers")
        if self.fallback_k < 1:
            raise ValueError("fallback_k must be >= 1")

    @property
    def uses_timers(self) -> bool:
        return self.kind is not PacerKind.BASELINE


@dataclass
class PacerState:
    current_round: int = 0
    round_entered_at: float = 0.0
    consecutive_skipped_anchors: int = 0
    fallback_active: bool = False
    # round the validator was in when fallback switched on (-1: never)
    fallback_since_round: int = -1


class AnchorOutcome(enum.Enum):
    ORDERED = "ordered"
    SKIPPED = "skipped"


def _vanilla_rules(state: PacerState, policy: PacerPolicy) -> tuple[bool, bool]:
    """(anchor-round wait on, vote-round wait on) for the current state."""
    kind = policy.kind
    if kind is PacerKind.VANILLA:
        return True, True
    if kind is PacerKind.VANILLA_NO_VOTE_TIMEOUT:
        return True, False
    if kind is PacerKind.BASELINE_FALLBACK and state.fallback_active:
        return True, True
    return False, False


def ready_to_advance(state, dag, anchor_of_round, now, policy, previous_anchor=None) -> bool:
    """Whether the validator may leave ``state.current_round``.

    ``anchor_of_round`` is the current round's anchor id, or ``None`` in a vote
    round; ``previous_anchor`` is the anchor of the round before, if any.
    """
    r = state.current_round
    if dag.round_size(r) < dag.quorum:
        return False
    anchor_wait, vote_wait = _vanilla_rules(state, policy)
    if not (anchor_wait or vote_wait):
        return True
    if now - state.round_entered_at >= policy.timeout_ms:
        return True
    if anchor_of_round is not None:
        return not anchor_wait or anchor_of_round in dag
    if vote_wait and previous_anchor is not None:
        return count_anchor_votes(dag, previous_anchor) >= 2 * dag.f + 1
    return True


def note_anchor_outcome(state, outcome, policy, anchor_round=None) -> PacerState:
    """Fold one decided anchor into the skip counter / fallback flag.

    ``anchor_round`` lets an ordered anchor that was built before the fallback
    switched on leave it on; without it every ordered anchor clears the flag.
    """
    if outcome is AnchorOutcome.SKIPPED:
        count = state.consecutive_skipped_anchors + 1
        active = state.fallback_active
        since = state.fallback_since_round
        if (
            policy.kind is PacerKind.BASELINE_FALLBACK
            and not active
            and count >= policy.fallback_k
        ):
            active = True
            since = state.current_round
        return replace(state, consecutive_skipped_anchors=count, fallback_active=active,
                       fallback_since_round=since)
    clear = anchor_round is None or anchor_round > state.fallback_since_round
    return replace(
        state,
        consecutive_skipped_anchors=0,
        fallback_active=state.fallback_active and not clear,
    )


def _merge_clocks(parents):
    if len(parents) == 1:
        return list(parents[0].strong_clock)
    return list(map(max, *(p.strong_clock for p in parents)))


def build_vertex(author, dag: LocalDag, rnd: int, now: float, payload=EMPTY_PAYLOAD,
                 strong_parents=None) -> Vertex:
    """Construct ``author``'s vertex for round ``rnd`` from the local view.

    Strong parents default to every round ``rnd-1`` vertex present.  A weak
    link is added to each validator's newest delivered vertex that is older
    than ``rnd-1`` and not reachable through the strong links.
    """
    n = dag.n
    if rnd == 0:
        return Vertex(VertexId(0, author), frozenset(), frozenset(), payload, now,
                      tuple(0 if j == author else -1 for j in range(n)))
    if strong_parents is None:
        strong_parents = [v.id for v in dag.round_vertices(rnd - 1)]
    strong = frozenset(VertexId(*p) for p in strong_parents)
    if len(strong) < dag.quorum:
        raise ValueError(f"round {rnd}: only {len(strong)} strong parents available, need {dag.quorum}")
    parents = [dag[p] for p in strong]

    stragglers = [VertexId(q, j) for j, q in dag.latest.items() if q < rnd - 1]
    # clocks summarize reachability only along chains that keep each author's own edge
    clocked = VertexId(rnd - 1, author) in strong and all(p.strong_clock is not None for p in parents)
    if clocked:
        clock = _merge_clocks(parents)
        weak = frozenset(s for s in stragglers if clock[s.author] < s.round)
        clock[author] = rnd
        clock = tuple(clock)
    else:
        weak = frozenset(s for s in stragglers
                         if not any(strong_path_exists(dag, p, s) for p in strong))
        clock = None
    return Vertex(VertexId(rnd, author), strong, weak, payload, now, clock)
