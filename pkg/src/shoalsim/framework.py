"""Shoal: chaining Bullshark instances at their first ordered anchor.

Each instance runs until its first ordered anchor ``A`` (round ``r``) is
known.  ``A``'s causal history is ordered, then a fresh instance starts at
``r + 1`` (pipelining) or ``r + 2`` (plain Bullshark spacing).  With leader
reputation on, the new instance's schedule is re-derived from the agreed
ordered/skipped decisions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .bullshark import CommitRecord, Decision, InstanceState, linearize_causal_history, try_resolve_first_anchor
from .dag import LocalDag, VertexId
from .schedule import AnchorSchedule


class Score(enum.Enum):
    HIGH = "high"
    LOW = "low"


class ShoalMode(enum.Enum):
    SHOAL = "shoal"
    SHOAL_PL = "shoal-pl"
    SHOAL_LR = "shoal-lr"
    BULLSHARK = "bullshark"


SHOAL_MODES = tuple(m.value for m in ShoalMode)


@dataclass(frozen=True)
class ShoalConfig:
    pipelining: bool = True
    leader_reputation: bool = True
    w_high: float = 1.0
    w_low: float = 0.1
    epoch_seed: int = 0

    def __post_init__(self):
        if not self.w_low > 0:
            raise ValueError("the low reputation weight must be positive")
        if self.w_high < self.w_low:
            raise ValueError("w_high must be >= w_low")

    @classmethod
    def for_mode(cls, mode, **kw) -> "ShoalConfig":
        mode = ShoalMode(mode)
        return cls(
            pipelining=mode in (ShoalMode.SHOAL, ShoalMode.SHOAL_PL),
            leader_reputation=mode in (ShoalMode.SHOAL, ShoalMode.SHOAL_LR),
            **kw,
        )

    @property
    def mode(self) -> ShoalMode:
        return {
            (True, True): ShoalMode.SHOAL,
            (True, False): ShoalMode.SHOAL_PL,
            (False, True): ShoalMode.SHOAL_LR,
            (False, False): ShoalMode.BULLSHARK,
        }[(self.pipelining, self.leader_reputation)]


@dataclass
class ReputationState:
    score_of: dict

    @classmethod
    def all_high(cls, n: int) -> "ReputationState":
        return cls({v: Score.HIGH for v in range(n)})

    def weights(self, w_high: float, w_low: float) -> tuple:
        return tuple(w_high if self.score_of[v] is Score.HIGH else w_low
                     for v in sorted(self.score_of))


def initial_schedule(n: int, epoch_seed: int = 0, round_robin: bool = True) -> AnchorSchedule:
    """Schedule for the first instance: round robin, or a keyed draw with equal weights."""
    if n < 4:
        raise ValueError(f"need at least 4 validators, got {n}")
    if round_robin:
        return AnchorSchedule(n, 0, 0)
    return AnchorSchedule(n, 0, 0, weights=(1.0,) * n, seed=epoch_seed)


def update_reputation(rep: ReputationState, decided) -> ReputationState:
    """Skipped anchors' authors drop to LOW, ordered anchors' authors go HIGH."""
    scores = dict(rep.score_of)
    for vid, outcome in decided:
        if outcome is Decision.SKIPPED:
            scores[vid.author] = Score.LOW
        elif outcome is Decision.ORDERED:
            scores[vid.author] = Score.HIGH
    return ReputationState(scores)


def derive_schedule(rep: ReputationState, epoch_seed: int, epoch_tag: int, start_round: int,
                    w_high: float = 1.0, w_low: float = 0.1) -> AnchorSchedule:
    weights = rep.weights(w_high, w_low)
    return AnchorSchedule(len(weights), start_round, epoch_tag, weights=weights, seed=epoch_seed)


@dataclass
class _Closed:
    start_round: int
    end_round: int
    schedule: AnchorSchedule


class ShoalState:
    """Per-validator ordering state across chained instances."""

    def __init__(self, n: int, config: ShoalConfig = ShoalConfig()):
        self.n = n
        self.config = config
        self.reputation = ReputationState.all_high(n)
        sched = initial_schedule(n, config.epoch_seed, round_robin=not config.leader_reputation)
        self.active_instance = InstanceState(sched)
        self.emitted: set = set()
        self.commit_log: list[CommitRecord] = []
        # every decided anchor in decision order
        self.decided: list[tuple[VertexId, Decision]] = []
        self._closed: list[_Closed] = []

    @property
    def current_round(self) -> int:
        return self.active_instance.start_round

    @property
    def epoch_tag(self) -> int:
        return self.active_instance.schedule.epoch_tag

    def anchor_at(self, r: int):
        """Anchor id scheduled at round ``r`` by the active or a recent instance, else ``None``."""
        inst = self.active_instance
        if r >= inst.start_round:
            if (r - inst.start_round) % 2 == 0:
                return VertexId(r, inst.schedule.leader_of(r))
            return None
        for c in reversed(self._closed):
            if c.start_round <= r <= c.end_round:
                if (r - c.start_round) % 2 == 0:
                    return VertexId(r, c.schedule.leader_of(r))
                return None
        return None

    def step(self, dag: LocalDag, now: float = 0.0) -> list[CommitRecord]:
        cfg = self.config
        out = []
        while True:
            inst = self.active_instance
            res = try_resolve_first_anchor(dag, inst)
            if res is None:
                return out
            anchor, skipped = res
            decided = [(s, Decision.SKIPPED) for s in skipped] + [(anchor, Decision.ORDERED)]
            self.decided.extend(decided)

            ids = linearize_causal_history(dag, anchor, self.emitted, closed=True)
            self.emitted.update(ids)
            rec = CommitRecord(anchor, inst.schedule.epoch_tag, tuple(ids), now, tuple(skipped))
            self.commit_log.append(rec)
            out.append(rec)

            if cfg.leader_reputation:
                self.reputation = update_reputation(self.reputation, decided)
            start = anchor.round + (1 if cfg.pipelining else 2)
            tag = inst.schedule.epoch_tag + 1
            if cfg.leader_reputation:
                sched = derive_schedule(self.reputation, cfg.epoch_seed, tag, start, cfg.w_high, cfg.w_low)
            else:
                sched = inst.schedule.restarted(start, tag)
            self._closed.append(_Closed(inst.start_round, anchor.round, inst.schedule))
            del self._closed[:-4]
            self.active_instance = InstanceState(sched)


def step(state: ShoalState, dag: LocalDag, config: ShoalConfig | None = None, now: float = 0.0):
    if config is not None and config != state.config:
        raise ValueError("config differs from the one the state was created with")
    return state.step(dag, now)
