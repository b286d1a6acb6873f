"""Seeded discrete-event simulation of n validators building and ordering a DAG.

Messages travel over a region-to-region one-way delay matrix with uniform
multiplicative jitter.  Validators may crash (fail-stop at a given time) or
withhold votes (drop the strong link to the anchor being voted on whenever
n - f parents remain).  Every broadcast reaches every validator that is
still alive when it lands, so delivery is reliable by construction.

Events sharing a timestamp run in the order they were scheduled.  Round
advancement is evaluated in its own event, so all deliveries landing at
the same instant are seen before a validator moves on.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass, field, fields

from .bullshark import CommitRecord
from .dag import LocalDag, PayloadMeta, Vertex, VertexId
from .framework import ShoalConfig, ShoalMode, ShoalState
from .pacer import (AnchorOutcome, PacerKind, PacerPolicy, PacerState, build_vertex,
                    note_anchor_outcome, ready_to_advance)

GCP_REGIONS = ("us-west1", "europe-west4", "asia-east1")
GCP_RTT_MS = {
    ("us-west1", "asia-east1"): 118.0,
    ("europe-west4", "asia-east1"): 251.0,
    ("us-west1", "europe-west4"): 133.0,
}
INTRA_REGION_MS = 1.0


def one_way_matrix(rtt: dict, regions, intra=INTRA_REGION_MS) -> dict:
    """Symmetric one-way delays (half of each round trip), ``intra`` on the diagonal."""
    out = {a: {} for a in regions}
    for a in regions:
        for b in regions:
            if a == b:
                out[a][b] = intra
            else:
                rt = rtt.get((a, b), rtt.get((b, a)))
                if rt is None:
                    raise KeyError(f"no round-trip time for {a} <-> {b}")
                out[a][b] = rt / 2.0
    return out


def gcp_matrix() -> dict:
    return one_way_matrix(GCP_RTT_MS, GCP_REGIONS)


def uniform_matrix(delay_ms: float) -> dict:
    return {"local": {"local": float(delay_ms)}}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid simulation config: " + "; ".join(self.problems))


@dataclass
class SimConfig:
    n: int = 4
    f: int | None = None
    latency_ms: dict = field(default_factory=gcp_matrix)
    # region per validator; None = round robin over the matrix's regions
    regions: list | None = None
    jitter: float = 0.1
    crashes: list = field(default_factory=list)
    withholders: list = field(default_factory=list)
    delay_multiplier: dict = field(default_factory=dict)
    duration_rounds: int = 50
    seed: int = 0
    pacer: PacerPolicy = field(default_factory=PacerPolicy)
    shoal: ShoalConfig = field(default_factory=ShoalConfig)
    batch_tx: int = 5000
    tx_bytes: int = 270
    record_deliveries: bool = False

    def __post_init__(self):
        if self.f is None:
            self.f = (self.n - 1) // 3
        if isinstance(self.pacer, dict):
            self.pacer = PacerPolicy(**self.pacer)
        if isinstance(self.shoal, dict):
            self.shoal = ShoalConfig(**self.shoal)
        self.crashes = [(int(v), float(t)) for v, t in self.crashes]
        self.withholders = sorted(int(v) for v in self.withholders)
        self.delay_multiplier = {int(k): float(m) for k, m in self.delay_multiplier.items()}
        if self.regions is None:
            names = list(self.latency_ms)
            self.regions = [names[i % len(names)] for i in range(self.n)]

    def problems(self) -> list[str]:
        out = []
        n, f = self.n, self.f
        if n < 4:
            out.append(f"n: need at least 4 validators, got {n}")
        if f < 0 or n < 3 * f + 1:
            out.append(f"f: n={n} cannot tolerate f={f} (need n >= 3f+1)")
        crashed = [v for v, _ in self.crashes]
        if len(set(crashed)) != len(crashed):
            out.append("crashes: validator listed twice")
        if len(set(crashed) | set(self.withholders)) != len(crashed) + len(self.withholders):
            out.append("withholders: validator both crashed and withholding")
        if len(crashed) + len(self.withholders) > f:
            out.append(f"crashes/withholders: {len(crashed)} + {len(self.withholders)} faulty exceeds f={f}")
        for v, t in self.crashes:
            if not 0 <= v < n:
                out.append(f"crashes: unknown validator {v}")
            if t < 0:
                out.append(f"crashes: negative crash time for {v}")
        for v in self.withholders:
            if not 0 <= v < n:
                out.append(f"withholders: unknown validator {v}")
        for v, m in self.delay_multiplier.items():
            if not 0 <= v < n or not m > 0:
                out.append(f"delay_multiplier: bad entry {v}: {m}")
        if len(self.regions) != n:
            out.append(f"regions: {len(self.regions)} entries for {n} validators")
        for r in set(self.regions):
            if r not in self.latency_ms:
                out.append(f"regions: {r!r} missing from latency_ms")
        for a, row in self.latency_ms.items():
            for b, d in row.items():
                if not d > 0:
                    out.append(f"latency_ms: non-positive delay {a}->{b}")
                if self.latency_ms.get(b, {}).get(a, d) != d:
                    out.append(f"latency_ms: asymmetric entry {a}<->{b}")
        if not 0 <= self.jitter < 1:
            out.append(f"jitter: must be in [0, 1), got {self.jitter}")
        if self.duration_rounds < 1:
            out.append("duration_rounds: must be >= 1")
        if self.batch_tx < 0 or self.tx_bytes < 0:
            out.append("batch_tx/tx_bytes: must be non-negative")
        return out

    def validate(self) -> "SimConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def to_dict(self) -> dict:
        d = {}
        for fl in fields(self):
            d[fl.name] = getattr(self, fl.name)
        d["pacer"] = {"kind": self.pacer.kind.value, "timeout_ms": self.pacer.timeout_ms,
                      "fallback_k": self.pacer.fallback_k}
        s = self.shoal
        d["shoal"] = {"pipelining": s.pipelining, "leader_reputation": s.leader_reputation,
                      "w_high": s.w_high, "w_low": s.w_low, "epoch_seed": s.epoch_seed}
        d["crashes"] = [[v, t] for v, t in self.crashes]
        d["delay_multiplier"] = {str(k): m for k, m in sorted(self.delay_multiplier.items())}
        d["schema"] = 1
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        schema = d.pop("schema", 1)
        if schema != 1:
            raise ConfigError([f"schema: unsupported version {schema}"])
        known = {fl.name for fl in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError([f"{k}: unknown field" for k in unknown])
        try:
            return cls(**d)
        except (TypeError, ValueError) as e:
            raise ConfigError([str(e)]) from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "SimConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class RoundLog:
    round: int
    entered_at: float
    left_at: float | None = None
    fallback: bool = False
    anchor: VertexId | None = None


@dataclass
class ValidatorTrace:
    id: int
    crashed_at: float | None
    commit_log: list = field(default_factory=list)
    rounds: list = field(default_factory=list)
    fallback_activations: list = field(default_factory=list)
    anchors_ordered: int = 0
    anchors_skipped: int = 0
    deliveries: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "crashed_at": self.crashed_at,
            "anchors_ordered": self.anchors_ordered,
            "anchors_skipped": self.anchors_skipped,
            "fallback_activations": [list(x) for x in self.fallback_activations],
            "rounds": [[r.round, r.entered_at, r.left_at, r.fallback,
                        list(r.anchor) if r.anchor else None] for r in self.rounds],
            "deliveries": [[t, list(v)] for t, v in self.deliveries],
            "commit_log": [c.to_json() for c in self.commit_log],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ValidatorTrace":
        return cls(
            d["id"], d["crashed_at"],
            [CommitRecord.from_json(c) for c in d["commit_log"]],
            [RoundLog(r, e, l, fb, VertexId(*a) if a else None) for r, e, l, fb, a in d["rounds"]],
            [tuple(x) for x in d["fallback_activations"]],
            d["anchors_ordered"], d["anchors_skipped"],
            [(t, VertexId(*v)) for t, v in d["deliveries"]],
        )


@dataclass
class RunTrace:
    config: SimConfig
    horizon_ms: float
    # vertex id -> (created_at, tx_count)
    vertices: dict
    validators: list
    # vertex id -> (strong parents, weak parents); only with record_deliveries
    parents: dict | None = None

    def to_json(self) -> dict:
        d = {
            "schema": 1,
            "config": self.config.to_dict(),
            "horizon_ms": self.horizon_ms,
            "vertices": [[v.round, v.author, c, tx] for v, (c, tx) in sorted(self.vertices.items())],
            "validators": [v.to_json() for v in self.validators],
        }
        if self.parents is not None:
            d["parents"] = [[list(v), [list(p) for p in s], [list(p) for p in w]]
                            for v, (s, w) in sorted(self.parents.items())]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "RunTrace":
        parents = None
        if "parents" in d:
            parents = {VertexId(*v): (tuple(VertexId(*p) for p in s), tuple(VertexId(*p) for p in w))
                       for v, s, w in d["parents"]}
        return cls(
            SimConfig.from_dict(d["config"]),
            d["horizon_ms"],
            {VertexId(r, a): (c, tx) for r, a, c, tx in d["vertices"]},
            [ValidatorTrace.from_json(v) for v in d["validators"]],
            parents,
        )

    def rebuild_vertex(self, vid) -> Vertex:
        """Vertex ``vid`` reconstructed from the recorded parents (needs record_deliveries)."""
        if self.parents is None:
            raise ValueError("trace was recorded without parents (set record_deliveries)")
        vid = VertexId(*vid)
        strong, weak = self.parents[vid]
        created, tx = self.vertices[vid]
        return Vertex(vid, frozenset(strong), frozenset(weak),
                      PayloadMeta(f"{vid.round}:{vid.author}", tx, tx * self.config.tx_bytes), created)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    def live_validators(self) -> list:
        return [v for v in self.validators if v.crashed_at is None]


_DELIVER, _TIMER, _CHECK = 0, 1, 2


def apply_adversary(author, parents, anchor, quorum, withholders=None):
    """Drop ``anchor`` from a withholder's strong parents if ``quorum`` parents remain.

    A validator never drops its own vertex.
    """
    parents = set(parents)
    if withholders is not None and author not in withholders:
        return parents
    if anchor is not None and anchor.author == author:
        return parents
    if anchor is not None and anchor in parents and len(parents) - 1 >= quorum:
        parents.discard(anchor)
    return parents


class _Node:
    __slots__ = ("id", "dag", "pacer", "shoal", "crash_at", "done", "check_pending",
                 "trace", "withholder", "round_log")

    def __init__(self, vid, cfg: SimConfig):
        self.id = vid
        self.dag = LocalDag(cfg.n, cfg.f)
        self.pacer = PacerState()
        self.shoal = ShoalState(cfg.n, cfg.shoal)
        crash = dict(cfg.crashes).get(vid)
        self.crash_at = math.inf if crash is None else crash
        self.done = False
        self.check_pending = False
        self.withholder = vid in cfg.withholders
        self.trace = ValidatorTrace(vid, crash)
        self.round_log = None

    def alive(self, t):
        return t < self.crash_at


class Simulation:
    def __init__(self, config: SimConfig):
        self.config = config.validate()
        cfg = self.config
        self.rng = random.Random(cfg.seed)
        self.nodes = [_Node(i, cfg) for i in range(cfg.n)]
        self.delay = [
            [cfg.latency_ms[cfg.regions[i]][cfg.regions[j]] * cfg.delay_multiplier.get(i, 1.0)
             for j in range(cfg.n)]
            for i in range(cfg.n)
        ]
        self.queue: list = []
        self._seq = 0
        self.now = 0.0
        self.vertices: dict = {}
        self.parents: dict = {}
        self.first_ordered_at: dict = {}
        self.finished_at: dict = {}

    def _push(self, t, kind, a, b=None):
        self._seq += 1
        heapq.heappush(self.queue, (t, self._seq, kind, a, b))

    def broadcast(self, author: int, v, t: float) -> list:
        """Schedule delivery of ``v`` to every other validator; returns ``(time, dest)`` pairs."""
        cfg = self.config
        row = self.delay[author]
        jit = cfg.jitter
        uniform = self.rng.uniform
        out = []
        for j in range(cfg.n):
            if j == author:
                continue
            d = row[j]
            if jit:
                d *= 1.0 + uniform(-jit, jit)
            self._push(t + d, _DELIVER, j, v)
            out.append((t + d, j))
        return out

    def _schedule_check(self, node, t):
        if not node.check_pending:
            node.check_pending = True
            self._push(t, _CHECK, node.id)

    def _enter_round(self, node: _Node, r: int, t: float):
        cfg = self.config
        dag = node.dag
        parents = None
        if r > 0:
            parents = [v.id for v in dag.round_vertices(r - 1)]
            if node.withholder:
                parents = apply_adversary(node.id, parents, node.shoal.anchor_at(r - 1), dag.quorum)
        payload = PayloadMeta(f"{r}:{node.id}", cfg.batch_tx, cfg.batch_tx * cfg.tx_bytes)
        v = build_vertex(node.id, dag, r, t, payload, parents)
        self.vertices[v.id] = (t, cfg.batch_tx)
        if cfg.record_deliveries:
            self.parents[v.id] = (tuple(sorted(v.strong_parents)), tuple(sorted(v.weak_parents)))

        ps = node.pacer
        ps.current_round = r
        ps.round_entered_at = t
        node.round_log = RoundLog(r, t, anchor=node.shoal.anchor_at(r))
        node.trace.rounds.append(node.round_log)

        self._insert(node, v, t)
        self.broadcast(node.id, v, t)
        if cfg.pacer.uses_timers:
            self._push(t + cfg.pacer.timeout_ms, _TIMER, node.id, r)
        self._schedule_check(node, t)

    def _insert(self, node: _Node, v, t):
        _, added = node.dag.insert(v)
        if not added:
            return
        if self.config.record_deliveries:
            node.trace.deliveries.extend((t, a.id) for a in added)
        self._order(node, t)
        self._schedule_check(node, t)

    def _order(self, node: _Node, t):
        records = node.shoal.step(node.dag, t)
        if not records:
            return
        cfg = self.config
        tr = node.trace
        first = self.first_ordered_at
        policy = cfg.pacer
        for rec in records:
            tr.commit_log.append(rec)
            for vid in rec.ordered_vertices:
                if vid not in first:
                    first[vid] = t
            tr.anchors_skipped += len(rec.skipped)
            tr.anchors_ordered += 1
            was_active = node.pacer.fallback_active
            for s in rec.skipped:
                node.pacer = note_anchor_outcome(node.pacer, AnchorOutcome.SKIPPED, policy, s.round)
                if node.pacer.fallback_active and not was_active:
                    tr.fallback_activations.append((t, node.pacer.current_round))
                    was_active = True
            node.pacer = note_anchor_outcome(node.pacer, AnchorOutcome.ORDERED, policy, rec.anchor.round)

    def _check(self, node: _Node, t):
        node.check_pending = False
        if node.done or not node.alive(t):
            return
        ps = node.pacer
        r = ps.current_round
        shoal = node.shoal
        anchor = shoal.anchor_at(r)
        prev = shoal.anchor_at(r - 1) if anchor is None and r > 0 else None
        if not ready_to_advance(ps, node.dag, anchor, t, self.config.pacer, prev):
            return
        log = node.round_log
        log.left_at = t
        log.fallback = ps.fallback_active
        log.anchor = anchor
        if r + 1 >= self.config.duration_rounds:
            node.done = True
            self.finished_at[node.id] = t
            return
        self._enter_round(node, r + 1, t)

    def run(self) -> RunTrace:
        for node in self.nodes:
            if node.alive(0.0):
                self._enter_round(node, 0, 0.0)
        queue = self.queue
        nodes = self.nodes
        pop = heapq.heappop
        while queue:
            t, _, kind, a, b = pop(queue)
            self.now = t
            node = nodes[a]
            if kind == _DELIVER:
                if t < node.crash_at:
                    self._insert(node, b, t)
            elif kind == _CHECK:
                self._check(node, t)
            elif node.pacer.current_round == b:
                self._schedule_check(node, t)
        horizon = max(self.finished_at.values(), default=self.now)
        parents = dict(self.parents) if self.config.record_deliveries else None
        return RunTrace(self.config, horizon, dict(self.vertices), [n.trace for n in nodes], parents)


def run(config: SimConfig) -> RunTrace:
    return Simulation(config).run()


def replay_deliveries(trace: RunTrace, validator: int, orderer) -> list:
    """Feed one validator's recorded insertions into ``orderer`` and return its commits.

    ``orderer`` needs a ``step(dag, now)`` method (e.g. :class:`BullsharkOrderer`).
    Insertions sharing a timestamp are applied together before stepping, which
    matches when the simulator itself runs the orderer.
    """
    vt = trace.validators[validator]
    dag = LocalDag(trace.config.n, trace.config.f)
    out = []
    dl = vt.deliveries
    i = 0
    while i < len(dl):
        t = dl[i][0]
        while i < len(dl) and dl[i][0] == t:
            dag.insert(trace.rebuild_vertex(dl[i][1]))
            i += 1
        out.extend(orderer.step(dag, t))
    return out


def mode_config(mode: str, **overrides) -> SimConfig:
    """SimConfig for one of the named pacer or Shoal modes.

    Pacer modes keep plain Bullshark ordering; Shoal modes use baseline pacing.
    """
    from .pacer import PACER_MODES

    timeout = overrides.pop("timeout_ms", 1000.0)
    fallback_k = overrides.pop("fallback_k", 10)
    epoch_seed = overrides.pop("epoch_seed", overrides.get("seed", 0))
    if mode in PACER_MODES:
        pacer = PacerPolicy(PacerKind(mode), timeout, fallback_k)
        shoal = ShoalConfig.for_mode(ShoalMode.BULLSHARK, epoch_seed=epoch_seed)
    else:
        pacer = PacerPolicy(PacerKind.BASELINE, timeout, fallback_k)
        shoal = ShoalConfig.for_mode(mode, epoch_seed=epoch_seed)
    return SimConfig(pacer=pacer, shoal=shoal, **overrides)
