"""Reduce a RunTrace to throughput/latency metrics, and compare metric files.

Conventions:

* A vertex's latency is ``ordered_at - created_at``.  With the ``first``
  convention ``ordered_at`` is the earliest time any validator ordered it;
  with ``mean`` it is averaged over the validators that ordered it.
* Latency statistics only cover vertices whose round lies in
  ``[warmup_rounds, duration_rounds - tail_rounds)``; throughput covers the
  whole run and divides by the horizon (when the last live validator
  finished its last round).
* A non-anchor vertex is an anchor-round vertex if some instance scheduled
  an anchor (ordered or skipped) in its round, otherwise a vote-round vertex.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

SCHEMA = 1
COMPARE_KEYS = (
    "throughput_tps",
    "latency_avg_ms",
    "latency_p50_ms",
    "latency_p90_ms",
    "latency_vote_round_ms",
    "latency_anchor_round_ms",
)


@dataclass
class Metrics:
    throughput_tps: float
    latency_avg_ms: float | None
    latency_p50_ms: float | None
    latency_p90_ms: float | None
    latency_vote_round_ms: float | None
    latency_anchor_round_ms: float | None
    rounds_to_commit: dict
    anchors_ordered: int
    anchors_skipped: int
    timeline: list
    horizon_ms: float = 0.0
    ordered_vertices: int = 0
    total_vertices: int = 0
    warmup_rounds: int = 0
    tail_rounds: int = 0
    latency_convention: str = "first"
    schema: int = SCHEMA
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def timeline_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_ms", "latency_ms"])
        for t, lat in self.timeline:
            w.writerow([repr(float(t)), repr(float(lat))])
        return buf.getvalue()

    def timeline_spread(self) -> float:
        if not self.timeline:
            return 0.0
        lats = [lat for _, lat in self.timeline]
        return max(lats) - min(lats)


def reference_log(trace):
    """Longest commit log (ties: lowest validator id); every other log is a prefix of it."""
    best = max(trace.validators, key=lambda v: (len(v.commit_log), -v.id))
    return best.commit_log


def order_times(trace, convention="first") -> dict:
    """Vertex id -> ordered_at under the chosen convention."""
    if convention not in ("first", "mean"):
        raise ValueError(f"unknown latency convention {convention!r}")
    acc: dict = {}
    for v in trace.validators:
        for rec in v.commit_log:
            t = rec.decided_at
            for vid in rec.ordered_vertices:
                cur = acc.get(vid)
                if convention == "first":
                    if cur is None or t < cur:
                        acc[vid] = t
                elif cur is None:
                    acc[vid] = [t, 1]
                else:
                    cur[0] += t
                    cur[1] += 1
    if convention == "mean":
        acc = {vid: s / c for vid, (s, c) in acc.items()}
    return acc


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else None


def compute_metrics(trace, warmup_rounds=None, tail_rounds=None, convention="first") -> Metrics:
    duration = trace.config.duration_rounds
    if warmup_rounds is None:
        warmup_rounds = duration // 10
    if tail_rounds is None:
        tail_rounds = duration // 10
    lo, hi = warmup_rounds, duration - tail_rounds

    ordered_at = order_times(trace, convention)
    created = trace.vertices
    ref = reference_log(trace)

    anchor_rounds = set()
    anchors = set()
    skipped = 0
    for rec in ref:
        anchors.add(rec.anchor)
        anchor_rounds.add(rec.anchor.round)
        for s in rec.skipped:
            anchor_rounds.add(s.round)
        skipped += len(rec.skipped)

    lat = {vid: ordered_at[vid] - created[vid][0] for vid in ordered_at}
    in_window = [vid for vid in sorted(lat) if lo <= vid.round < hi]
    window_lat = np.array([lat[vid] for vid in in_window], dtype=float)

    vote, anchor_round = [], []
    for vid in in_window:
        if vid in anchors:
            continue
        (anchor_round if vid.round in anchor_rounds else vote).append(lat[vid])

    hist: dict = {}
    timeline = []
    first_decided: dict = {}
    for v in trace.validators:
        for rec in v.commit_log:
            t = first_decided.get(rec.anchor)
            if t is None or rec.decided_at < t:
                first_decided[rec.anchor] = rec.decided_at
    for rec in ref:
        a = rec.anchor
        for vid in rec.ordered_vertices:
            if lo <= vid.round < hi:
                k = a.round + 2 - vid.round
                hist[k] = hist.get(k, 0) + 1
        if lo <= a.round < hi:
            timeline.append((first_decided[a], _mean([lat[vid] for vid in rec.ordered_vertices])))
    timeline.sort()

    tx = sum(created[vid][1] for vid in ordered_at)
    horizon = trace.horizon_ms
    tps = tx / (horizon / 1000.0) if horizon > 0 else 0.0

    def pct(q):
        return float(np.percentile(window_lat, q)) if len(window_lat) else None

    return Metrics(
        throughput_tps=float(tps),
        latency_avg_ms=_mean(window_lat),
        latency_p50_ms=pct(50),
        latency_p90_ms=pct(90),
        latency_vote_round_ms=_mean(vote),
        latency_anchor_round_ms=_mean(anchor_round),
        rounds_to_commit={str(k): hist[k] for k in sorted(hist)},
        anchors_ordered=len(ref),
        anchors_skipped=skipped,
        timeline=[[float(t), float(x)] for t, x in timeline],
        horizon_ms=float(horizon),
        ordered_vertices=len(ordered_at),
        total_vertices=len(created),
        warmup_rounds=lo,
        tail_rounds=tail_rounds,
        latency_convention=convention,
    )


class MetricsFileError(ValueError):
    pass


def load_metrics(path) -> dict:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise MetricsFileError(f"{path}: cannot read metrics ({e})") from None
    if not isinstance(d, dict) or d.get("schema") != SCHEMA:
        raise MetricsFileError(f"{path}: not a schema-{SCHEMA} metrics file")
    missing = [k for k in COMPARE_KEYS if k not in d]
    if missing:
        raise MetricsFileError(f"{path}: missing fields {', '.join(missing)}")
    return d


def _delta(base, x):
    if base is None or x is None or base == 0:
        return None
    return 100.0 * (x - base) / base


def compare(paths, labels=None):
    """Percent deltas of each file against the first one.

    Returns ``(rows, text, csv_text)``; each row maps ``label`` plus, for every
    compared key, the raw value and ``<key>_delta_pct``.
    """
    if len(paths) < 2:
        raise ValueError("compare needs at least two metrics files")
    docs = [load_metrics(p) for p in paths]
    labels = list(labels or [str(p) for p in paths])
    base = docs[0]
    rows = []
    for label, d in zip(labels, docs):
        row = {"label": label}
        for k in COMPARE_KEYS:
            row[k] = d[k]
            row[k + "_delta_pct"] = _delta(base[k], d[k])
        rows.append(row)

    def fmt(x):
        if x is None:
            return "-"
        if isinstance(x, float) and math.isfinite(x):
            return f"{x:.2f}"
        return str(x)

    head = ["label"] + [c for k in COMPARE_KEYS for c in (k, "d%")]
    table = [head] + [[r["label"]] + [fmt(v) for k in COMPARE_KEYS for v in (r[k], r[k + "_delta_pct"])]
                      for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(head))]
    text = "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in table) + "\n"

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["label"] + [c for k in COMPARE_KEYS for c in (k, k + "_delta_pct")]
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r[c] is None else r[c] for c in cols])
    return rows, text, buf.getvalue()
