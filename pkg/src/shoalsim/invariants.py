"""Executable safety checks over simulator traces."""

from __future__ import annotations


def is_prefix(a, b) -> bool:
    """True iff one of ``a``, ``b`` is a prefix of the other."""
    k = min(len(a), len(b))
    return list(a[:k]) == list(b[:k])


def vertex_stream(commit_log) -> list:
    out = []
    for rec in commit_log:
        out.extend(rec.ordered_vertices)
    return out


def safety_violations(trace) -> list[str]:
    """Pairwise prefix checks on ordered vertices and on per-instance anchor decisions.

    Returns human-readable problems; an empty list means the run was safe.
    Every log is compared against the longest one, which is enough because
    prefix-of-a-common-sequence is transitive.
    """
    logs = [(v.id, v.commit_log) for v in trace.validators]
    if not logs:
        return []
    ref_id, ref = max(logs, key=lambda x: (len(vertex_stream(x[1])), len(x[1]), -x[0]))
    ref_v = vertex_stream(ref)
    ref_a = [(r.epoch_tag, r.anchor, r.skipped) for r in ref]
    problems = []
    for vid, log in logs:
        s = vertex_stream(log)
        if len(set(s)) != len(s):
            problems.append(f"validator {vid}: a vertex was ordered twice")
        if not is_prefix(s, ref_v):
            problems.append(f"validators {vid} and {ref_id}: ordered streams diverge")
        anchors = [(r.epoch_tag, r.anchor, r.skipped) for r in log]
        if not is_prefix(anchors, ref_a):
            problems.append(f"validators {vid} and {ref_id}: instance anchors disagree")
    return problems
