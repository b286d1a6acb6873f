import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shoalsim.dag import (EquivocationError, InsertOutcome, LocalDag, MalformedVertexError, Vertex,
                          VertexId, VertexNotFound, causal_history, count_anchor_votes, insert_vertex,
                          make_vertex, strong_path_exists)

from dagkit import build, closure_fixpoint, full_dag, random_dags


def test_round0_insert_accepted():
    dag = LocalDag(4)
    assert insert_vertex(dag, make_vertex(0, 0)) is InsertOutcome.ACCEPTED
    assert VertexId(0, 0) in dag


def test_round1_with_quorum_accepted():
    dag = full_dag(4, 1, absent=[(0, 3)])
    v = make_vertex(1, 0, strong=[(0, 0), (0, 1), (0, 2)])
    assert insert_vertex(dag, v) is InsertOutcome.ACCEPTED


def test_duplicate_is_noop_and_conflict_raises():
    dag = full_dag(4, 1)
    assert insert_vertex(dag, make_vertex(0, 2)) is InsertOutcome.DUPLICATE
    assert len(dag) == 4
    dag2 = full_dag(4, 2)
    other = make_vertex(1, 0, strong=[(0, 0), (0, 1), (0, 2)])
    with pytest.raises(EquivocationError):
        dag2.insert(other)


def test_shape_errors():
    with pytest.raises(MalformedVertexError):
        make_vertex(2, 0, strong=[(0, 1)])
    with pytest.raises(MalformedVertexError):
        make_vertex(2, 0, strong=[(1, 0)], weak=[(1, 1)])
    with pytest.raises(MalformedVertexError):
        make_vertex(0, 0, weak=[(0, 1)])
    dag = full_dag(4, 1)
    with pytest.raises(MalformedVertexError):
        dag.insert(make_vertex(1, 0, strong=[(0, 0), (0, 1)]))
    with pytest.raises(MalformedVertexError):
        dag.insert(make_vertex(0, 4))


def test_out_of_order_delivery_buffers_then_releases():
    dag = LocalDag(4)
    prev = [(0, a) for a in range(4)]
    v2 = make_vertex(2, 0, strong=[(1, a) for a in range(3)])
    out, added = dag.insert(v2)
    assert out is InsertOutcome.BUFFERED and added == []
    for a in range(3):
        dag.insert(make_vertex(1, a, strong=prev))
    assert dag.pending_count == 4
    for a in range(4):
        _, added = dag.insert(make_vertex(0, a))
    ids = [v.id for v in added]
    assert VertexId(2, 0) in ids and dag.pending_count == 0
    assert ids[0] == VertexId(0, 3)
    assert ids.index(VertexId(2, 0)) > max(ids.index(VertexId(1, a)) for a in range(3))


def test_round_queries_and_latest():
    dag = full_dag(4, 3, absent=[(2, 1)])
    assert dag.round_size(2) == 3
    assert [v.author for v in dag.round_vertices(2)] == [0, 2, 3]
    assert dag.latest[1] == 1 and dag.latest[0] == 2
    assert dag.max_round == 2
    with pytest.raises(VertexNotFound):
        dag[VertexId(2, 1)]


def test_causal_history_round0_is_self():
    dag = full_dag(4, 1)
    assert causal_history(dag, (0, 1)) == [VertexId(0, 1)]


def test_causal_history_three_rounds():
    dag = full_dag(4, 2)
    dag.insert(make_vertex(2, 0, strong=[(1, 0), (1, 1), (1, 2)]))
    got = causal_history(dag, (2, 0))
    assert len(got) == 8
    assert set(got) == closure_fixpoint(dag, (2, 0))


def test_causal_history_follows_weak_links():
    layout = {(0, a): ([], []) for a in range(4)}
    for a in range(3):
        layout[(1, a)] = ([(0, 0), (0, 1), (0, 2)], [])
    for a in range(3):
        layout[(2, a)] = ([(1, 0), (1, 1), (1, 2)], [])
    layout[(3, 0)] = ([(2, 0), (2, 1), (2, 2)], [(0, 3)])
    dag = build(4, layout)
    got = set(causal_history(dag, (3, 0)))
    assert VertexId(0, 3) in got
    assert got == closure_fixpoint(dag, (3, 0))


def test_causal_history_stop_set():
    dag = full_dag(4, 3)
    below = set(causal_history(dag, (1, 0)))
    got = causal_history(dag, (2, 0), stop=below)
    assert not below & set(got)
    assert set(got) == {VertexId(2, 0), VertexId(1, 1), VertexId(1, 2), VertexId(1, 3)}


def test_strong_path_trivial_cases():
    dag = full_dag(4, 2)
    assert strong_path_exists(dag, (1, 0), (1, 0))
    assert not strong_path_exists(dag, (1, 0), (1, 1))
    assert not strong_path_exists(dag, (0, 0), (1, 1))


def test_strong_path_ignores_weak_links():
    layout = {(0, a): ([], []) for a in range(4)}
    for a in range(3):
        layout[(1, a)] = ([(0, 0), (0, 1), (0, 2)], [])
    for a in range(3):
        layout[(2, a)] = ([(1, 0), (1, 1), (1, 2)], [(0, 3)])
    dag = build(4, layout)
    assert VertexId(0, 3) in causal_history(dag, (2, 0))
    assert not strong_path_exists(dag, (2, 0), (0, 3))
    assert strong_path_exists(dag, (2, 0), (0, 1))


def test_vote_counts():
    dag = full_dag(4, 1)
    assert count_anchor_votes(dag, (0, 0)) == 0
    for a in range(4):
        dag.insert(make_vertex(1, a, strong=[(0, 0), (0, 1), (0, 2), (0, 3)]))
    assert count_anchor_votes(dag, (0, 0)) == 4

    dag = full_dag(4, 1)
    dag.insert(make_vertex(1, 0, strong=[(0, 0), (0, 1), (0, 2)]))
    dag.insert(make_vertex(1, 1, strong=[(0, 0), (0, 1), (0, 3)]))
    dag.insert(make_vertex(1, 2, strong=[(0, 1), (0, 2), (0, 3)]))
    assert count_anchor_votes(dag, (0, 0)) == 2


def test_dump_format():
    dag = full_dag(4, 2, absent=[(1, 3)])
    lines = dag.dump().splitlines()
    assert lines[0] == "0 0 strong: weak:"
    assert lines[4] == "1 0 strong:0:0,0:1,0:2,0:3 weak:"
    assert len(lines) == 7


@settings(max_examples=60, deadline=None)
@given(random_dags())
def test_closure_matches_fixpoint_oracle(case):
    dag, _ = case
    for vid in list(dag.vertices)[-5:]:
        assert set(causal_history(dag, vid)) == closure_fixpoint(dag, vid)


@settings(max_examples=60, deadline=None)
@given(random_dags(), st.randoms(use_true_random=False))
def test_strong_path_matches_fixpoint_oracle(case, rnd):
    dag, _ = case
    ids = sorted(dag.vertices)
    for _ in range(10):
        a, b = rnd.choice(ids), rnd.choice(ids)
        assert strong_path_exists(dag, a, b) == (b in closure_fixpoint(dag, a, strong_only=True))


@settings(max_examples=60, deadline=None)
@given(random_dags(), st.randoms(use_true_random=False))
def test_insertion_order_does_not_matter(case, rnd):
    dag, layout = case
    order = sorted(layout)
    rnd.shuffle(order)
    other = LocalDag(dag.n)
    for vid in order:
        s, w = layout[vid]
        other.insert(make_vertex(vid[0], vid[1], s, w))
    assert other.pending_count == 0
    assert other.vertices == dag.vertices
    for vid in dag.vertices:
        assert count_anchor_votes(other, vid) == count_anchor_votes(dag, vid)
        assert count_anchor_votes(dag, vid) == sum(vid in v.strong_parents for v in dag.vertices.values())
