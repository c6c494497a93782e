"""Strong eventual consistency safety at the graph layer: any delivery
permutation of the same stamped operations must yield identical
observable state, delivery must be idempotent, and no order may ever
produce a live dangling edge."""

import itertools
import random

import pytest

from comodel.crdt import LWWGraph
from comodel.sim import (
    OP_KINDS,
    exhaustive_interleavings,
    op_universe,
    random_graph_ops,
    random_order_convergence,
)
from conftest import REPLICA_A, REPLICA_B, REPLICA_C

REPLICAS = (REPLICA_A, REPLICA_B, REPLICA_C)


def apply_all(ops):
    g = LWWGraph()
    for op in ops:
        op.apply(g)
    return g


def test_universe_covers_every_op_kind():
    kinds = {op.kind for op in op_universe(REPLICAS)}
    assert kinds == set(OP_KINDS)
    assert len(OP_KINDS) == 10


def test_single_op_trivially_converges():
    ops = op_universe(REPLICAS)[:1]
    ok, witness = exhaustive_interleavings(ops)
    assert ok and witness is None


def test_exhaustive_pairs_from_universe():
    pool = op_universe(REPLICAS)
    for pair in itertools.combinations(pool, 2):
        ok, witness = exhaustive_interleavings(list(pair))
        assert ok, f"diverged: {witness}"


def test_exhaustive_triples_from_universe():
    pool = op_universe(REPLICAS)
    for triple in itertools.combinations(pool, 3):
        ok, witness = exhaustive_interleavings(list(triple))
        assert ok, f"diverged: {witness}"


def test_scenario_conflict_triple_all_orders():
    # add vertex, add edge into it, remove it: all 6 orders identical,
    # and the newer edge keeps the vertex alive.
    pool = op_universe(REPLICAS)
    by_kind = {op.kind: op for op in pool}
    ops = [by_kind["add_vertex"], by_kind["add_edge"], by_kind["remove_vertex"]]
    ok, witness = exhaustive_interleavings(ops)
    assert ok, f"diverged: {witness}"
    g = apply_all(ops)
    edge_op = by_kind["add_edge"]
    assert edge_op.stamp > by_kind["remove_vertex"].stamp
    assert g.vertex_live(edge_op.args[1])


def test_randomized_small_sets_exhaustively():
    rng = random.Random(42)
    for _ in range(60):
        ops = random_graph_ops(rng, rng.randint(2, 4), REPLICAS)
        ok, witness = exhaustive_interleavings(ops)
        assert ok, f"diverged on {ops}: {witness}"


def test_five_op_sets_exhaustively():
    rng = random.Random(99)
    for _ in range(10):
        ops = random_graph_ops(rng, 5, REPLICAS)
        ok, witness = exhaustive_interleavings(ops)
        assert ok, f"diverged on {ops}: {witness}"


@pytest.mark.parametrize("count", [50, 120, 200])
def test_randomized_permutations_large_sets(count):
    rng = random.Random(count)
    ops = random_graph_ops(rng, count, REPLICAS)
    assert random_order_convergence(ops, rng, orders=8)


def test_idempotent_delivery():
    rng = random.Random(5)
    for _ in range(40):
        ops = random_graph_ops(rng, 6, REPLICAS)
        once = apply_all(ops)
        twice = LWWGraph()
        for op in ops:
            op.apply(twice)
            op.apply(twice)
        assert once.fingerprint() == twice.fingerprint()


def test_pairwise_commutativity():
    rng = random.Random(6)
    for _ in range(150):
        a, b = random_graph_ops(rng, 2, REPLICAS)
        left = LWWGraph()
        a.apply(left)
        b.apply(left)
        right = LWWGraph()
        b.apply(right)
        a.apply(right)
        assert left.fingerprint() == right.fingerprint()


def test_no_dangling_live_edges_after_any_sequence():
    rng = random.Random(7)
    for _ in range(80):
        ops = random_graph_ops(rng, rng.randint(1, 30), REPLICAS)
        g = apply_all(ops)
        assert g.dangling_live_edges() == []


def test_dangling_checked_after_every_step():
    rng = random.Random(8)
    for _ in range(30):
        ops = random_graph_ops(rng, 15, REPLICAS)
        g = LWWGraph()
        for op in ops:
            op.apply(g)
            assert g.dangling_live_edges() == []
