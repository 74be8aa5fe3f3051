import random
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from consensus_cert.structure import StructureVerdict, structure_check_local
from consensus_cert.trees import BuilderError, build_tree, height, tree_from_parents
from consensus_cert.types import ErrorKind, TreeInput
from consensus_cert.wire import StructureMsg
from consensus_cert.workload import structure_violations

from sweep import structure_sweep


def test_leaf_reports_root_depth_and_one():
    leaf = TreeInput(9, (1, 4, 9), 1, 4, (), 2)
    out, verdict = structure_check_local(leaf, [])
    assert out == StructureMsg(1, 2, 1)
    assert verdict.passed and verdict.error is None


def test_singleton_root_passes():
    out, verdict = structure_check_local(TreeInput(7, (7,), 7, None, (), 0), [])
    assert out is None and verdict.passed


def test_star_with_omitted_leaf_raises_span():
    # five-node star, leaf 5 was left out; the root hears 4 of 5
    ids = (1, 2, 3, 4, 5)
    root = TreeInput(1, ids, 1, None, (2, 3, 4), 0)
    msgs = [StructureMsg(1, 1, 1)] * 3
    out, verdict = structure_check_local(root, msgs)
    assert out is None
    assert [e.kind for e in verdict.errors] == [ErrorKind.SPAN]


def test_child_with_other_root_is_structure_error():
    t = TreeInput(2, (1, 2, 3), 1, 1, (3,), 1)
    out, verdict = structure_check_local(t, [StructureMsg(3, 2, 1)])
    assert [e.kind for e in verdict.errors] == [ErrorKind.STRUCTURE]
    assert out == StructureMsg(1, 1, 2)


@pytest.mark.parametrize("child_depth", [0, 1])
def test_child_not_deeper_is_structure_error(child_depth):
    t = TreeInput(2, (1, 2, 3), 1, 1, (3,), 1)
    _, verdict = structure_check_local(t, [StructureMsg(1, child_depth, 1)])
    assert verdict.error.kind is ErrorKind.STRUCTURE


def test_depth_gap_larger_than_one_is_accepted():
    t = TreeInput(2, (1, 2, 3), 1, 1, (3,), 1)
    _, verdict = structure_check_local(t, [StructureMsg(1, 5, 1)])
    assert verdict.passed


def test_all_errors_reported_in_one_pass():
    root = TreeInput(1, (1, 2, 3), 1, None, (2, 3), 0)
    _, verdict = structure_check_local(root, [StructureMsg(2, 0, 1), StructureMsg(1, 1, 5)])
    kinds = [e.kind for e in verdict.errors]
    assert kinds.count(ErrorKind.STRUCTURE) == 2 and ErrorKind.SPAN in kinds


def test_depth_check_can_be_disabled():
    t = TreeInput(2, (1, 2, 3), 1, 1, (3,), 1)
    _, verdict = structure_check_local(t, [StructureMsg(1, 1, 1)], check_depth=False)
    assert verdict.passed


def test_verdict_error_present_iff_failed():
    assert StructureVerdict(()).error is None
    assert StructureVerdict(()).passed


@pytest.mark.parametrize("policy", ["bfs", "star", "line", "random"])
def test_builders_produce_valid_trees(policy):
    ids = [3, 8, 10, 11, 40]
    trees = build_tree(ids, policy, rng=random.Random(2))
    assert structure_violations(trees, ids) == []
    assert all(t.root_id == 3 for t in trees.values())


def test_star_and_line_shapes():
    star = build_tree([1, 2, 3, 4, 5], "star")
    assert star[1].children == (2, 3, 4, 5)
    assert {star[x].depth for x in (2, 3, 4, 5)} == {1}
    line = build_tree([1, 2, 3, 4], "line")
    assert [line[x].depth for x in (1, 2, 3, 4)] == [0, 1, 2, 3]
    assert height(line) == 3


def test_bfs_over_adjacency():
    trees = build_tree([1, 2, 3, 4], "bfs", adjacency=[(1, 2), (2, 3), (3, 4), (1, 4)])
    assert trees[3].depth == 2 and trees[4].parent_id == 1


def test_disconnected_adjacency_is_builder_error():
    with pytest.raises(BuilderError):
        build_tree([1, 2, 3], "bfs", adjacency=[(1, 2)])


def test_tree_from_parents_rejects_cycles():
    with pytest.raises(BuilderError):
        tree_from_parents({1: None, 2: 3, 3: 2})


@given(st.integers(1, 256), st.integers(0, 2**32))
def test_valid_random_trees_raise_nothing(n, seed):
    rng = random.Random(seed)
    ids = sorted(rng.sample(range(1, 10**9), n))
    trees = build_tree(ids, "random", rng=rng)
    errors, sent = structure_sweep(trees)
    assert errors == []
    # one report per non-root, none from the root
    assert len(sent) == n - 1


@given(st.integers(3, 40), st.integers(0, 2**32))
def test_depth_corruption_is_caught(n, seed):
    rng = random.Random(seed)
    ids = list(range(1, n + 1))
    trees = build_tree(ids, "random", rng=rng)
    x = rng.choice(ids[1:])
    parent = trees[trees[x].parent_id]
    trees[x] = replace(trees[x], depth=parent.depth)
    errors, _ = structure_sweep(trees)
    assert structure_violations(trees, ids)
    assert any(e.kind is ErrorKind.STRUCTURE for e in errors)


@given(st.integers(3, 40), st.integers(0, 2**32))
def test_second_root_is_caught(n, seed):
    rng = random.Random(seed)
    ids = list(range(1, n + 1))
    trees = build_tree(ids, "random", rng=rng)
    x = rng.choice(ids[1:])
    p = trees[x].parent_id
    trees[p] = replace(trees[p], children=tuple(c for c in trees[p].children if c != x))
    trees[x] = replace(trees[x], parent_id=None, depth=0)
    errors, _ = structure_sweep(trees)
    assert errors


@given(st.integers(2, 40), st.integers(0, 2**32))
def test_omitted_node_is_caught(n, seed):
    rng = random.Random(seed)
    ids = list(range(1, n + 1))
    trees = build_tree(ids, "random", rng=rng)
    leaf = rng.choice([x for x, t in trees.items() if not t.children])
    p = trees[leaf].parent_id
    trees[p] = replace(trees[p], children=tuple(c for c in trees[p].children if c != leaf))
    del trees[leaf]
    errors, _ = structure_sweep(trees)
    assert [e.kind for e in errors] == [ErrorKind.SPAN]
