import random

from hypothesis import given
from hypothesis import strategies as st

from consensus_cert.consensus import (
    ConsensusInput,
    certify_agreement,
    certify_consensus,
    certify_validity,
    local_witness,
)
from consensus_cert.digest import to_wire
from consensus_cert.trees import build_tree
from consensus_cert.types import ErrorKind, TreeInput
from consensus_cert.workload import consensus_oracle

X, Y = to_wire(b"x"), to_wire(b"y")


def test_agreement_unanimous():
    assert certify_agreement(X, [X, X]) == (X, [])


def test_agreement_one_error_per_mismatched_child():
    fwd, errors = certify_agreement(X, [X, Y, Y], node=4, children=[5, 6, 7])
    assert fwd == X
    assert [e.kind for e in errors] == [ErrorKind.AGREEMENT] * 2
    assert "child 6" in errors[0].detail


def test_validity_flags():
    with_p = ConsensusInput(b"x", (b"y", b"x"))
    without = ConsensusInput(b"x", ())
    assert certify_validity(with_p, [], True) == (True, None)
    assert certify_validity(without, [False, True], True) == (True, None)
    c, err = certify_validity(without, [False], True)
    assert c is False and err.kind is ErrorKind.VALIDITY
    assert certify_validity(without, [], False) == (False, None)


def test_long_values_compare_through_digests():
    v = b"a much longer decision value"
    assert local_witness(ConsensusInput(v, (v,)))
    assert not local_witness(ConsensusInput(v, (v + b"!",)))
    assert local_witness(ConsensusInput(v, (v,)), width=8)


def test_singleton_round():
    t = TreeInput(1, (1,), 1, None, (), 0)
    assert certify_consensus(t, ConsensusInput(b"x", (b"x",)), []) == (None, [])


def sweep(trees, inputs, width=32):
    """Post-order run of the combined round; returns (messages, errors)."""
    order, stack = [], [next(x for x, t in trees.items() if t.is_root)]
    while stack:
        x = stack.pop()
        order.append(x)
        stack.extend(trees[x].children)
    sent, errors = {}, []
    for x in reversed(order):
        out, errs = certify_consensus(trees[x], inputs[x], [sent[c] for c in trees[x].children], width=width)
        errors += errs
        if out is not None:
            sent[x] = out
    return sent, errors


def test_correct_five_node_round():
    trees = build_tree([1, 2, 3, 4, 5], "random", rng=random.Random(0))
    inputs = {x: ConsensusInput(b"x", (b"x",) if x == 3 else ()) for x in trees}
    sent, errors = sweep(trees, inputs)
    assert errors == [] and len(sent) == 4


def test_single_deviant_flags_exactly_its_edges():
    rng = random.Random(7)
    ids = list(range(1, 8))
    trees = build_tree(ids, "random", rng=rng)
    deviant = 5
    inputs = {x: ConsensusInput(b"y" if x == deviant else b"x", (b"x",)) for x in ids}
    _, errors = sweep(trees, inputs)
    # each child whose value differs from its parent's is one flagged edge
    expected = sorted(
        (trees[x].parent_id, x) for x in ids
        if trees[x].parent_id is not None and (x == deviant) != (trees[x].parent_id == deviant)
    )
    flagged = sorted((e.node, int(e.detail.split()[1])) for e in errors)
    assert flagged == expected and errors


def test_invalid_and_disagreeing_signals_both():
    trees = build_tree([1, 2, 3, 4], "line")
    inputs = {x: ConsensusInput(b"z", (b"x",)) for x in trees}
    inputs[4] = ConsensusInput(b"w", (b"x",))
    _, errors = sweep(trees, inputs)
    kinds = {e.kind for e in errors}
    assert kinds == {ErrorKind.AGREEMENT, ErrorKind.VALIDITY}
    assert [e.node for e in errors if e.kind is ErrorKind.VALIDITY] == [1]


values = st.sampled_from([b"a", b"b", b"c", b"long-value-000001", b"long-value-000002"])


@given(
    st.integers(1, 40),
    st.integers(0, 2**32),
    st.data(),
    st.sampled_from([8, 32]),
)
def test_round_verdicts_match_oracle(n, seed, data, width):
    ids = list(range(1, n + 1))
    trees = build_tree(ids, "random", rng=random.Random(seed))
    inputs = {
        x: ConsensusInput(data.draw(values), tuple(data.draw(st.lists(values, max_size=3))))
        for x in ids
    }
    _, errors = sweep(trees, inputs, width)
    agreement, _ = consensus_oracle(inputs, ids)
    assert any(e.kind is ErrorKind.AGREEMENT for e in errors) == (not agreement)
    if agreement:
        d = inputs[1].decision
        valid = any(d in inputs[x].proposals for x in ids)
        assert any(e.kind is ErrorKind.VALIDITY for e in errors) == (not valid)


def test_distinct_long_decisions_never_collide():
    rng = random.Random(3)
    seen = set()
    for _ in range(100_000):
        seen.add(to_wire(rng.randbytes(24), 32))
    assert len(seen) == 100_000
