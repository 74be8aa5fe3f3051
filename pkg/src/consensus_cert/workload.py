"""Scenarios, bug injection and the centralized ground-truth oracles.

The consensus implementation is simulated: a scenario fixes every node's
decision and proposals directly, and a bug perturbs exactly one of those
inputs or the tree handed to the agents.

The oracles here read raw inputs and never call into the certification
code, so they stay an independent reference for the distributed verdicts.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

from .consensus import ConsensusInput
from .simnet import SimConfig
from .trees import POLICIES, BuilderError, build_tree
from .types import NodeId, TreeInput


class ScenarioError(ValueError):
    pass


class BugKind(enum.Enum):
    NONE = "none"
    DISAGREEMENT = "disagreement"
    INVALID_DECISION = "invalid-decision"
    DUPLICATE_ID = "duplicate-id"
    TREE_CYCLE = "tree-cycle"
    TREE_FOREST = "tree-forest"
    TREE_OMIT_NODE = "tree-omit-node"
    TREE_DEPTH = "tree-depth"


TREE_BUGS = (BugKind.TREE_CYCLE, BugKind.TREE_FOREST, BugKind.TREE_OMIT_NODE, BugKind.TREE_DEPTH)


@dataclass(frozen=True)
class Bug:
    kind: BugKind = BugKind.NONE
    node: Optional[NodeId] = None
    value: Optional[bytes] = None
    id: Optional[NodeId] = None


@dataclass(frozen=True)
class Scenario:
    sim: SimConfig
    decision: bytes = b"commit"
    proposals: Mapping[NodeId, tuple[bytes, ...]] = field(default_factory=dict)
    tree_policy: str = "bfs"
    bug: Bug = Bug()
    rounds: int = 1
    jitter: int = 0
    name: str = "scenario"

    @property
    def ids(self) -> tuple[NodeId, ...]:
        return self.sim.node_ids


@dataclass
class Generated:
    """Per-node inputs for one scenario.

    ``trees`` maps each network address to the tree input its agent starts
    with (``None`` for a node left out of the tree).
    """

    trees: dict[NodeId, Optional[TreeInput]]
    inputs: dict[NodeId, ConsensusInput]
    base_trees: dict[NodeId, TreeInput]


def epoch_rng(seed: int, epoch: int) -> random.Random:
    return random.Random(f"{seed}:{epoch}")


def base_tree(scenario: Scenario, alive: Optional[Sequence[NodeId]] = None, epoch: int = 0) -> dict:
    alive = scenario.ids if alive is None else alive
    return build_tree(alive, scenario.tree_policy, scenario.sim.adjacency, epoch_rng(scenario.sim.seed, epoch))


def _subtree(trees: Mapping[NodeId, TreeInput], u: NodeId) -> list[NodeId]:
    out, stack = [], [u]
    while stack:
        x = stack.pop()
        out.append(x)
        stack.extend(trees[x].children)
    return out


def _detach(trees: dict, u: NodeId) -> None:
    p = trees[u].parent_id
    trees[p] = replace(trees[p], children=tuple(c for c in trees[p].children if c != u))


def _need_nonroot(trees: Mapping[NodeId, TreeInput], bug: Bug) -> NodeId:
    u = bug.node
    if u not in trees:
        raise ScenarioError(f"{bug.kind.value}: node {u} does not exist")
    if trees[u].is_root:
        raise ScenarioError(f"{bug.kind.value}: node {u} is the root")
    return u


def inject_tree_bug(trees: dict[NodeId, TreeInput], bug: Bug) -> dict[NodeId, Optional[TreeInput]]:
    trees = dict(trees)
    u = _need_nonroot(trees, bug)
    t = trees[u]
    if bug.kind is BugKind.TREE_CYCLE:
        below = [x for x in _subtree(trees, u) if x != u and not trees[x].children]
        if not below:
            raise ScenarioError(f"tree-cycle: node {u} has no descendants")
        w = min(below)
        _detach(trees, u)
        trees[w] = replace(trees[w], children=tuple(sorted(trees[w].children + (u,))))
        trees[u] = replace(trees[u], parent_id=w, depth=trees[w].depth + 1)
    elif bug.kind is BugKind.TREE_FOREST:
        _detach(trees, u)
        trees[u] = replace(t, root_id=t.id, parent_id=None, depth=0)
    elif bug.kind is BugKind.TREE_OMIT_NODE:
        _detach(trees, u)
        trees[u] = None
    elif bug.kind is BugKind.TREE_DEPTH:
        pdepth = trees[t.parent_id].depth
        if pdepth < 1:
            raise ScenarioError(f"tree-depth: node {u} must sit at depth 2 or more")
        trees[u] = replace(t, depth=pdepth)
    else:
        raise ScenarioError(f"not a tree bug: {bug.kind}")
    return trees


def generate(scenario: Scenario) -> Generated:
    """Per-node tree inputs and consensus inputs, with the bug applied."""
    ids = scenario.ids
    bug = scenario.bug
    if scenario.tree_policy not in POLICIES:
        raise ScenarioError(f"unknown tree policy {scenario.tree_policy!r}")
    if scenario.rounds < 0 or scenario.jitter < 0:
        raise ScenarioError("rounds and jitter must be non-negative")
    for x in scenario.proposals:
        if x not in ids:
            raise ScenarioError(f"proposals given for unknown node {x}")
    if bug.node is not None and bug.node not in ids:
        raise ScenarioError(f"bug targets unknown node {bug.node}")
    try:
        base = base_tree(scenario)
    except BuilderError as exc:
        raise ScenarioError(str(exc)) from exc

    decision = scenario.decision
    proposals = {x: tuple(scenario.proposals.get(x, ())) for x in ids}
    if bug.kind is not BugKind.INVALID_DECISION and not any(decision in p for p in proposals.values()):
        raise ScenarioError("no node proposes the decision; use an invalid-decision bug for that")
    inputs = {x: ConsensusInput(decision, proposals[x]) for x in ids}
    trees: dict[NodeId, Optional[TreeInput]] = dict(base)

    if bug.kind is BugKind.DISAGREEMENT:
        if bug.node is None or bug.value is None:
            raise ScenarioError("disagreement needs node and value")
        if bug.value == decision:
            raise ScenarioError("disagreement value equals the decision")
        if len(ids) < 2:
            raise ScenarioError("disagreement needs at least two nodes")
        inputs[bug.node] = ConsensusInput(bug.value, proposals[bug.node])
    elif bug.kind is BugKind.INVALID_DECISION:
        if bug.value is None:
            raise ScenarioError("invalid-decision needs a value")
        if any(bug.value in p for p in proposals.values()):
            raise ScenarioError("invalid-decision value is proposed somewhere")
        inputs = {x: ConsensusInput(bug.value, proposals[x]) for x in ids}
    elif bug.kind is BugKind.DUPLICATE_ID:
        if bug.node is None or bug.id is None:
            raise ScenarioError("duplicate-id needs node and id")
        if bug.id not in ids or bug.id == bug.node:
            raise ScenarioError("duplicate-id must copy another existing id")
        trees[bug.node] = replace(base[bug.node], id=bug.id)
    elif bug.kind in TREE_BUGS:
        if bug.node is None:
            raise ScenarioError(f"{bug.kind.value} needs a node")
        trees = inject_tree_bug(base, bug)
    return Generated(trees, inputs, base)


# -- oracles ----------------------------------------------------------------


def consensus_oracle(
    inputs: Mapping[NodeId, ConsensusInput],
    alive: Iterable[NodeId],
) -> tuple[bool, bool]:
    """``(agreement, validity)`` over the given nodes' raw inputs.

    Validity asks for a node whose own proposals contain its own decision;
    once decisions agree this is exactly "the decided value was proposed".
    """
    alive = sorted(set(alive))
    decisions = {inputs[x].decision for x in alive}
    agreement = len(decisions) <= 1
    validity = any(inputs[x].decision in inputs[x].proposals for x in alive)
    return agreement, validity


def oracle(gen: Generated, alive_at_completion: Iterable[NodeId]) -> tuple[bool, bool]:
    return consensus_oracle(gen.inputs, alive_at_completion)


def structure_violations(
    trees: Mapping[NodeId, Optional[TreeInput]],
    alive: Iterable[NodeId],
) -> list[str]:
    """Why the tree inputs of ``alive`` nodes are not a valid certificate."""
    alive = sorted(set(alive))
    found = []
    present = {}
    for x in alive:
        t = trees.get(x)
        if t is None:
            found.append(f"{x}: no tree input")
        else:
            present[x] = t
    for x, t in present.items():
        ids = t.id_list
        if t.parent_id is None and t.id != t.root_id or t.parent_id is not None and t.id == t.root_id:
            found.append(f"{x}: root status inconsistent")
        if (t.depth == 0) != (t.parent_id is None) or t.depth < 0:
            found.append(f"{x}: bad depth {t.depth}")
        if t.id not in ids or t.root_id not in ids:
            found.append(f"{x}: id or root missing from id_list")
        if x in t.children or x == t.parent_id:
            found.append(f"{x}: names itself as a neighbour")
        if t.parent_id is not None:
            p = present.get(t.parent_id)
            if p is None or x not in p.children:
                found.append(f"{x}: parent {t.parent_id} does not list it")
            elif t.depth <= p.depth:
                found.append(f"{x}: depth {t.depth} not below parent's {p.depth}")
        for c in t.children:
            ct = present.get(c)
            if ct is None or ct.parent_id != x:
                found.append(f"{x}: listed child {c} does not point back")
    roots = [x for x, t in present.items() if t.parent_id is None]
    if len(roots) != 1:
        found.append(f"{len(roots)} roots")
    if len({t.root_id for t in present.values()}) > 1:
        found.append("nodes disagree on the root")
    if len(roots) == 1:
        seen = {roots[0]}
        stack = [roots[0]]
        while stack:
            x = stack.pop()
            for c in present[x].children:
                if c in present and present[c].parent_id == x and c not in seen:
                    seen.add(c)
                    stack.append(c)
        if len(seen) != len(alive):
            found.append(f"root reaches {len(seen)} of {len(alive)} nodes")
        if len(seen) != present[roots[0]].n:
            found.append(f"root reaches {len(seen)} nodes, id_list has {present[roots[0]].n}")
    return found


def ids_unique(trees: Mapping[NodeId, Optional[TreeInput]], alive: Iterable[NodeId]) -> bool:
    claimed = [trees[x].id for x in alive if trees.get(x) is not None]
    lists_ok = all(
        list(t.id_list) == sorted(set(t.id_list)) and t.id_list
        for x in alive if (t := trees.get(x)) is not None
    )
    return len(claimed) == len(set(claimed)) and lists_ok


# -- random scenarios -------------------------------------------------------


def random_value(rng: random.Random, long_fraction: float = 0.3) -> bytes:
    n = rng.randint(9, 48) if rng.random() < long_fraction else rng.randint(1, 8)
    return rng.randbytes(n)


def random_ids(rng: random.Random, n: int) -> tuple[NodeId, ...]:
    return tuple(sorted(rng.sample(range(1, 1 << 40), n)))


def random_scenario(
    seed: int,
    n: int,
    bug: BugKind = BugKind.NONE,
    policy: Optional[str] = None,
    rounds: int = 1,
    long_fraction: float = 0.3,
    max_delay: Optional[int] = None,
) -> Scenario:
    """A seeded scenario whose bug, if any, is guaranteed to be injectable."""
    rng = random.Random(f"scenario:{seed}:{n}:{bug.value}")
    ids = random_ids(rng, n)
    if policy is None:
        policy = rng.choice(("random", "random", "line", "star"))
        if bug is BugKind.TREE_DEPTH and policy == "star":
            policy = "random"
    md = max_delay if max_delay is not None else rng.randint(1, 3)
    sim = SimConfig(seed=seed, n=n, ids=ids, min_delay=rng.randint(1, md), max_delay=md)

    decision = random_value(rng, long_fraction)
    others = []
    while len(others) < 3:
        v = random_value(rng, long_fraction)
        if v != decision and v not in others:
            others.append(v)
    proposals = {}
    for x in ids:
        k = rng.randint(0, 3)
        proposals[x] = tuple(rng.choice([decision] + others) for _ in range(k))
    if bug is not BugKind.INVALID_DECISION and not any(decision in p for p in proposals.values()):
        x = rng.choice(ids)
        proposals[x] = proposals[x] + (decision,)

    scenario = Scenario(sim, decision, proposals, policy, Bug(), rounds, 0, f"{bug.value}-n{n}-s{seed}")
    if bug is BugKind.NONE:
        return scenario
    if bug is BugKind.DISAGREEMENT:
        deviant = rng.choice(ids)
        rest = [x for x in ids if x != deviant]
        if not any(decision in proposals[x] for x in rest):
            # keep validity intact once the deviant stops witnessing
            x = rng.choice(rest)
            proposals[x] = proposals[x] + (decision,)
            scenario = replace(scenario, proposals=proposals)
        b = Bug(bug, node=deviant, value=rng.choice(others))
    elif bug is BugKind.INVALID_DECISION:
        while True:
            z = random_value(rng, long_fraction)
            if all(z not in p for p in proposals.values()):
                break
        b = Bug(bug, value=z)
    elif bug is BugKind.DUPLICATE_ID:
        if n < 3:
            raise ScenarioError("duplicate-id scenarios need n >= 3")
        trees = base_tree(scenario)
        root = next(x for x, t in trees.items() if t.is_root)
        target = rng.choice([x for x in ids if x != root])
        b = Bug(bug, node=target, id=rng.choice([x for x in ids if x not in (root, target)]))
    else:
        trees = base_tree(scenario)
        if bug is BugKind.TREE_CYCLE:
            pool = [x for x, t in trees.items() if not t.is_root and t.children]
        elif bug is BugKind.TREE_DEPTH:
            pool = [x for x, t in trees.items() if t.depth >= 2]
        else:
            pool = [x for x, t in trees.items() if not t.is_root]
        if not pool:
            # the drawn tree cannot host this defect; a line always can
            scenario = replace(scenario, tree_policy="line")
            trees = base_tree(scenario)
            pool = [x for x, t in trees.items() if not t.is_root and (t.children or bug is not BugKind.TREE_CYCLE)]
            if bug is BugKind.TREE_DEPTH:
                pool = [x for x, t in trees.items() if t.depth >= 2]
        if not pool:
            raise ScenarioError(f"{bug.value} needs a larger tree (n={n})")
        b = Bug(bug, node=rng.choice(sorted(pool)))
    return replace(scenario, bug=b)
