"""Centralized spanning-tree builders.

These stand in for a distributed spanning-tree protocol. Their output is not
trusted: the structure certificate is what establishes that the result is a
valid tree.
"""

from __future__ import annotations

import random
from collections import deque
from typing import Iterable, Mapping, Optional, Sequence

from .types import NodeId, TreeInput

POLICIES = ("bfs", "star", "line", "random")


class BuilderError(RuntimeError):
    pass


def tree_from_parents(
    parents: Mapping[NodeId, Optional[NodeId]],
    id_list: Optional[Sequence[NodeId]] = None,
) -> dict[NodeId, TreeInput]:
    """Turn a parent map with exactly one ``None`` into per-node inputs."""
    roots = [x for x, p in parents.items() if p is None]
    if len(roots) != 1:
        raise BuilderError(f"parent map has {len(roots)} roots")
    root = roots[0]
    children: dict[NodeId, list[NodeId]] = {x: [] for x in parents}
    for x, p in parents.items():
        if p is not None:
            children[p].append(x)
    depth = {root: 0}
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for c in children[x]:
            depth[c] = depth[x] + 1
            queue.append(c)
    if len(depth) != len(parents):
        raise BuilderError("parent map is not a tree")
    ids = tuple(sorted(parents)) if id_list is None else tuple(id_list)
    return {
        x: TreeInput(x, ids, root, parents[x], tuple(sorted(children[x])), depth[x])
        for x in parents
    }


def _bfs_parents(alive: Sequence[NodeId], edges: Iterable[tuple[NodeId, NodeId]]) -> dict:
    members = set(alive)
    nbrs: dict[NodeId, set[NodeId]] = {x: set() for x in alive}
    for u, v in edges:
        if u in members and v in members and u != v:
            nbrs[u].add(v)
            nbrs[v].add(u)
    root = alive[0]
    parents: dict[NodeId, Optional[NodeId]] = {root: None}
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in sorted(nbrs[x]):
            if y not in parents:
                parents[y] = x
                queue.append(y)
    if len(parents) != len(alive):
        missing = sorted(members - parents.keys())
        raise BuilderError(f"adjacency is disconnected; unreachable from {root}: {missing}")
    return parents


def build_tree(
    alive: Sequence[NodeId],
    policy: str = "bfs",
    adjacency: Optional[Iterable[tuple[NodeId, NodeId]]] = None,
    rng: Optional[random.Random] = None,
) -> dict[NodeId, TreeInput]:
    """Build a tree over ``alive`` rooted at its smallest ID.

    ``adjacency`` only matters for ``bfs``; ``None`` means the complete graph,
    where breadth-first search yields a star.
    """
    alive = sorted(alive)
    if not alive:
        raise BuilderError("no alive nodes")
    root = alive[0]
    rest = alive[1:]
    if policy == "bfs":
        if adjacency is None:
            parents = {root: None, **{x: root for x in rest}}
        else:
            parents = _bfs_parents(alive, adjacency)
    elif policy == "star":
        parents = {root: None, **{x: root for x in rest}}
    elif policy == "line":
        parents = {root: None, **{x: p for p, x in zip(alive, rest)}}
    elif policy == "random":
        rng = rng or random.Random(0)
        order = list(rest)
        rng.shuffle(order)
        placed = [root]
        parents = {root: None}
        for x in order:
            parents[x] = rng.choice(placed)
            placed.append(x)
    else:
        raise BuilderError(f"unknown tree policy {policy!r}; choose from {POLICIES}")
    return tree_from_parents(parents)


def height(trees: Mapping[NodeId, TreeInput]) -> int:
    return max((t.depth for t in trees.values()), default=0)
