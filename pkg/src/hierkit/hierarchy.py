"""Class taxonomies: parsing, shortest-path distances, and ancestor lookups.

A hierarchy is a directed parent->child edge list over string node ids plus
a map from contiguous class indices to leaf nodes.  Distances are unweighted
shortest-path hop counts on the undirected graph (defined for DAGs too);
leaf ordering and ancestor lookups walk parent links and therefore require a
tree, i.e. at most one parent per node.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

__all__ = [
    "DistanceMatrix",
    "Hierarchy",
    "dfs_leaf_order",
    "graph_distance_matrix",
    "hypernym_of",
    "parse_hierarchy",
]


@dataclass
class DistanceMatrix:
    """Pairwise class distances; ``labels`` fixes the row/column order."""

    labels: list[int]
    values: np.ndarray

    def __post_init__(self) -> None:
        self.labels = [int(x) for x in self.labels]
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("distance matrix labels contain duplicates")
        v = np.asarray(self.values, dtype=np.float64)
        n = len(self.labels)
        if v.shape != (n, n):
            raise ValueError(f"matrix shape {v.shape} does not match {n} labels")
        if not np.isfinite(v).all():
            raise ValueError("distance matrix has non-finite entries")
        if (v < 0).any():
            raise ValueError("distance matrix has negative entries")
        if not np.array_equal(v, v.T):
            raise ValueError("distance matrix is not symmetric")
        if np.count_nonzero(np.diagonal(v)):
            raise ValueError("distance matrix has a non-zero diagonal")
        self.values = v

    @property
    def size(self) -> int:
        return len(self.labels)


@dataclass
class Hierarchy:
    """Parsed taxonomy graph.

    ``class_index`` maps contiguous class indices 0..C-1 to leaf node ids.
    ``is_tree`` is true iff no node has two parents; operations that walk
    parent links require it.
    """

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    class_index: dict[int, str]
    is_tree: bool
    children: dict[str, list[str]] = field(repr=False, default_factory=dict)
    parents: dict[str, list[str]] = field(repr=False, default_factory=dict)
    node_to_class: dict[str, int] = field(repr=False, default_factory=dict)

    @property
    def class_count(self) -> int:
        return len(self.class_index)

    @property
    def roots(self) -> list[str]:
        return [n for n in self.nodes if not self.parents.get(n)]


def _lines(source, default_name: str) -> Iterator[tuple[str, int, str]]:
    """Yield (source_name, line_number, content) skipping blanks and # comments."""
    if isinstance(source, (str, bytes, os.PathLike)):
        name = str(source)
        with open(source, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\r\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                yield name, lineno, line
    else:
        for lineno, raw in enumerate(source, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield default_name, lineno, line


def parse_hierarchy(edges, classes) -> Hierarchy:
    """Parse edge and class-index files into a validated Hierarchy.

    Parameters
    ----------
    edges : path or iterable of lines
        One ``parent<TAB>child`` edge per line; ``#`` starts a comment.
    classes : path or iterable of lines
        One ``index<TAB>node_id`` line per class; indices 0-based contiguous.

    Raises
    ------
    ValueError
        On malformed lines (with line numbers), cycles, class indices that
        are duplicated or gapped, or a class mapped to a non-leaf node.
    """
    edge_list: list[tuple[str, str]] = []
    seen_edges: set[tuple[str, str]] = set()
    nodes: list[str] = []
    node_set: set[str] = set()

    def add_node(n: str) -> None:
        if n not in node_set:
            node_set.add(n)
            nodes.append(n)

    for name, lineno, line in _lines(edges, "<edges>"):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ValueError(f"{name}:{lineno}: expected 'parent<TAB>child', got {line!r}")
        parent, child = parts
        if parent == child:
            raise ValueError(f"{name}:{lineno}: cycle detected (self-edge on {parent!r})")
        edge = (parent, child)
        add_node(parent)
        add_node(child)
        if edge in seen_edges:
            continue
        seen_edges.add(edge)
        edge_list.append(edge)

    class_map: dict[int, str] = {}
    node_to_class: dict[str, int] = {}
    for name, lineno, line in _lines(classes, "<classes>"):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[1]:
            raise ValueError(f"{name}:{lineno}: expected 'index<TAB>node_id', got {line!r}")
        try:
            idx = int(parts[0])
        except ValueError:
            raise ValueError(f"{name}:{lineno}: class index {parts[0]!r} is not an integer") from None
        if idx < 0:
            raise ValueError(f"{name}:{lineno}: class index {idx} is negative")
        if idx in class_map:
            raise ValueError(f"{name}:{lineno}: duplicate class index {idx}")
        node = parts[1]
        if node in node_to_class:
            raise ValueError(f"{name}:{lineno}: node {node!r} mapped to multiple class indices")
        class_map[idx] = node
        node_to_class[node] = idx
        add_node(node)

    if not class_map:
        raise ValueError("class index file defines no classes")
    c = len(class_map)
    if sorted(class_map) != list(range(c)):
        missing = sorted(set(range(c)) - set(class_map))[:5]
        raise ValueError(f"class indices are not contiguous from 0: missing {missing}")

    children: dict[str, list[str]] = {n: [] for n in nodes}
    parents: dict[str, list[str]] = {n: [] for n in nodes}
    for parent, child in edge_list:
        children[parent].append(child)
        parents[child].append(parent)

    _check_acyclic(nodes, children)

    for idx in range(c):
        node = class_map[idx]
        if children[node]:
            raise ValueError(f"class {idx} maps to non-leaf node {node!r}")

    is_tree = all(len(p) <= 1 for p in parents.values())
    return Hierarchy(
        nodes=tuple(nodes),
        edges=tuple(edge_list),
        class_index=class_map,
        is_tree=is_tree,
        children=children,
        parents=parents,
        node_to_class=node_to_class,
    )


def _check_acyclic(nodes: list[str], children: dict[str, list[str]]) -> None:
    # Kahn's algorithm on the directed graph; leftovers are on a cycle.
    indeg = {n: 0 for n in nodes}
    for n in nodes:
        for ch in children[n]:
            indeg[ch] += 1
    queue = deque(n for n in nodes if indeg[n] == 0)
    seen = 0
    while queue:
        n = queue.popleft()
        seen += 1
        for ch in children[n]:
            indeg[ch] -= 1
            if indeg[ch] == 0:
                queue.append(ch)
    if seen != len(nodes):
        stuck = sorted(n for n in nodes if indeg[n] > 0)
        raise ValueError(f"cycle detected involving node {stuck[0]!r}")


def graph_distance_matrix(h: Hierarchy, classes: Iterable[int] | None = None) -> DistanceMatrix:
    """Shortest-path hop counts between class leaves, edges taken as undirected.

    Defined on DAGs as well as trees.  Raises on a disconnected class pair,
    naming the pair.
    """
    if classes is None:
        classes = range(h.class_count)
    labels = [int(cc) for cc in classes]
    for cc in labels:
        if cc not in h.class_index:
            raise ValueError(f"class {cc} does not exist in the hierarchy")

    index = {n: i for i, n in enumerate(h.nodes)}
    nbrs: list[list[int]] = [[] for _ in h.nodes]
    for parent, child in h.edges:
        pi, ci = index[parent], index[child]
        nbrs[pi].append(ci)
        nbrs[ci].append(pi)

    class_pos = {index[h.class_index[cc]]: j for j, cc in enumerate(labels)}
    n = len(labels)
    values = np.zeros((n, n), dtype=np.float64)
    for i, cc in enumerate(labels):
        src = index[h.class_index[cc]]
        dist = np.full(len(h.nodes), -1, dtype=np.int64)
        dist[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in nbrs[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        for node_i, j in class_pos.items():
            if dist[node_i] < 0:
                raise ValueError(f"no path between class {cc} and class {labels[j]}")
            values[i, j] = dist[node_i]
    return DistanceMatrix(labels=labels, values=values)


def dfs_leaf_order(h: Hierarchy) -> list[int]:
    """Class indices in depth-first order, children visited in edge-file order.

    Sibling classes end up consecutive, which is what makes hierarchy-ordered
    confusion matrices block-diagonal.  Requires a tree.
    """
    if not h.is_tree:
        raise ValueError("dfs_leaf_order requires a tree (some node has two parents)")
    order: list[int] = []
    visited: set[str] = set()
    stack: list[str] = list(reversed(h.roots))
    while stack:
        node = stack.pop()
        if node in visited:
            continue
        visited.add(node)
        if node in h.node_to_class:
            order.append(h.node_to_class[node])
        stack.extend(reversed(h.children[node]))
    return order


def hypernym_of(h: Hierarchy, class_index: int, targets: Iterable[str]) -> str:
    """First node in ``targets`` on the walk from the class's leaf up to the root.

    The leaf itself counts (zero-step traversal).  Raises if no node on the
    path is in ``targets``.
    """
    if not h.is_tree:
        raise ValueError("hypernym_of requires a tree (some node has two parents)")
    class_index = int(class_index)
    if class_index not in h.class_index:
        raise ValueError(f"class {class_index} does not exist in the hierarchy")
    target_set = set(targets)
    node = h.class_index[class_index]
    leaf = node
    while True:
        if node in target_set:
            return node
        up = h.parents[node]
        if not up:
            raise ValueError(
                f"class {class_index} (leaf {leaf!r}): no matching ancestor in targets"
            )
        node = up[0]
