"""Tree pages and the in-memory node store.

Nodes live in memory; "disk" I/O is an accounting fiction layered on top
by the pager. Every node carries the metadata used by the proactive
variant (critical flag, child-state bitmap) and by the concurrency
wrapper (version word, per-node write latch); the classic variants
simply leave those fields untouched.
"""

from __future__ import annotations

import itertools
import threading

from .errors import TreeCorruptionError


class Node:
    """One tree page: a leaf holds keys+values, an internal node keys+children.

    ``child_bitmap`` bit i set means child i has been recorded as critical.
    ``level`` is the height above the leaf level (0 for leaves); it never
    changes over a node's lifetime and gives the lock ordering a stable
    top-down total order.
    """

    __slots__ = (
        "is_leaf",
        "keys",
        "values",
        "children",
        "critical",
        "child_bitmap",
        "version",
        "level",
        "lock",
    )

    def __init__(self, is_leaf: bool, level: int = 0):
        self.is_leaf = is_leaf
        self.keys: list[int] = []
        self.values: list = [] if is_leaf else None
        self.children: list[int] | None = None if is_leaf else []
        self.critical = False
        self.child_bitmap = 0
        self.version = 0
        self.level = level
        self.lock = threading.Lock()

    def copy(self) -> "Node":
        """Structural copy; version/lock state starts fresh."""
        dup = Node(self.is_leaf, self.level)
        dup.keys = list(self.keys)
        if self.is_leaf:
            dup.values = list(self.values)
        else:
            dup.children = list(self.children)
        dup.critical = self.critical
        dup.child_bitmap = self.child_bitmap
        return dup


class NodeStore:
    """Id-addressed node storage. Ids are never reused within a store."""

    def __init__(self):
        self.nodes: dict[int, Node] = {}
        self._ids = itertools.count()

    def add(self, node: Node) -> int:
        nid = next(self._ids)
        self.nodes[nid] = node
        return nid

    def get(self, node_id: int) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise TreeCorruptionError(f"unknown node id {node_id}") from None

    def __len__(self) -> int:
        return len(self.nodes)

    def copy(self) -> "NodeStore":
        dup = NodeStore()
        dup.nodes = {nid: node.copy() for nid, node in self.nodes.items()}
        dup._ids = itertools.count(max(self.nodes, default=-1) + 1)
        return dup
