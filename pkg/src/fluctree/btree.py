"""Shared B+-tree machinery used by all three insertion variants.

Keys are unsigned integers ordered by value; payloads are opaque.
Routing convention: a key equal to a separator goes right, matching the
leaf-split convention that the separator is the first key of the right
sibling. Leaf splits copy the separator up; internal splits push the
middle key up.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .errors import ConfigError, TreeCorruptionError
from .nodes import Node, NodeStore
from .pager import IoReport, Pager

VARIANTS = ("baseline", "clrs", "ff")


@dataclass(frozen=True)
class TreeConfig:
    """Capacity is the max key count per node; must leave room for a split."""

    capacity: int = 8
    variant: str = "baseline"

    def __post_init__(self):
        if self.capacity < 3:
            raise ConfigError(f"capacity must be >= 3, got {self.capacity}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")


class InsertReport(NamedTuple):
    """Per-insert observation. Height is measured at insert start, so
    fluctuation = total - (height + 1) is well defined across root splits."""

    reads: int
    writes: int
    total: int
    splits: int
    height: int
    fluctuation: int


def find_next_node(node: Node, key: int) -> int:
    """Child id to descend into: children[#keys <= key] (ties go right)."""
    return node.children[bisect_right(node.keys, key)]


class BPlusTree:
    """A B+-tree whose insert algorithm is selected by ``config.variant``."""

    def __init__(self, config: TreeConfig, store: NodeStore | None = None):
        self.config = config
        self.capacity = config.capacity
        self.store = store if store is not None else NodeStore()
        self.pager = Pager(self.store)
        root = Node(is_leaf=True, level=0)
        self.root_id = self.store.add(root)
        self.height = 1
        self.count = 0
        # (left_id, right_id, separator) of the most recent split, for tests
        self.last_split: Optional[tuple[int, int, int]] = None
        self._insert = _resolve_insert(config.variant)

    # -- public interface -------------------------------------------------

    def insert(self, key: int, payload=None) -> InsertReport:
        return self._insert(self, key, payload)

    def lookup(self, key: int):
        """Payload stored for key, or None. Charges exactly height reads."""
        payload, _ = self.lookup_report(key)
        return payload

    def lookup_report(self, key: int) -> tuple[object, IoReport]:
        pager = self.pager
        pager.begin_op()
        node = pager.fetch(self.root_id)
        while not node.is_leaf:
            node = pager.fetch(find_next_node(node, key))
        io = pager.end_op()
        i = bisect_left(node.keys, key)
        if i < len(node.keys) and node.keys[i] == key:
            return node.values[i], io
        return None, io

    def scan_all(self) -> list[int]:
        """All keys by in-order leaf traversal; strictly ascending."""
        out: list[int] = []

        def walk(nid: int):
            node = self.store.get(nid)
            if node.is_leaf:
                out.extend(node.keys)
            else:
                for child in node.children:
                    walk(child)

        walk(self.root_id)
        return out

    def check_structure(self) -> list[str]:
        """Structural diagnostics; empty list means the tree is sound.

        Verifies uniform leaf depth, strict key order within nodes,
        separator consistency across levels, occupancy bounds, the
        child-count invariant, and bitmap width.
        """
        problems: list[str] = []
        leaf_levels: set[int] = set()
        cap = self.capacity

        def walk(nid: int, depth: int, lo, hi):
            node = self.store.get(nid)
            keys = node.keys
            if any(keys[i] >= keys[i + 1] for i in range(len(keys) - 1)):
                problems.append(f"node {nid}: keys not strictly ascending")
            if len(keys) > cap:
                problems.append(f"node {nid}: occupancy {len(keys)} exceeds capacity {cap}")
            if nid != self.root_id and not keys:
                problems.append(f"node {nid}: non-root node is empty")
            if keys:
                if lo is not None and keys[0] < lo:
                    problems.append(f"node {nid}: key {keys[0]} below separator bound {lo}")
                if hi is not None and keys[-1] >= hi:
                    problems.append(f"node {nid}: key {keys[-1]} at/above separator bound {hi}")
            if node.is_leaf:
                leaf_levels.add(depth)
                if len(node.values) != len(keys):
                    problems.append(f"node {nid}: {len(node.values)} values for {len(keys)} keys")
            else:
                if len(node.children) != len(keys) + 1:
                    problems.append(
                        f"node {nid}: {len(node.children)} children for {len(keys)} keys"
                    )
                if node.child_bitmap >> len(node.children):
                    problems.append(f"node {nid}: bitmap wider than child list")
                for i, child in enumerate(node.children):
                    clo = keys[i - 1] if i > 0 else lo
                    chi = keys[i] if i < len(keys) else hi
                    walk(child, depth + 1, clo, chi)

        walk(self.root_id, 1, None, None)
        if len(leaf_levels) > 1:
            problems.append(f"leaves at multiple depths: {sorted(leaf_levels)}")
        return problems

    def utilization_walk(self):
        """Yield (node_id, node) for every node reachable from the root."""
        stack = [self.root_id]
        while stack:
            nid = stack.pop()
            node = self.store.get(nid)
            yield nid, node
            if not node.is_leaf:
                stack.extend(node.children)

    def copy(self) -> "BPlusTree":
        """Independent structural clone (used by the adaptive workload)."""
        dup = BPlusTree.__new__(BPlusTree)
        dup.config = self.config
        dup.capacity = self.capacity
        dup.store = self.store.copy()
        dup.pager = Pager(dup.store)
        dup.root_id = self.root_id
        dup.height = self.height
        dup.count = self.count
        dup.last_split = None
        dup._insert = self._insert
        return dup

    # -- shared mutation primitives (call within a pager operation) -------

    def split_node(self, node_id: int, pager: Pager | None = None) -> tuple[int, int, int]:
        """Split one node in half: returns (left_id, right_id, separator).

        The left half keeps the original id. Leaf split: the right half
        receives the upper ceil(n/2) entries and the separator is its
        first key (to be duplicated into the parent by the caller).
        Internal split: the middle key is promoted, children and bitmap
        bits partition positionally. Both halves are dirtied and their
        critical flags cleared; wiring the separator into the parent is
        the caller's job.
        """
        pager = pager if pager is not None else self.pager
        node = pager.fetch(node_id)
        keys = node.keys
        if len(keys) < 2:
            raise TreeCorruptionError(f"cannot split node {node_id} with {len(keys)} keys")
        mid = len(keys) // 2
        if node.is_leaf:
            right_id, right = pager.allocate(True, 0)
            right.keys = keys[mid:]
            right.values = node.values[mid:]
            separator = right.keys[0]
            del node.keys[mid:]
            del node.values[mid:]
        else:
            right_id, right = pager.allocate(False, node.level)
            separator = keys[mid]
            right.keys = keys[mid + 1 :]
            right.children = node.children[mid + 1 :]
            right.child_bitmap = node.child_bitmap >> (mid + 1)
            node.child_bitmap &= (1 << (mid + 1)) - 1
            del node.keys[mid:]
            del node.children[mid + 1 :]
        node.critical = False
        right.critical = False
        pager.mark_dirty(node_id)
        self.last_split = (node_id, right_id, separator)
        return node_id, right_id, separator

    def insert_child(self, parent: Node, parent_id: int, old_child_id: int,
                     separator: int, new_child_id: int,
                     pager: Pager | None = None) -> None:
        """Wire a freshly split right sibling into its parent.

        Bitmap bits at/after the insertion position shift right so state
        stays attached to the same children; the new sibling starts clear.
        """
        i = parent.children.index(old_child_id)
        bm = parent.child_bitmap
        low = bm & ((1 << (i + 1)) - 1)
        parent.child_bitmap = low | ((bm >> (i + 1)) << (i + 2))
        parent.keys.insert(i, separator)
        parent.children.insert(i + 1, new_child_id)
        (pager if pager is not None else self.pager).mark_dirty(parent_id)

    def grow_root(self, separator: int, left_id: int, right_id: int,
                  pager: Pager | None = None) -> int:
        """Install a new root with one separator over the two halves."""
        pager = pager if pager is not None else self.pager
        old_level = self.store.get(left_id).level
        new_root_id, new_root = pager.allocate(False, old_level + 1)
        new_root.keys = [separator]
        new_root.children = [left_id, right_id]
        self.root_id = new_root_id
        self.height += 1
        return new_root_id

    def leaf_insert(self, leaf: Node, leaf_id: int, key: int, payload,
                    pager: Pager | None = None) -> bool:
        """Put (key, payload) into a leaf; duplicate keys overwrite.

        Returns True if a new key was added.
        """
        keys = leaf.keys
        i = bisect_left(keys, key)
        if i < len(keys) and keys[i] == key:
            leaf.values[i] = payload
            added = False
        else:
            keys.insert(i, key)
            leaf.values.insert(i, payload)
            self.count += 1
            added = True
        (pager if pager is not None else self.pager).mark_dirty(leaf_id)
        return added


def _resolve_insert(variant: str):
    from . import proactive, variants

    return {
        "baseline": variants.insert_baseline,
        "clrs": variants.insert_clrs,
        "ff": proactive.insert_ff,
    }[variant]
