"""One-split insertion with critical-node tracking ("ff" variant).

A full leaf is critical. An internal node is critical when its free
space exactly matches the number of children it has recorded as
critical: it can absorb one separator per such child and no more.
Splitting the bottommost critical node on the descent path, before the
leaf insert, keeps every ancestor with at least one free slot, so a
single insert never performs more than one split and the separator
insert never cascades.

State maintenance is path-local and exact. Every class change
originates at the leaf an insert lands in, so after the leaf insert a
bottom-up sweep along the descended path re-derives each node's flag
from its free space and recorded children, stopping at the first node
whose class did not change. Splits keep the books balanced by
construction: both halves come out safe, and the parent absorbing the
separator loses one free slot and one recorded critical child together,
which leaves its class untouched. Flags therefore always equal the
from-scratch classification, which is the precondition the one-split
guarantee rests on: a deferred flag scheme that lets the bitmap lag can
wedge a full parent above a node that must split.

Flag and bitmap updates are header metadata and are not charged as
write I/O (see pager module); structural changes are.
"""

from __future__ import annotations

import enum
from bisect import bisect_right

from .btree import BPlusTree, InsertReport
from .errors import InvariantViolationError
from .pager import Pager


class NodeClass(enum.Enum):
    SAFE_NON_CRITICAL = "safe"
    CRITICAL = "critical"
    UNSAFE = "unsafe"


class DescentContext:
    """State carried down one descent.

    ``last_critical`` is the bottommost node already flagged critical on
    the path; ``last_flag`` the bottommost node a pending insert would
    make critical, paired with the parent whose bitmap must record it.
    Later assignments overwrite earlier ones (bottommost wins).
    """

    __slots__ = ("last_critical", "last_flag")

    def __init__(self):
        self.last_critical: tuple[int, int | None] | None = None
        self.last_flag: tuple[int, int | None] | None = None


def examine_node(tree: BPlusTree, node_id: int, parent_id: int | None,
                 ctx: DescentContext) -> DescentContext:
    """Probe whether one more insert below ``node_id`` makes it critical.

    Only meaningful for nodes not already flagged. A leaf qualifies when
    one more insert fills it (free space <= 1); an internal node when
    its free space no longer exceeds the number of critical children it
    has recorded, in which case it is also a split candidate.
    """
    node = tree.store.get(node_id)
    free = tree.capacity - len(node.keys)
    if node.is_leaf:
        if free <= 1:
            ctx.last_flag = (node_id, parent_id)
    elif free <= node.child_bitmap.bit_count():
        ctx.last_critical = (node_id, parent_id)
        ctx.last_flag = (node_id, parent_id)
    return ctx


def ff_mutate(tree: BPlusTree, pager: Pager, key: int, payload) -> tuple[int, list[int]]:
    """One-split insert; returns (splits, metadata-touched node ids)."""
    path: list[int] = []
    cur_id = tree.root_id
    while True:
        node = pager.fetch(cur_id)
        path.append(cur_id)
        if node.is_leaf:
            break
        cur_id = node.children[bisect_right(node.keys, key)]
    return ff_apply(tree, pager, key, payload, path)


def ff_apply(tree: BPlusTree, pager: Pager, key: int, payload,
             path: list[int]) -> tuple[int, list[int]]:
    """Split the bottommost flagged node on a recorded path, insert, resync.

    Factored out of ff_mutate so the concurrency wrapper can run it under
    its write latches without re-reading unlocked nodes.
    """
    cap = tree.capacity
    splits = 0
    crit_idx = -1
    for i, nid in enumerate(path):
        if pager.fetch(nid).critical:
            crit_idx = i
    leaf_id = path[-1]
    parents = {path[i]: path[i - 1] for i in range(1, len(path))}

    if crit_idx >= 0:
        splits += 1
        split_id = path[crit_idx]
        split_parent = path[crit_idx - 1] if crit_idx > 0 else None
        split_id, split_parent = _descend_to_splittable(tree, split_id, split_parent, pager)
        separator, right_id = proactive_split(tree, split_id, split_parent, pager)
        # repair below walks true parent links, so record the halves'
        # parent (the new root after a root split) and re-hang the path
        # node that may now sit under the new sibling
        effective_parent = split_parent if split_parent is not None else tree.root_id
        parents[split_id] = effective_parent
        parents[right_id] = effective_parent
        if split_id == leaf_id:
            if key >= separator:
                leaf_id = right_id
        else:
            try:
                j = path.index(split_id)
            except ValueError:
                j = len(path)  # off-path split; path links unaffected
            if j < len(path) - 1:
                below = path[j + 1]
                half = split_id if below in tree.store.get(split_id).children else right_id
                parents[below] = half

    leaf = pager.fetch(leaf_id)
    if len(leaf.keys) >= cap and key not in leaf.keys:
        raise InvariantViolationError(
            f"leaf {leaf_id} full at insert time; one-split guarantee broken"
        )
    tree.leaf_insert(leaf, leaf_id, key, payload, pager)
    touched = _sync_flags_upward(tree, leaf_id, parents)
    return splits, touched


def insert_ff(tree: BPlusTree, key: int, payload=None) -> InsertReport:
    pager = tree.pager
    pager.begin_op()
    height = tree.height
    splits, _ = ff_mutate(tree, pager, key, payload)
    io = pager.end_op()
    return InsertReport(io.reads, io.writes, io.total, splits, height, io.total - height - 1)


def _splittable(node) -> bool:
    # an internal split promotes its middle key, so both halves keep a
    # key only from 3 keys up; a leaf splits fine from 2
    return len(node.keys) >= (2 if node.is_leaf else 3)


def _descend_to_splittable(tree: BPlusTree, node_id: int, parent_id: int | None,
                           pager: Pager | None = None):
    """Walk recorded-critical children down to a node a split can act on.

    At capacities >= 6 the bottommost flagged path node is always
    splittable and this returns it unchanged; tiny fanouts can flag an
    internal node while it still has too few keys to partition, in which
    case one of its recorded children is split instead (same slack
    arithmetic, the flagged ancestor keeps its turn for a later pass).
    """
    pager = pager if pager is not None else tree.pager
    node = pager.fetch(node_id)
    while not _splittable(node):
        bitmap = node.child_bitmap
        if not bitmap:
            raise InvariantViolationError(
                f"node {node_id} critical and unsplittable with no recorded children"
            )
        parent_id = node_id
        node_id = node.children[(bitmap & -bitmap).bit_length() - 1]
        node = pager.fetch(node_id)
    return node_id, parent_id


def proactive_split(tree: BPlusTree, node_id: int, parent_id: int | None,
                    pager: Pager | None = None) -> tuple[int, int]:
    """Split a critical node and hand the separator to its parent.

    The parent is guaranteed a free slot when this fires; a full parent
    here means the bookkeeping invariant was already broken, so it
    raises instead of cascading. Clearing the old child's bitmap bit and
    the halves' flags keeps parent state consistent: free space and
    recorded critical children decrease together, so a critical parent
    stays critical and a safe one stays safe.
    """
    pager = pager if pager is not None else tree.pager
    left_id, right_id, separator = tree.split_node(node_id, pager)
    if parent_id is None:
        tree.grow_root(separator, left_id, right_id, pager)
    else:
        parent = pager.fetch(parent_id)
        if len(parent.keys) >= tree.capacity:
            raise InvariantViolationError(
                f"parent {parent_id} full when splitting critical node {node_id}"
            )
        parent.child_bitmap &= ~(1 << parent.children.index(node_id))
        tree.insert_child(parent, parent_id, left_id, separator, right_id, pager)
    return separator, right_id


def _sync_flags_upward(tree: BPlusTree, leaf_id: int, parents: dict[int, int]) -> list[int]:
    """Re-derive flags along the insert path, bottom-up, until stable.

    Metadata-only: never charges I/O. The loop ends at the first node
    whose class is unchanged, since nothing above it can have changed.
    Returns the ids whose header metadata changed.
    """
    store = tree.store.nodes
    cap = tree.capacity
    touched: list[int] = []
    cur_id = leaf_id
    node = store[leaf_id]
    flagged = len(node.keys) == cap
    while node.critical != flagged:
        node.critical = flagged
        touched.append(cur_id)
        parent_id = parents.get(cur_id)
        if parent_id is None:
            break
        parent = store[parent_id]
        i = parent.children.index(cur_id)
        if bool(parent.child_bitmap >> i & 1) == flagged:
            break
        parent.child_bitmap ^= 1 << i
        touched.append(parent_id)
        cur_id, node = parent_id, parent
        flagged = (cap - len(node.keys)) <= node.child_bitmap.bit_count()
    return touched


# -- from-scratch classification oracle (ignores stored flags) -----------


def classify_node(tree: BPlusTree, node_id: int) -> NodeClass:
    """Recompute a node's class from the definition, bottom-up."""
    node = tree.store.get(node_id)
    free = tree.capacity - len(node.keys)
    if node.is_leaf:
        return NodeClass.CRITICAL if free == 0 else NodeClass.SAFE_NON_CRITICAL
    pressured = sum(
        classify_node(tree, child) is not NodeClass.SAFE_NON_CRITICAL
        for child in node.children
    )
    if free < pressured:
        return NodeClass.UNSAFE
    if free == pressured:
        return NodeClass.CRITICAL
    return NodeClass.SAFE_NON_CRITICAL


def classify_all(tree: BPlusTree) -> dict[int, NodeClass]:
    """Class of every node in one post-order sweep."""
    classes: dict[int, NodeClass] = {}
    cap = tree.capacity

    def walk(nid: int) -> NodeClass:
        node = tree.store.get(nid)
        free = cap - len(node.keys)
        if node.is_leaf:
            cls = NodeClass.CRITICAL if free == 0 else NodeClass.SAFE_NON_CRITICAL
        else:
            pressured = sum(walk(c) is not NodeClass.SAFE_NON_CRITICAL for c in node.children)
            if free < pressured:
                cls = NodeClass.UNSAFE
            elif free == pressured:
                cls = NodeClass.CRITICAL
            else:
                cls = NodeClass.SAFE_NON_CRITICAL
        classes[nid] = cls
        return cls

    walk(tree.root_id)
    return classes


def verify_no_unsafe(tree: BPlusTree) -> tuple[bool, list[int]]:
    """True iff no internal node classifies as unsafe."""
    offenders = [
        nid
        for nid, cls in classify_all(tree).items()
        if cls is NodeClass.UNSAFE and not tree.store.get(nid).is_leaf
    ]
    return not offenders, offenders


def verify_flag_consistency(tree: BPlusTree) -> tuple[bool, list[str]]:
    """Check stored flags and bitmaps against the from-scratch oracle.

    A stored flag must mean the node still classifies critical (splits
    clear flags immediately), a set bitmap bit must point at a flagged
    child, and a flagged child must be recorded in its parent's bitmap.
    A node may be critical by the oracle without carrying the flag yet;
    that direction is not required.
    """
    problems: list[str] = []
    classes = classify_all(tree)
    for nid, cls in classes.items():
        node = tree.store.get(nid)
        if node.critical and cls is not NodeClass.CRITICAL:
            problems.append(f"node {nid}: flagged but classifies {cls.value}")
        if not node.is_leaf:
            if node.critical and tree.capacity - len(node.keys) != node.child_bitmap.bit_count():
                problems.append(f"node {nid}: flagged with free space != recorded children")
            for i, child_id in enumerate(node.children):
                child_flagged = tree.store.get(child_id).critical
                bit = bool(node.child_bitmap >> i & 1)
                if bit and not child_flagged:
                    problems.append(f"node {nid}: bit {i} set but child {child_id} unflagged")
                if child_flagged and not bit:
                    problems.append(f"node {nid}: child {child_id} flagged but bit {i} clear")
    return not problems, problems
