"""The two comparison insertion algorithms.

``insert_baseline`` is the textbook bottom-up B+-tree insert: the leaf
overflows, splits, and the separator insert may cascade upward level by
level, possibly all the way to the root.

``insert_clrs`` splits top-down instead: every full node met during the
descent (including the root) is split before descending into the
matching half, so the leaf insert itself never propagates upward.
Note the preemptive rule splits a full node even when this particular
insert would not have overflowed it.

The ``*_mutate`` cores run against an explicit pager so the concurrency
wrapper can execute them inside its own locked write phase.
"""

from __future__ import annotations

from bisect import bisect_right

from .btree import BPlusTree, InsertReport
from .pager import Pager


def baseline_mutate(tree: BPlusTree, pager: Pager, key: int, payload) -> int:
    """Bottom-up insert; returns the number of splits performed."""
    splits = 0
    cap = tree.capacity

    path: list[int] = []
    cur_id = tree.root_id
    node = pager.fetch(cur_id)
    while not node.is_leaf:
        path.append(cur_id)
        cur_id = node.children[bisect_right(node.keys, key)]
        node = pager.fetch(cur_id)

    added = tree.leaf_insert(node, cur_id, key, payload, pager)

    # overflow cascade: split the over-full node, push the separator into
    # its parent, repeat while the parent overflows in turn
    child_id = cur_id
    if added:
        while len(pager.fetch(child_id).keys) > cap:
            splits += 1
            left_id, right_id, separator = tree.split_node(child_id, pager)
            if path:
                parent_id = path.pop()
                parent = pager.fetch(parent_id)
                tree.insert_child(parent, parent_id, left_id, separator, right_id, pager)
                child_id = parent_id
            else:
                tree.grow_root(separator, left_id, right_id, pager)
                break
    return splits


def descend_path(tree: BPlusTree, pager: Pager, key: int) -> list[int]:
    """Plain root-to-leaf routing; node ids in descent order."""
    path: list[int] = []
    cur_id = tree.root_id
    while True:
        node = pager.fetch(cur_id)
        path.append(cur_id)
        if node.is_leaf:
            return path
        cur_id = node.children[bisect_right(node.keys, key)]


def clrs_apply(tree: BPlusTree, pager: Pager, key: int, payload, path: list[int]) -> int:
    """Split every full node along a recorded path, top-down, then insert.

    Splitting before descending means the key re-routes between the two
    halves at each level, which is exactly what splitting-on-visit does;
    recording the path first lets the concurrency wrapper run this under
    its locks without re-reading unlocked nodes.
    """
    splits = 0
    cap = tree.capacity
    parent_half = None
    last = len(path) - 1
    for idx, nid in enumerate(path):
        node = pager.fetch(nid)
        half_id, half = nid, node
        if len(node.keys) == cap:
            splits += 1
            left_id, right_id, separator = tree.split_node(nid, pager)
            if parent_half is None:
                tree.grow_root(separator, left_id, right_id, pager)
            else:
                parent = pager.fetch(parent_half)
                tree.insert_child(parent, parent_half, left_id, separator, right_id, pager)
            half_id = left_id if key < separator else right_id
            half = pager.fetch(half_id)
        if idx == last:
            tree.leaf_insert(half, half_id, key, payload, pager)
        else:
            parent_half = half_id
    return splits


def clrs_mutate(tree: BPlusTree, pager: Pager, key: int, payload) -> int:
    """Top-down preemptive insert; returns the number of splits."""
    return clrs_apply(tree, pager, key, payload, descend_path(tree, pager, key))


def insert_baseline(tree: BPlusTree, key: int, payload=None) -> InsertReport:
    pager = tree.pager
    pager.begin_op()
    height = tree.height
    splits = baseline_mutate(tree, pager, key, payload)
    io = pager.end_op()
    return InsertReport(io.reads, io.writes, io.total, splits, height, io.total - height - 1)


def insert_clrs(tree: BPlusTree, key: int, payload=None) -> InsertReport:
    pager = tree.pager
    pager.begin_op()
    height = tree.height
    splits = clrs_mutate(tree, pager, key, payload)
    io = pager.end_op()
    return InsertReport(io.reads, io.writes, io.total, splits, height, io.total - height - 1)
