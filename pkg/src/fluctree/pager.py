"""I/O accounting for tree operations.

The cost model: each operation starts with an empty buffer; the first
fetch of a node costs one read and pins it for the rest of the
operation; nodes dirtied by the operation are flushed when it ends,
one write each. Repeated fetches of a resident node are free.

Metadata-only header updates (critical flag, child-state bitmap) are
deliberately not charged: callers performing such updates simply do not
mark the page dirty, so the write count reflects structural changes
only. That keeps split behavior the sole source of I/O variance.
"""

from __future__ import annotations

from typing import NamedTuple

from .errors import PagerProtocolError
from .nodes import Node, NodeStore


class IoReport(NamedTuple):
    """Read/write totals charged to one completed operation."""

    reads: int
    writes: int
    total: int


class OpBuffer:
    """Per-operation buffer: resident set, dirty subset, read counter.

    ``new`` tracks pages allocated by this operation (always dirty).
    """

    __slots__ = ("resident", "dirty", "new", "reads")

    def __init__(self):
        self.resident: set[int] = set()
        self.dirty: set[int] = set()
        self.new: set[int] = set()
        self.reads = 0

    def clear(self):
        self.resident.clear()
        self.dirty.clear()
        self.new.clear()
        self.reads = 0


class Pager:
    """Single-operation-at-a-time accounting handle over a node store.

    The concurrency wrapper does not share one of these; each in-flight
    actor operation owns its own OpBuffer over the shared store.
    """

    def __init__(self, store: NodeStore | None = None):
        self.store = store if store is not None else NodeStore()
        self.buf = OpBuffer()
        self._in_op = False

    def begin_op(self) -> OpBuffer:
        if self._in_op:
            raise PagerProtocolError("begin_op while an operation is in flight")
        self._in_op = True
        self.buf.clear()
        return self.buf

    def fetch(self, node_id: int) -> Node:
        if not self._in_op:
            raise PagerProtocolError("fetch outside an operation")
        buf = self.buf
        if node_id not in buf.resident:
            buf.resident.add(node_id)
            buf.reads += 1
        return self.store.get(node_id)

    def mark_dirty(self, node_id: int) -> None:
        if not self._in_op:
            raise PagerProtocolError("mark_dirty outside an operation")
        if node_id not in self.buf.resident:
            raise PagerProtocolError(f"dirtying non-resident node {node_id}")
        self.buf.dirty.add(node_id)

    def allocate(self, is_leaf: bool, level: int = 0) -> tuple[int, Node]:
        """New page, immediately resident and dirty (a fresh page always flushes)."""
        if not self._in_op:
            raise PagerProtocolError("allocate outside an operation")
        node = Node(is_leaf, level)
        nid = self.store.add(node)
        self.buf.resident.add(nid)
        self.buf.dirty.add(nid)
        self.buf.new.add(nid)
        return nid, node

    def end_op(self) -> IoReport:
        if not self._in_op:
            raise PagerProtocolError("end_op without begin_op")
        self._in_op = False
        buf = self.buf
        reads = buf.reads
        writes = len(buf.dirty)
        return IoReport(reads, writes, reads + writes)
