"""Optimistic lock coupling for concurrent inserts.

Each insert runs as an optimistic read phase followed by a locked write
phase. The read phase descends without locks, recording a version
snapshot of every visited node; a version that moves underneath it, or
a torn read from a concurrent writer, aborts the attempt. From the
snapshot the write phase computes the affected node set (the leaf, the
split node and the parent absorbing its separator, and the flag/bitmap
resync chain for the one-split variant), takes those write latches in a
fixed global order (top-down by distance-from-leaf, ties by node id, a
total order that never changes as the tree grows), revalidates every
recorded version, and replays the same mutation code the sequential
variants use against the recorded path only, never re-reading unlocked
nodes. Mutated nodes hold odd versions for the duration so optimistic
readers cannot act on a torn snapshot; versions of planned-but-untouched
nodes are restored. Any validation failure converts into a restart of
the whole operation; nothing blocks indefinitely.

Latency is modeled, not measured: a configured read cost is charged on
the first access of each node per attempt (so restarts pay for their
re-traversal) and a write cost per dirty page flushed at commit. That
keeps the numbers device-independent and makes split and restart
activity directly visible.
"""

from __future__ import annotations

import threading
from bisect import bisect_right
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .btree import BPlusTree, TreeConfig
from .errors import ConfigError, InvariantViolationError
from .metrics import windowed_range
from .pager import Pager
from .proactive import ff_apply
from .variants import clrs_apply

OLC_VARIANTS = ("clrs", "ff")
MAX_ATTEMPTS = 100_000


@dataclass(frozen=True)
class LatencyConfig:
    """Synthetic I/O costs, in abstract time units."""

    read_latency: float = 1.0
    write_latency: float = 2.0

    def __post_init__(self):
        if self.read_latency < 0 or self.write_latency < 0:
            raise ConfigError("latencies must be non-negative")


class OpSample(NamedTuple):
    latency: float
    restarts: int
    splits: int


class _Snap(NamedTuple):
    node_id: int
    version: int
    keys_len: int
    flagged: bool
    popcount: int
    is_leaf: bool


class _Abort(Exception):
    """Attempt-local: optimistic assumptions failed, restart the op."""


class OlcIndex:
    """A shared tree plus the two-phase insert protocol over it."""

    def __init__(self, variant: str, capacity: int = 8,
                 latency: LatencyConfig | None = None):
        if variant not in OLC_VARIANTS:
            raise ConfigError(f"concurrent insert supports {OLC_VARIANTS}, got {variant!r}")
        if capacity < 6:
            # smaller fanouts can force the one-split variant off its
            # descended path, which path-set locking does not cover
            raise ConfigError("concurrent operation requires capacity >= 6")
        self.tree = BPlusTree(TreeConfig(capacity, variant))
        self.variant = variant
        self.latency = latency if latency is not None else LatencyConfig()

    def insert(self, key: int, payload=None) -> OpSample:
        read_lat = self.latency.read_latency
        write_lat = self.latency.write_latency
        latency = 0.0
        restarts = 0
        for _ in range(MAX_ATTEMPTS):
            pager = Pager(self.tree.store)
            pager.begin_op()
            try:
                snaps = self._optimistic_descent(pager, key)
                splits = self._locked_commit(pager, snaps, key, payload)
            except _Abort:
                io = pager.end_op()
                latency += io.reads * read_lat
                restarts += 1
                continue
            io = pager.end_op()
            latency += io.reads * read_lat + io.writes * write_lat
            return OpSample(latency, restarts, splits)
        raise InvariantViolationError(f"insert of {key} live-locked after {MAX_ATTEMPTS} attempts")

    def _optimistic_descent(self, pager: Pager, key: int) -> list[_Snap]:
        path: list[_Snap] = []
        cur_id = self.tree.root_id
        while True:
            try:
                node = pager.fetch(cur_id)
                version = node.version
                spins = 0
                while version & 1:  # writer mid-mutation: wait it out
                    spins += 1
                    if spins > 1_000_000:
                        raise _Abort()
                    version = node.version
                keys_len = len(node.keys)
                flagged = node.critical
                if node.is_leaf:
                    if node.version != version:
                        raise _Abort()
                    path.append(_Snap(cur_id, version, keys_len, flagged, 0, True))
                    return path
                popcount = node.child_bitmap.bit_count()
                next_id = node.children[bisect_right(node.keys, key)]
                if node.version != version:
                    raise _Abort()
                path.append(_Snap(cur_id, version, keys_len, flagged, popcount, False))
                cur_id = next_id
            except (IndexError, KeyError):
                raise _Abort() from None

    def _plan_affected(self, snaps: list[_Snap], key: int) -> set[int]:
        """Node ids the write phase may mutate, derived from the snapshot.

        Mirrors the sequential mutation: for the top-down variant every
        full path node splits into its predecessor; for the one-split
        variant the bottommost flagged node splits into its parent and
        the flag resync chain climbs while classes flip.
        """
        cap = self.tree.capacity
        last = len(snaps) - 1
        affected = {snaps[last].node_id}
        if self.variant == "clrs":
            for i, snap in enumerate(snaps):
                if snap.keys_len == cap:
                    affected.add(snap.node_id)
                    if i > 0:
                        affected.add(snaps[i - 1].node_id)
            return affected

        crit_idx = max((i for i, s in enumerate(snaps) if s.flagged), default=-1)
        if crit_idx >= 0:
            affected.add(snaps[crit_idx].node_id)
            if crit_idx > 0:
                affected.add(snaps[crit_idx - 1].node_id)
        # flag resync chain: only when the leaf fills without splitting
        if crit_idx != last and snaps[last].keys_len + 1 == cap:
            i = last - 1
            while i >= 0:
                snap = snaps[i]
                affected.add(snap.node_id)  # bitmap bit write at least
                if i == crit_idx:
                    break  # bit lands in a freshly split half with slack
                free = cap - snap.keys_len
                pc = snap.popcount
                if crit_idx >= 0 and i == crit_idx - 1:
                    free -= 1  # will have absorbed the separator
                    pc -= 1
                if (free <= pc + 1) == snap.flagged:
                    break
                i -= 1
        return affected

    def _locked_commit(self, pager: Pager, snaps: list[_Snap], key: int, payload) -> int:
        tree = self.tree
        nodes = tree.store.nodes
        affected = self._plan_affected(snaps, key)
        # total order: top-down by height-above-leaf, then id
        ordered = sorted(affected, key=lambda n: (-nodes[n].level, n))
        locked: list[int] = []
        try:
            for nid in ordered:
                nodes[nid].lock.acquire()
                locked.append(nid)
            if tree.root_id != snaps[0].node_id:
                raise _Abort()
            for snap in snaps:
                if nodes[snap.node_id].version != snap.version:
                    raise _Abort()

            for nid in ordered:  # odd: mutation in progress
                nodes[nid].version += 1
            mutated: set[int] = set()
            try:
                path_ids = [s.node_id for s in snaps]
                if self.variant == "ff":
                    splits, meta_touched = ff_apply(tree, pager, key, payload, path_ids)
                    mutated.update(meta_touched)
                else:
                    splits = clrs_apply(tree, pager, key, payload, path_ids)
                mutated.update(pager.buf.dirty)
            finally:
                for nid in ordered:
                    nodes[nid].version += 1 if nid in mutated else -1
            stray = mutated - affected - pager.buf.new
            if stray:
                raise InvariantViolationError(f"mutation escaped the locked set: {sorted(stray)}")
            if self.variant == "ff" and splits > 1:
                raise InvariantViolationError(f"{splits} splits in one committed insert")
            return splits
        finally:
            for nid in reversed(locked):
                nodes[nid].lock.release()


@dataclass
class ConcurrentReport:
    """Merged per-op observations plus the aggregates the sweep reports."""

    variant: str
    actors: int
    ops: int
    latencies: np.ndarray
    restarts: np.ndarray
    splits_max: int
    mean_latency: float
    mean_windowed_range: float
    mean_restarts: float
    window: int


@dataclass
class ConcurrentRunResult:
    report: ConcurrentReport
    index: OlcIndex
    expected_keys: list[int]

    def lost_keys(self) -> int:
        present = self.index.tree.scan_all()
        return len(set(self.expected_keys)) - len(present)

    def structure_violations(self) -> list[str]:
        return self.index.tree.check_structure()


def run_concurrent(variant: str, keys: list[int], actors: int,
                   latency: LatencyConfig | None = None, capacity: int = 8,
                   window: int = 100_000) -> ConcurrentRunResult:
    """Insert a pre-generated key stream from ``actors`` threads.

    The stream is partitioned round-robin; actor-local samples are
    concatenated in actor order after quiescence, so the report is
    stable given the same per-op outcomes.
    """
    if actors < 1:
        raise ConfigError("actors must be >= 1")
    index = OlcIndex(variant, capacity, latency)
    partitions = [keys[i::actors] for i in range(actors)]
    samples: list[list[OpSample]] = [[] for _ in range(actors)]
    failures: list[BaseException] = []

    def actor(i: int):
        mine = samples[i]
        try:
            for k in partitions[i]:
                mine.append(index.insert(k, k))
        except BaseException as exc:  # surfaced after join
            failures.append(exc)

    threads = [threading.Thread(target=actor, args=(i,)) for i in range(actors)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if failures:
        raise failures[0]

    flat = [s for part in samples for s in part]
    if len(flat) != len(keys):
        raise InvariantViolationError(f"completed {len(flat)} of {len(keys)} issued ops")
    latencies = np.array([s.latency for s in flat], dtype=np.float64)
    restarts = np.array([s.restarts for s in flat], dtype=np.int64)
    splits_max = max((s.splits for s in flat), default=0)
    wr = windowed_range(latencies.tolist(), window) if len(flat) else None
    report = ConcurrentReport(
        variant=variant,
        actors=actors,
        ops=len(flat),
        latencies=latencies,
        restarts=restarts,
        splits_max=splits_max,
        mean_latency=float(latencies.mean()) if len(flat) else 0.0,
        mean_windowed_range=wr.mean if wr else 0.0,
        mean_restarts=float(restarts.mean()) if len(flat) else 0.0,
        window=window,
    )
    return ConcurrentRunResult(report, index, keys)


def olc_insert(index: OlcIndex, key: int, payload=None) -> OpSample:
    """Single concurrent insert; thin alias for OlcIndex.insert."""
    return index.insert(key, payload)
