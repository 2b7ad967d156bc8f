"""Fluctuation statistics and experiment summaries.

Percentiles use the nearest-rank method (no interpolation) so results
reproduce exactly. Fluctuation of one insert is total I/O minus the
cost floor of height + 1 reads-plus-one-write.
"""

from __future__ import annotations

import heapq
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .btree import BPlusTree, InsertReport
from .errors import InvariantViolationError


def fluctuation_of(report: InsertReport) -> int:
    """total - (height + 1); never negative for a correct cost model."""
    value = report.total - (report.height + 1)
    if value < 0:
        raise InvariantViolationError(
            f"negative fluctuation {value} (total={report.total}, height={report.height})"
        )
    return value


class HeightStats(NamedTuple):
    count: int
    min: int
    max: int
    p50: int
    p95: int


def _nearest_rank(sorted_values: Sequence[int], pct: int) -> int:
    n = len(sorted_values)
    rank = max(1, -(-pct * n // 100))  # ceil(pct/100 * n)
    return sorted_values[min(rank, n) - 1]


def per_height_stats(reports: Iterable[InsertReport]) -> dict[int, HeightStats]:
    """Min/max/P50/P95 of total I/O, grouped by tree height at insert."""
    groups: dict[int, list[int]] = {}
    for r in reports:
        groups.setdefault(r.height, []).append(r.total)
    out: dict[int, HeightStats] = {}
    for h, values in groups.items():
        values.sort()
        out[h] = HeightStats(
            len(values), values[0], values[-1],
            _nearest_rank(values, 50), _nearest_rank(values, 95),
        )
    return out


def stats_from_counts(counts: Counter) -> HeightStats:
    """Nearest-rank stats over a value -> occurrences counter."""
    n = sum(counts.values())
    items = sorted(counts.items())
    lo, hi = items[0][0], items[-1][0]
    r50 = max(1, -(-n * 50 // 100))
    r95 = max(1, -(-n * 95 // 100))
    p50 = p95 = None
    seen = 0
    for value, c in items:
        seen += c
        if p50 is None and seen >= r50:
            p50 = value
        if seen >= r95:
            p95 = value
            break
    return HeightStats(n, lo, hi, p50, p95)


def ccdf(values: Sequence) -> list[tuple[float, float]]:
    """P(X >= x) for each distinct x ascending; starts at probability 1."""
    if not values:
        return []
    counts = Counter(values)
    total = len(values)
    out = []
    remaining = total
    for x in sorted(counts):
        out.append((x, remaining / total))
        remaining -= counts[x]
    return out


def ccdf_from_counts(counts: Counter) -> list[tuple[float, float]]:
    total = sum(counts.values())
    out = []
    remaining = total
    for x in sorted(counts):
        out.append((x, remaining / total))
        remaining -= counts[x]
    return out


def top_k(values: Sequence, k: int) -> list[tuple[float, int]]:
    """The k largest observations as (value, index), ties to earlier index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    heap: list[tuple[float, int]] = []
    for i, v in enumerate(values):
        item = (v, -i)
        if len(heap) < k:
            heapq.heappush(heap, item)
        elif item > heap[0]:
            heapq.heapreplace(heap, item)
    return [(v, -ni) for v, ni in sorted(heap, reverse=True)]


def binned_max(values: Sequence, bins: int) -> list:
    """Maxima over ``bins`` contiguous equal-size windows of the stream."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    n = len(values)
    if n == 0:
        return []
    out = []
    width = -(-n // bins)
    for start in range(0, n, width):
        out.append(max(values[start:start + width]))
    return out


class WindowedRange(NamedTuple):
    ranges: list[float]
    mean: float


def windowed_range(values: Sequence, window: int) -> WindowedRange:
    """Per-window max - min over non-overlapping windows, plus the mean."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if not values:
        return WindowedRange([], 0.0)
    ranges = []
    for start in range(0, len(values), window):
        chunk = values[start:start + window]
        ranges.append(max(chunk) - min(chunk))
    return WindowedRange(ranges, sum(ranges) / len(ranges))


UTIL_BUCKETS = 10


@dataclass
class Utilization:
    """Occupancy histograms (10 buckets of 0.1) split by node kind."""

    leaf_histogram: list[int]
    internal_histogram: list[int]
    pct_below_50_leaf: float
    pct_below_50_internal: float
    leaf_nodes: int
    internal_nodes: int


def utilization(tree: BPlusTree) -> Utilization:
    cap = tree.capacity
    hists = {True: [0] * UTIL_BUCKETS, False: [0] * UTIL_BUCKETS}
    below = {True: 0, False: 0}
    totals = {True: 0, False: 0}
    for _, node in tree.utilization_walk():
        frac = len(node.keys) / cap
        bucket = min(UTIL_BUCKETS - 1, int(frac * UTIL_BUCKETS))
        hists[node.is_leaf][bucket] += 1
        totals[node.is_leaf] += 1
        if frac < 0.5:
            below[node.is_leaf] += 1
    pct = {
        kind: (100.0 * below[kind] / totals[kind] if totals[kind] else 0.0)
        for kind in (True, False)
    }
    return Utilization(
        leaf_histogram=hists[True],
        internal_histogram=hists[False],
        pct_below_50_leaf=pct[True],
        pct_below_50_internal=pct[False],
        leaf_nodes=totals[True],
        internal_nodes=totals[False],
    )


@dataclass
class StatsCollector:
    """Streaming accumulator for per-insert reports.

    Totals and fluctuations are small integers, so exact distributions
    fit in counters regardless of run length; top-k peaks keep their
    insert indices through a bounded heap.
    """

    bins: int
    expected_n: int
    topk: int = 10
    n: int = 0
    splits_max: int = 0
    fluct_max: int = 0
    floor_violations: int = 0
    per_height_totals: dict[int, Counter] = field(default_factory=dict)
    per_height_fluct_max: dict[int, int] = field(default_factory=dict)
    fluct_counts: Counter = field(default_factory=Counter)
    _heap: list = field(default_factory=list)
    _bin_max: list = field(default_factory=list)

    def add(self, report: InsertReport) -> None:
        i = self.n
        self.n += 1
        if report.splits > self.splits_max:
            self.splits_max = report.splits
        fluct = report.fluctuation
        if fluct > self.fluct_max:
            self.fluct_max = fluct
        if report.splits == 0 and report.total != report.height + 1:
            self.floor_violations += 1
        self.fluct_counts[fluct] += 1
        h = report.height
        group = self.per_height_totals.get(h)
        if group is None:
            group = self.per_height_totals[h] = Counter()
        group[report.total] += 1
        if fluct > self.per_height_fluct_max.get(h, -1):
            self.per_height_fluct_max[h] = fluct
        item = (report.total, -i)
        if len(self._heap) < self.topk:
            heapq.heappush(self._heap, item)
        elif item > self._heap[0]:
            heapq.heapreplace(self._heap, item)
        if self.bins:
            width = -(-max(self.expected_n, 1) // self.bins)
            b = i // width
            if b >= len(self._bin_max):
                self._bin_max.extend([0] * (b + 1 - len(self._bin_max)))
            if report.total > self._bin_max[b]:
                self._bin_max[b] = report.total

    @property
    def per_height(self) -> dict[int, HeightStats]:
        return {h: stats_from_counts(c) for h, c in sorted(self.per_height_totals.items())}

    @property
    def fluct_ccdf(self) -> list[tuple[float, float]]:
        return ccdf_from_counts(self.fluct_counts)

    @property
    def top_peaks(self) -> list[tuple[int, int]]:
        return [(v, -ni) for v, ni in sorted(self._heap, reverse=True)]

    @property
    def bin_maxima(self) -> list[int]:
        return list(self._bin_max)


@dataclass
class MetricsSummary:
    """Everything one experiment reports about one insert stream."""

    per_height: dict[int, HeightStats]
    fluct_ccdf: list[tuple[float, float]]
    top_peaks: list[tuple[int, int]]
    bin_maxima: list[int]
    util: Utilization
    splits_max: int
    fluct_max: int
    floor_violations: int
    n: int

    @classmethod
    def from_collector(cls, collector: StatsCollector, util: Utilization) -> "MetricsSummary":
        return cls(
            per_height=collector.per_height,
            fluct_ccdf=collector.fluct_ccdf,
            top_peaks=collector.top_peaks,
            bin_maxima=collector.bin_maxima,
            util=util,
            splits_max=collector.splits_max,
            fluct_max=collector.fluct_max,
            floor_violations=collector.floor_violations,
            n=collector.n,
        )
