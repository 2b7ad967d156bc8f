"""Deterministic key-sequence generators for the four workload families.

All generators emit unique keys and replay bit-identically for the same
spec. The adaptive adversary additionally records the exact stream it
produced so the other tree variants can be fed identical input.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .btree import BPlusTree, TreeConfig
from .errors import ConfigError, KeyFileFormatError, KeySpaceExhaustedError

DEFAULT_KEY_SPACE = 1 << 40

FAMILIES = ("sequential", "uniform", "zipfian", "clrs_adversary")


@dataclass(frozen=True)
class WorkloadSpec:
    """Declarative description of a key sequence."""

    family: str
    n: int
    seed: int = 1
    direction: str = "asc"
    theta: float = 0.99
    key_space: int = DEFAULT_KEY_SPACE

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown workload family {self.family!r}")
        if self.n < 0:
            raise ConfigError("n must be non-negative")
        if self.direction not in ("asc", "desc"):
            raise ConfigError(f"direction must be asc or desc, got {self.direction!r}")


def generate_keys(spec: WorkloadSpec, capacity: int = 8) -> list[int]:
    """Materialize the key stream for a spec.

    ``capacity`` is only consulted by the adaptive adversary, whose
    shadow tree must match the capacity of the tree under test.
    """
    if spec.family == "sequential":
        return gen_sequential(spec.n, spec.direction)
    if spec.family == "uniform":
        return gen_uniform(spec.n, spec.seed, spec.key_space)
    if spec.family == "zipfian":
        return gen_zipfian(spec.n, spec.seed, spec.theta, spec.key_space)
    return gen_clrs_adversary(spec.n, capacity, spec.key_space)


def gen_sequential(n: int, direction: str = "asc") -> list[int]:
    """0..n-1 ascending, or the same keys reversed."""
    keys = list(range(n))
    if direction == "desc":
        keys.reverse()
    return keys


def gen_uniform(n: int, seed: int, key_space: int = DEFAULT_KEY_SPACE) -> list[int]:
    """n unique keys drawn uniformly from [0, key_space)."""
    if key_space < n:
        raise ConfigError(f"key_space {key_space} smaller than n {n}")
    import random

    return random.Random(seed).sample(range(key_space), n)


def gen_zipfian(n: int, seed: int, theta: float = 0.99,
                key_space: int = DEFAULT_KEY_SPACE) -> list[int]:
    """Skewed unique keys: Zipf-ranked hot regions, sequential inside.

    The key space is carved into up to 2**20 equal regions. Each draw
    picks a region with probability proportional to 1/rank**theta (rank
    scrambled to a region index so hot regions scatter), then takes the
    region's next unused key. A region that fills spills to the next
    one, so uniqueness never fails while n <= key_space.
    """
    if not 0 < theta < 2:
        raise ConfigError(f"theta must be in (0, 2), got {theta}")
    if key_space < n:
        raise ConfigError(f"key_space {key_space} smaller than n {n}")
    if n == 0:
        return []
    region_bits = min(20, max(0, key_space.bit_length() - 1))
    regions = 1 << region_bits
    width = key_space // regions

    rng = np.random.default_rng(seed)
    weights = 1.0 / np.power(np.arange(1, regions + 1, dtype=np.float64), theta)
    cum = np.cumsum(weights)
    ranks = np.searchsorted(cum, rng.random(n) * cum[-1], side="right")

    # odd multiplier mod power of two is a bijection: scatters hot ranks
    mult = int(rng.integers(0, regions)) * 2 + 1
    offset = int(rng.integers(0, regions))
    mask = regions - 1

    used: dict[int, int] = {}
    out: list[int] = []
    for rank in ranks:
        region = (int(rank) * mult + offset) & mask
        while used.get(region, 0) >= width:
            region = (region + 1) & mask
        c = used.get(region, 0)
        used[region] = c + 1
        out.append(region * width + c)
    return out


# -- adaptive adversary ---------------------------------------------------


def gen_clrs_adversary(n: int, capacity: int,
                       key_space: int = DEFAULT_KEY_SPACE) -> list[int]:
    """Key stream that drives a top-down preemptive tree to its worst case.

    The generator maintains a shadow tree inserted with the top-down
    algorithm and works in trap cycles: fill a target leaf to capacity,
    then fill each of its ancestors bottom-up by pumping sibling
    subtrees (a split of a full child adds one key to its parent without
    touching the protected path), and finally emit one key routed to the
    target leaf. That last insert finds every node on its path full and
    splits all of them. Cycles repeat while they fit in the budget, so
    the stream ends on a completed trap and is at most n keys long; only
    if even the first trap exceeds n is a truncated prefix returned.
    """
    shadow = BPlusTree(TreeConfig(capacity, "clrs"))
    out: list[int] = []
    while len(out) < n:
        trial = shadow.copy()
        try:
            cycle = _trap_cycle(trial, key_space, n - len(out))
        except _BudgetExceeded as exc:
            if not out:
                return exc.partial[:n]
            break
        shadow = trial
        out.extend(cycle)
    return out


class _BudgetExceeded(Exception):
    def __init__(self, partial: list[int]):
        self.partial = partial


def _trap_cycle(tree: BPlusTree, key_space: int, budget: int) -> list[int]:
    """Run one complete trap cycle against ``tree``, returning its keys."""
    emitted: list[int] = []

    def feed(key: int):
        if len(emitted) >= budget:
            raise _BudgetExceeded(emitted)
        tree.insert(key, None)
        emitted.append(key)

    # target = leftmost root-to-leaf path; pumping only ever touches
    # sibling subtrees, so these ids and bounds stay valid all cycle
    path: list[tuple[int, int, int]] = []
    nid, lo, hi = tree.root_id, 0, key_space
    while True:
        node = tree.store.get(nid)
        path.append((nid, lo, hi))
        if node.is_leaf:
            break
        hi = node.keys[0] if node.keys else hi
        nid = node.children[0]

    leaf_id, leaf_lo, leaf_hi = path[-1]
    _fill_leaf(tree, leaf_id, leaf_lo, leaf_hi, feed)
    for level in range(len(path) - 2, -1, -1):
        ancestor_id, alo, ahi = path[level]
        protected = path[level + 1][0]
        _make_full(tree, ancestor_id, alo, ahi, protected, feed)

    feed(_gap_key(tree.store.get(leaf_id).keys, leaf_lo, leaf_hi))
    return emitted


def _fill_leaf(tree, leaf_id, lo, hi, feed):
    node = tree.store.get(leaf_id)
    while len(node.keys) < tree.capacity:
        feed(_gap_key(node.keys, lo, hi))


def _make_full(tree, node_id, lo, hi, protected_child, feed):
    """Insert into sibling subtrees until ``node_id`` reaches capacity.

    Splitting a full child adds exactly one key here, so full children
    are triggered first; otherwise the child with the widest key range
    is filled, which spreads the midpoint subdivision instead of
    grinding one lineage down to an empty range. The protected child
    (the trap path) is never descended into.
    """
    store = tree.store
    node = store.get(node_id)
    cap = tree.capacity
    while len(node.keys) < cap:
        candidates = []
        for i, child_id in enumerate(node.children):
            if child_id == protected_child:
                continue
            clo = node.keys[i - 1] if i > 0 else lo
            chi = node.keys[i] if i < len(node.keys) else hi
            is_full = len(store.get(child_id).keys) == cap
            candidates.append((not is_full, clo - chi, child_id, clo, chi))
        candidates.sort()
        for _, _, child_id, clo, chi in candidates:
            child = store.get(child_id)
            try:
                if len(child.keys) == cap:
                    # one key routed through the full child splits it into us
                    feed(_subtree_gap_key(tree, child_id, clo, chi))
                elif child.is_leaf:
                    feed(_gap_key(child.keys, clo, chi))
                else:
                    _make_full(tree, child_id, clo, chi, None, feed)
                break
            except KeySpaceExhaustedError:
                continue
        else:
            raise KeySpaceExhaustedError("all sibling subtrees exhausted")


def _gap_key(keys: list[int], lo: int, hi: int) -> int:
    """Fresh integer inside [lo, hi): midpoint of the widest gap."""
    best_key = -1
    best_span = 0
    prev = lo - 1  # treat lo itself as available
    for k in list(keys) + [hi]:
        span = k - prev - 1
        if span > best_span:
            best_span = span
            best_key = prev + 1 + span // 2
        prev = k
    if best_key < 0:
        raise KeySpaceExhaustedError(f"no fresh key in [{lo}, {hi})")
    return best_key


def _subtree_gap_key(tree, node_id, lo, hi) -> int:
    """Fresh key somewhere under a node: follow the widest child range."""
    node = tree.store.get(node_id)
    while not node.is_leaf:
        best_i, best_span = 0, -1
        for i in range(len(node.children)):
            clo = node.keys[i - 1] if i > 0 else lo
            chi = node.keys[i] if i < len(node.keys) else hi
            if chi - clo > best_span:
                best_i, best_span = i, chi - clo
        lo = node.keys[best_i - 1] if best_i > 0 else lo
        hi = node.keys[best_i] if best_i < len(node.keys) else hi
        node = tree.store.get(node.children[best_i])
    return _gap_key(node.keys, lo, hi)


# -- key stream files -----------------------------------------------------


def save_keys(path: str, keys, fmt: str = "text") -> None:
    """Write a key stream: one decimal per line, or 8-byte LE records."""
    if fmt == "text":
        with open(path, "w") as fh:
            for k in keys:
                fh.write(f"{k}\n")
    elif fmt == "binary":
        with open(path, "wb") as fh:
            for k in keys:
                fh.write(struct.pack("<Q", k))
    else:
        raise ConfigError(f"unknown key file format {fmt!r}")


def load_keys(path: str, fmt: str = "text") -> list[int]:
    """Read a key stream written by save_keys; malformed input says where."""
    keys: list[int] = []
    if fmt == "text":
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.strip()
                if not text:
                    continue
                try:
                    keys.append(int(text))
                except ValueError:
                    raise KeyFileFormatError(
                        f"{path}:{lineno}: not a decimal key: {text!r}", line=lineno
                    ) from None
    elif fmt == "binary":
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) % 8:
            raise KeyFileFormatError(
                f"{path}: trailing {len(data) % 8} bytes at offset {len(data) - len(data) % 8}",
                offset=len(data) - len(data) % 8,
            )
        keys = [v[0] for v in struct.iter_unpack("<Q", data)]
    else:
        raise ConfigError(f"unknown key file format {fmt!r}")
    return keys
