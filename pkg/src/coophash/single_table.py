"""Single-value hash table: every key occurs at most once.

Insertion walks the cooperative probe sequence window by window. Each
group step loads a chunk of key cells, tests every cell as a candidate
(empty, tombstone, or equal key), and claims the lowest free candidate
by CAS, re-examining the chunk after a lost race. A key equal to the
probed key anywhere along the scanned prefix reports a duplicate and
leaves the stored value unchanged.

One wrinkle comes from deletions: a tombstone is a valid insertion
target, but the same key may still live between that tombstone and the
first empty cell. Claiming the tombstone immediately would duplicate
the key, so when the lowest free candidate is a tombstone the claim is
deferred until the scan reaches an empty cell (or exhausts the cycle)
without meeting the key. Cells never return to the empty state, so no
duplicate can hide beyond the first empty cell and the scan may stop
there.

Concurrency contract: overlapping calls of the same operation and any
mix of read operations are always safe. Mixing writers with readers of
the same key is only well-defined on the packed layout, where key and
value move in one atomic word; on split layouts a reader may observe a
freshly claimed key before its value store lands. Overlapping insert
and erase of the same key is not supported on any layout.
"""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .layout import LayoutKind, Sentinels, SlotArray
from .probing import (CapacityPlan, HashFn, ProbingConfig, ProbingScheme,
                      choose_capacity, dh_step, dh_step_array, mix64_array)

_VECTOR_THRESHOLD = 1024

# _probe_claim outcomes
_CLAIMED = 0
_FOUND = 1
_FULL = 2


class InsertStatus(Enum):
    INSERTED = "inserted"
    DUPLICATE_KEY = "duplicate_key"
    TABLE_FULL = "table_full"
    INVALID_KEY = "invalid_key"
    OUT_OF_MEMORY = "out_of_memory"


@dataclass(frozen=True)
class ProbeStats:
    """Slots examined and windows visited by one completed operation."""
    attempts: int
    windows_visited: int


@dataclass
class ProbeCounters:
    """Running totals across operations, for throughput diagnostics."""
    ops: int = 0
    attempts: int = 0
    windows_visited: int = 0

    @property
    def mean_attempts(self) -> float:
        return self.attempts / self.ops if self.ops else 0.0


def _run_chunked(n: int, workers: int, job: Callable[[int, int], None]) -> None:
    """Run job(start, stop) over [0, n) split across a worker pool."""
    if workers <= 1 or n < 2 * workers:
        job(0, n)
        return
    bounds = [n * i // workers for i in range(workers + 1)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job, bounds[i], bounds[i + 1])
                   for i in range(workers)]
        for f in futures:
            f.result()


class SingleValueHashTable:
    """Concurrent open-addressing table mapping each key to one value."""

    def __init__(self, min_capacity: int, *,
                 layout: LayoutKind | str = LayoutKind.SOA,
                 key_bits: int = 64, value_bits: int = 64,
                 sentinels: Sentinels | None = None,
                 group_width: int = 32,
                 scheme: ProbingScheme = ProbingScheme.COOPERATIVE,
                 max_outer_attempts: int | None = None,
                 workers: int = 1,
                 plan: CapacityPlan | None = None):
        if isinstance(layout, str):
            layout = LayoutKind(layout)
        if plan is None:
            plan = choose_capacity(max(min_capacity, 32))
        self.config = ProbingConfig(plan=plan, scheme=scheme,
                                    group_width=group_width,
                                    max_outer_attempts=max_outer_attempts)
        self.slots = SlotArray(plan.c, layout, sentinels,
                               key_bits=key_bits, value_bits=value_bits)
        self.workers = workers
        self._packed = layout == LayoutKind.PACKED_AOS
        self._occupied = 0
        self._tombstones = 0
        self._meta_lock = threading.Lock()
        self._counters = ProbeCounters()

    # -- introspection ---------------------------------------------------

    @property
    def capacity(self) -> int:
        return self.slots.capacity

    @property
    def occupied(self) -> int:
        return self._occupied

    @property
    def tombstones(self) -> int:
        return self._tombstones

    def load_factor(self) -> float:
        return self._occupied / self.slots.capacity

    def probe_counters(self) -> ProbeCounters:
        return self._counters

    def reset_probe_counters(self) -> None:
        with self._meta_lock:
            self._counters = ProbeCounters()

    def _account(self, slots_probed: int, windows: int,
                 occupied_delta: int = 0, tombstone_delta: int = 0) -> None:
        with self._meta_lock:
            c = self._counters
            c.ops += 1
            c.attempts += slots_probed
            c.windows_visited += windows
            self._occupied += occupied_delta
            self._tombstones += tombstone_delta

    # -- probing core ------------------------------------------------------

    def _probe_params(self, key: int) -> tuple[int, int]:
        cfg = self.config
        return cfg.hash.value(key) % cfg.plan.c, dh_step(key, cfg.plan, cfg.step_hash)

    def _vector_probe_params(self, keys: Sequence[int]) -> tuple[list[int], list[int]]:
        cfg = self.config
        if len(keys) < _VECTOR_THRESHOLD:
            return ([cfg.hash.value(k) % cfg.plan.c for k in keys],
                    [dh_step(k, cfg.plan, cfg.step_hash) for k in keys])
        arr = np.array(keys, dtype=np.uint64)
        hs = (cfg.hash.values(arr) % np.uint64(cfg.plan.c)).tolist()
        steps = dh_step_array(arr, cfg.plan, cfg.step_hash).tolist()
        return hs, steps

    def _claim(self, idx: int, expected: int, key: int, value: int) -> tuple[bool, int]:
        if self._packed:
            return self.slots.try_claim_pair_packed(idx, key, value)
        return self.slots.try_claim_key(idx, expected, key)

    def _probe_claim(self, key: int, value: int, h: int, step: int
                     ) -> tuple[int, int, bool, int, int]:
        """Locate ``key`` or claim the lowest free slot of its sequence.

        Returns (outcome, slot, claimed_tombstone, slots_probed, windows).
        """
        slots = self.slots
        load = slots.load_window
        c = slots.capacity
        e = slots.sentinels.empty_key
        t = slots.sentinels.tombstone_key
        g = self.config.group_width
        w = self.config.window_width
        max_windows = self.config.max_outer_attempts
        probed = 0
        windows = 0

        while True:  # restarted only after losing a deferred tombstone claim
            pending = -1
            restart = False
            for j in range(max_windows):
                start = (h + j * step) % c
                windows += 1
                o = 0
                while o < w:
                    chunk = load(start + o, g)
                    probed += g
                    if key in chunk:
                        pos = (start + o + chunk.index(key)) % c
                        return _FOUND, pos, False, probed, windows
                    ie = chunk.index(e) if e in chunk else -1
                    it = chunk.index(t) if t in chunk else -1
                    if pending < 0:
                        if ie < 0 and it < 0:
                            o += g
                            continue
                        if it < 0 or (0 <= ie < it):
                            target, expected = (start + o + ie) % c, e
                        elif ie < 0:
                            # Tombstone only: remember it, keep scanning for
                            # the key until an empty cell bounds the search.
                            pending = (start + o + it) % c
                            o += g
                            continue
                        else:
                            # Tombstone below an empty in the same chunk: the
                            # duplicate scan already ends here, claim it now.
                            target, expected = (start + o + it) % c, t
                    else:
                        if ie < 0:
                            o += g
                            continue
                        target, expected = pending, t
                    won, actual = self._claim(target, expected, key, value)
                    if won:
                        return _CLAIMED, target, expected == t, probed, windows
                    if actual == key:
                        return _FOUND, target, False, probed, windows
                    if target == pending:
                        restart = True
                        break
                    # Lost to a different key: loop re-reads the chunk and
                    # retries any remaining candidates before moving on.
                if restart:
                    break
            if restart:
                continue
            if pending >= 0:
                won, actual = self._claim(pending, t, key, value)
                if won:
                    return _CLAIMED, pending, True, probed, windows
                if actual == key:
                    return _FOUND, pending, False, probed, windows
                continue
            return _FULL, -1, False, probed, windows

    def _find_slot(self, key: int, h: int, step: int) -> tuple[int, int, int]:
        """Slot holding ``key`` or -1, stopping at the first empty cell."""
        slots = self.slots
        load = slots.load_window
        c = slots.capacity
        e = slots.sentinels.empty_key
        g = self.config.group_width
        w = self.config.window_width
        probed = 0
        windows = 0
        for j in range(self.config.max_outer_attempts):
            start = (h + j * step) % c
            windows += 1
            o = 0
            while o < w:
                chunk = load(start + o, g)
                probed += g
                if key in chunk:
                    return (start + o + chunk.index(key)) % c, probed, windows
                if e in chunk:
                    return -1, probed, windows
                o += g
        return -1, probed, windows

    # -- element operations ------------------------------------------------

    def insert(self, key: int, value: int) -> InsertStatus:
        if self.slots.sentinels.is_sentinel(key):
            return InsertStatus.INVALID_KEY
        h, step = self._probe_params(key)
        return self._insert_at(key, value, h, step)

    def _insert_at(self, key: int, value: int, h: int, step: int) -> InsertStatus:
        outcome, idx, was_tomb, probed, windows = self._probe_claim(key, value, h, step)
        if outcome == _CLAIMED:
            if not self._packed:
                self.slots.store_value(idx, value)
            self._account(probed, windows, occupied_delta=1,
                          tombstone_delta=-1 if was_tomb else 0)
            return InsertStatus.INSERTED
        self._account(probed, windows)
        if outcome == _FOUND:
            return InsertStatus.DUPLICATE_KEY
        return InsertStatus.TABLE_FULL

    def find_or_claim(self, key: int) -> tuple[InsertStatus, int]:
        """Find ``key`` or claim a slot for it without writing the value cell.

        Returns (status, slot); status is DUPLICATE_KEY when the key was
        already present, INSERTED when this call claimed its slot. The
        value cell keeps its previous contents, which lets callers manage
        it exclusively through value CAS (see the bucket-list table).
        """
        if self.slots.sentinels.is_sentinel(key):
            return InsertStatus.INVALID_KEY, -1
        h, step = self._probe_params(key)
        outcome, idx, was_tomb, probed, windows = self._probe_claim(key, 0, h, step)
        if outcome == _CLAIMED:
            self._account(probed, windows, occupied_delta=1,
                          tombstone_delta=-1 if was_tomb else 0)
            return InsertStatus.INSERTED, idx
        self._account(probed, windows)
        if outcome == _FOUND:
            return InsertStatus.DUPLICATE_KEY, idx
        return InsertStatus.TABLE_FULL, -1

    def retrieve(self, key: int) -> Optional[int]:
        value, _ = self.retrieve_with_stats(key)
        return value

    def retrieve_with_stats(self, key: int) -> tuple[Optional[int], ProbeStats]:
        if self.slots.sentinels.is_sentinel(key):
            return None, ProbeStats(0, 0)
        h, step = self._probe_params(key)
        idx, probed, windows = self._find_slot(key, h, step)
        self._account(probed, windows)
        stats = ProbeStats(probed, windows)
        if idx < 0:
            return None, stats
        k, v = self.slots.load_pair(idx)
        return (v if k == key else None), stats

    def slot_of(self, key: int) -> int:
        """Slot index currently holding ``key``, or -1."""
        if self.slots.sentinels.is_sentinel(key):
            return -1
        h, step = self._probe_params(key)
        idx, probed, windows = self._find_slot(key, h, step)
        self._account(probed, windows)
        return idx

    def erase(self, key: int) -> bool:
        """Replace the key with a tombstone. True if the key was present."""
        if self.slots.sentinels.is_sentinel(key):
            return False
        h, step = self._probe_params(key)
        idx, probed, windows = self._find_slot(key, h, step)
        if idx < 0:
            self._account(probed, windows)
            return False
        won, _ = self.slots.retire_key(idx, key)
        self._account(probed, windows,
                      occupied_delta=-1 if won else 0,
                      tombstone_delta=1 if won else 0)
        return won

    # -- bulk operations -----------------------------------------------------

    def insert_bulk(self, pairs: Sequence[tuple[int, int]],
                    workers: int | None = None) -> list[InsertStatus]:
        pairs = list(pairs)
        n = len(pairs)
        statuses: list[InsertStatus] = [InsertStatus.INVALID_KEY] * n
        if n == 0:
            return statuses
        is_sentinel = self.slots.sentinels.is_sentinel
        hs, steps = self._vector_probe_params([k for k, _ in pairs])

        def job(lo: int, hi: int) -> None:
            insert_at = self._insert_at
            for i in range(lo, hi):
                k, v = pairs[i]
                if is_sentinel(k):
                    continue
                statuses[i] = insert_at(k, v, hs[i], steps[i])

        _run_chunked(n, workers if workers is not None else self.workers, job)
        return statuses

    def retrieve_bulk(self, keys: Sequence[int],
                      workers: int | None = None) -> list[Optional[int]]:
        keys = list(keys)
        n = len(keys)
        out: list[Optional[int]] = [None] * n
        if n == 0:
            return out
        is_sentinel = self.slots.sentinels.is_sentinel
        hs, steps = self._vector_probe_params(keys)

        def job(lo: int, hi: int) -> None:
            find = self._find_slot
            load_pair = self.slots.load_pair
            probed = windows = 0
            for i in range(lo, hi):
                k = keys[i]
                if is_sentinel(k):
                    continue
                idx, p, w = find(k, hs[i], steps[i])
                probed += p
                windows += w
                if idx >= 0:
                    k2, v = load_pair(idx)
                    if k2 == k:
                        out[i] = v
            with self._meta_lock:
                c = self._counters
                c.ops += hi - lo
                c.attempts += probed
                c.windows_visited += windows

        _run_chunked(n, workers if workers is not None else self.workers, job)
        return out

    # -- callbacks ---------------------------------------------------------

    def for_each(self, keys: Iterable[int],
                 callback: Callable[[int, int, int], None]) -> None:
        """Invoke callback(key, value, slot) for every present query key."""
        for k in keys:
            if self.slots.sentinels.is_sentinel(k):
                continue
            h, step = self._probe_params(k)
            idx, probed, windows = self._find_slot(k, h, step)
            self._account(probed, windows)
            if idx >= 0:
                k2, v = self.slots.load_pair(idx)
                if k2 == k:
                    callback(k, v, idx)

    def for_all(self, callback: Callable[[int, int, int], None]) -> None:
        """Invoke callback(key, value, slot) for every occupied slot."""
        for i, k, v in self.slots.iter_items():
            callback(k, v, i)
