"""Multi-value hash table over pure open addressing.

The same key may occupy many slots, one per inserted value. Insertion
claims the first free slot along the key's probe sequence without any
presence check, so duplicates land at successive free positions of the
same sequence. Retrieval scans the sequence up to the first empty cell
and collects every match; since cells never return to the empty state,
no value can hide beyond that boundary.

Deletion is deliberately absent: truncating a duplicate chain with
tombstones has no well-defined per-copy semantics here.
"""
from __future__ import annotations

import threading
from itertools import accumulate
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .layout import LayoutKind, Sentinels, SlotArray
from .probing import (CapacityPlan, ProbingConfig, ProbingScheme,
                      choose_capacity, dh_step, dh_step_array)
from .single_table import (InsertStatus, ProbeCounters, ProbeStats,
                           _run_chunked, _VECTOR_THRESHOLD)


def exclusive_prefix_sum(counts: Sequence[int]) -> list[int]:
    """Offsets array: offsets[0] = 0, offsets[i+1] = offsets[i] + counts[i]."""
    return list(accumulate(counts, initial=0))


class MultiValueHashTable:
    """Concurrent open-addressing table storing every (key, value) pair."""

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
        self._meta_lock = threading.Lock()
        self._counters = ProbeCounters()

    @property
    def capacity(self) -> int:
        return self.slots.capacity

    @property
    def occupied(self) -> int:
        return self._occupied

    def load_factor(self) -> float:
        return self._occupied / self.slots.capacity

    def storage_density(self) -> float:
        # For a single-array OA store, density coincides with load factor:
        # duplicate keys consume one slot per value.
        return self.load_factor()

    def probe_counters(self) -> ProbeCounters:
        return self._counters

    def reset_probe_counters(self) -> None:
        with self._meta_lock:
            self._counters = ProbeCounters()

    def _account(self, probed: int, windows: int, occupied_delta: int = 0) -> None:
        with self._meta_lock:
            c = self._counters
            c.ops += 1
            c.attempts += probed
            c.windows_visited += windows
            self._occupied += occupied_delta

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

    # -- element operations --------------------------------------------------

    def insert(self, key: int, value: int) -> InsertStatus:
        if self.slots.sentinels.is_sentinel(key):
            return InsertStatus.INVALID_KEY
        h, step = self._probe_params(key)
        return self._insert_at(key, value, h, step)

    def _insert_at(self, key: int, value: int, h: int, step: int) -> InsertStatus:
        slots = self.slots
        load = slots.load_window
        c = slots.capacity
        e = slots.sentinels.empty_key
        t = slots.sentinels.tombstone_key
        g = self.config.group_width
        w = self.config.window_width
        packed = self._packed
        probed = 0
        windows = 0
        for j in range(self.config.max_outer_attempts):
            start = (h + j * step) % c
            windows += 1
            o = 0
            while o < w:
                chunk = load(start + o, g)
                probed += g
                ie = chunk.index(e) if e in chunk else -1
                it = chunk.index(t) if t in chunk else -1
                if ie < 0 and it < 0:
                    o += g
                    continue
                if it < 0 or (0 <= ie < it):
                    target, expected = (start + o + ie) % c, e
                else:
                    target, expected = (start + o + it) % c, t
                if packed:
                    won, _ = slots.try_claim_pair_packed(target, key, value)
                else:
                    won, _ = slots.try_claim_key(target, expected, key)
                if won:
                    if not packed:
                        slots.store_value(target, value)
                    self._account(probed, windows, occupied_delta=1)
                    return InsertStatus.INSERTED
                # Lost the race: loop re-reads this chunk for the remaining
                # free candidates before moving to the next group step.
        self._account(probed, windows)
        return InsertStatus.TABLE_FULL

    def count(self, key: int) -> int:
        if self.slots.sentinels.is_sentinel(key):
            return 0
        h, step = self._probe_params(key)
        n, probed, windows = self._scan(key, h, step, collect=None)
        self._account(probed, windows)
        return n

    def retrieve(self, key: int) -> list[int]:
        if self.slots.sentinels.is_sentinel(key):
            return []
        h, step = self._probe_params(key)
        out: list[int] = []
        _, probed, windows = self._scan(key, h, step, collect=out)
        self._account(probed, windows)
        return out

    def _scan(self, key: int, h: int, step: int,
              collect: Optional[list[int]]) -> tuple[int, int, int]:
        """Count (and optionally gather) all values stored under ``key``."""
        slots = self.slots
        load = slots.load_window
        load_value = slots.load_value
        c = slots.capacity
        e = slots.sentinels.empty_key
        g = self.config.group_width
        w = self.config.window_width
        total = 0
        probed = 0
        windows = 0
        for j in range(self.config.max_outer_attempts):
            start = (h + j * step) % c
            windows += 1
            o = 0
            while o < w:
                chunk = load(start + o, g)
                probed += g
                m = chunk.count(key)
                if m:
                    total += m
                    if collect is not None:
                        pos = 0
                        for _ in range(m):
                            pos = chunk.index(key, pos)
                            collect.append(load_value((start + o + pos) % c))
                            pos += 1
                if e in chunk:
                    return total, probed, windows
                o += g
        return total, probed, windows

    # -- bulk operations -------------------------------------------------------

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

    def count_bulk(self, keys: Sequence[int],
                   workers: int | None = None) -> list[int]:
        keys = list(keys)
        counts = [0] * len(keys)
        if not keys:
            return counts
        hs, steps = self._vector_probe_params(keys)
        is_sentinel = self.slots.sentinels.is_sentinel

        def job(lo: int, hi: int) -> None:
            scan = self._scan
            probed = windows = 0
            for i in range(lo, hi):
                k = keys[i]
                if is_sentinel(k):
                    continue
                counts[i], p, w = scan(k, hs[i], steps[i], collect=None)
                probed += p
                windows += w
            with self._meta_lock:
                c = self._counters
                c.ops += hi - lo
                c.attempts += probed
                c.windows_visited += windows

        _run_chunked(len(keys), workers if workers is not None else self.workers, job)
        return counts

    def retrieve_bulk(self, keys: Sequence[int],
                      workers: int | None = None) -> tuple[list[int], list[int]]:
        """Counting pass, offsets by prefix sum, then segment retrieval.

        Returns (offsets, values): values for query i live in
        ``values[offsets[i]:offsets[i+1]]``. Exact when no writer overlaps
        the two passes; absent keys contribute empty segments.
        """
        keys = list(keys)
        counts = self.count_bulk(keys, workers)
        offsets = exclusive_prefix_sum(counts)
        flat: list[int] = [0] * offsets[-1]
        if not keys:
            return offsets, flat
        hs, steps = self._vector_probe_params(keys)
        is_sentinel = self.slots.sentinels.is_sentinel

        def job(lo: int, hi: int) -> None:
            scan = self._scan
            probed = windows = 0
            for i in range(lo, hi):
                k = keys[i]
                want = counts[i]
                if want == 0 or is_sentinel(k):
                    continue
                seg: list[int] = []
                _, p, w = scan(k, hs[i], steps[i], collect=seg)
                probed += p
                windows += w
                if len(seg) != want:  # a writer raced the counting pass
                    seg = (seg + [0] * want)[:want]
                flat[offsets[i]:offsets[i] + want] = seg
            with self._meta_lock:
                c = self._counters
                c.ops += hi - lo
                c.attempts += probed
                c.windows_visited += windows

        _run_chunked(len(keys), workers if workers is not None else self.workers, job)
        return offsets, flat

    # -- callbacks ----------------------------------------------------------

    def for_each(self, keys: Iterable[int],
                 callback: Callable[[int, int, int], None]) -> None:
        """Invoke callback(key, value, slot) once per matching slot."""
        slots = self.slots
        load = slots.load_window
        c = slots.capacity
        e = slots.sentinels.empty_key
        g = self.config.group_width
        w = self.config.window_width
        for key in keys:
            if slots.sentinels.is_sentinel(key):
                continue
            h, step = self._probe_params(key)
            probed = windows = 0
            done = False
            for j in range(self.config.max_outer_attempts):
                if done:
                    break
                start = (h + j * step) % c
                windows += 1
                o = 0
                while o < w:
                    chunk = load(start + o, g)
                    probed += g
                    m = chunk.count(key)
                    if m:
                        pos = 0
                        for _ in range(m):
                            pos = chunk.index(key, pos)
                            idx = (start + o + pos) % c
                            callback(key, slots.load_value(idx), idx)
                            pos += 1
                    if e in chunk:
                        done = True
                        break
                    o += g
            self._account(probed, windows)

    def for_all(self, callback: Callable[[int, int, int], None]) -> None:
        for i, k, v in self.slots.iter_items():
            callback(k, v, i)
