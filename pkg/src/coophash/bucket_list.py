"""Bucket-list hash table: one key slot, values chained in growing buckets.

Keys live in a single-value table whose value cell holds a packed
64-bit *list handle*: 2 state bits (uninitialized, blocked, ready,
full), a 20-bit value count, and a 42-bit reference to the tail bucket
in the pool. Every handle transition is a CAS on the whole word, which
makes append and read linearizable at the handle.

Values are stored in buckets drawn from a pre-allocated arena by atomic
bump allocation. Bucket sizes follow ``s_i = ceil(lambda * s_(i-1))``;
every bucket after the first spends its leading slot on a reference to
the previous bucket, so a chain can be walked tail-to-head. Because the
geometry is a pure function of the growth policy, a value's position is
computed from the handle's count alone: appenders reserve index
``count`` by CAS-incrementing the handle and then write the slot.

A reader that catches a handle mid-append may miss the in-flight value;
it sees the consistent (count, tail) snapshot taken at handle-read
time. A reader that catches ``blocked`` waits with exponential back-off
like a competing writer would.
"""
from __future__ import annotations

import threading
import time
from bisect import bisect_left
from enum import IntEnum
from fractions import Fraction
from math import ceil
from typing import Callable, Iterable, Sequence

from .layout import LayoutKind, Sentinels
from .probing import CapacityPlan
from .single_table import InsertStatus, SingleValueHashTable, _run_chunked
from .multi_table import exclusive_prefix_sum

COUNT_BITS = 20
TAIL_BITS = 42
COUNT_MAX = (1 << COUNT_BITS) - 1
TAIL_MAX = (1 << TAIL_BITS) - 1

BACKOFF_CAP = 1024
RETRY_BUDGET = 10 ** 6


class PoolExhausted(Exception):
    """The bucket arena has no room for the requested allocation."""


class ContentionTimeout(Exception):
    """A handle stayed blocked or contended past the retry budget."""


class HandleState(IntEnum):
    UNINITIALIZED = 0
    BLOCKED = 1
    READY = 2
    FULL = 3


def pack_handle(state: int, count: int, tail: int) -> int:
    if not 0 <= count <= COUNT_MAX:
        raise ValueError("handle count out of range")
    if not 0 <= tail <= TAIL_MAX:
        raise ValueError("handle tail reference out of range")
    return (state << (COUNT_BITS + TAIL_BITS)) | (count << TAIL_BITS) | tail


def unpack_handle(word: int) -> tuple[int, int, int]:
    return word >> (COUNT_BITS + TAIL_BITS), (word >> TAIL_BITS) & COUNT_MAX, word & TAIL_MAX


class GrowthPolicy:
    """Bucket size schedule ``s_i = ceil(lambda * s_(i-1))``.

    The factor is kept as an exact fraction so the ceiling recurrence
    matches its mathematical definition (floats would round e.g.
    ceil(1.1 * 10) up to 12). Sizes and their running sums are memoized.
    """

    def __init__(self, initial_size: int = 1, factor: float | str | Fraction = "1.1"):
        if initial_size < 1:
            raise ValueError("initial bucket size must be >= 1")
        factor = Fraction(str(factor)) if not isinstance(factor, Fraction) else factor
        if factor < 1:
            raise ValueError("growth factor must be >= 1")
        self.initial_size = initial_size
        self.factor = factor
        self._sizes = [initial_size]
        self._sums = [initial_size]
        self._lock = threading.Lock()

    def _ensure(self, m: int) -> None:
        if len(self._sizes) >= m:
            return
        with self._lock:
            while len(self._sizes) < m:
                nxt = ceil(self.factor * self._sizes[-1])
                self._sizes.append(nxt)
                self._sums.append(self._sums[-1] + nxt)

    def bucket_size(self, i: int) -> int:
        self._ensure(i + 1)
        return self._sizes[i]

    def capacity_of(self, m: int) -> int:
        """Total value slots in the first ``m`` buckets."""
        if m == 0:
            return 0
        self._ensure(m)
        return self._sums[m - 1]

    def buckets_for(self, count: int) -> int:
        """Number of buckets holding ``count`` appended values."""
        if count <= 0:
            return 0
        while self._sums[-1] < count:
            self._ensure(len(self._sizes) + 8)
        return bisect_left(self._sums, count) + 1


def next_bucket_size(policy: GrowthPolicy, previous: int) -> int:
    """One step of the growth recurrence, ceil(factor * previous)."""
    if previous < 1:
        raise ValueError("previous bucket size must be >= 1")
    return ceil(policy.factor * previous)


class BucketPool:
    """Contiguous value-slot arena with an atomic bump cursor."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("pool capacity must be positive")
        self.capacity = capacity
        self.arena = [0] * capacity
        self._bump = 0
        self._lock = threading.Lock()

    def alloc(self, slots: int) -> int:
        if slots < 1:
            raise ValueError("allocation must cover at least one slot")
        with self._lock:
            if self._bump + slots > self.capacity:
                raise PoolExhausted(
                    f"need {slots} slots, {self.capacity - self._bump} left")
            off = self._bump
            self._bump += slots
            return off

    @property
    def allocated(self) -> int:
        return self._bump


def _backoff(units: int) -> None:
    # Short waits just yield the interpreter; longer ones sleep.
    if units <= 16:
        time.sleep(0)
    else:
        time.sleep(units * 1e-6)


class BucketListHashTable:
    """Multi-value table that stores each key once and chains its values."""

    def __init__(self, min_keys: int, pool_capacity: int, *,
                 growth: GrowthPolicy | None = None,
                 layout: LayoutKind | str = LayoutKind.SOA,
                 key_bits: int = 64, value_bits: int = 64,
                 sentinels: Sentinels | None = None,
                 group_width: int = 32,
                 workers: int = 1,
                 plan: CapacityPlan | None = None):
        if isinstance(layout, str):
            layout = LayoutKind(layout)
        if layout == LayoutKind.PACKED_AOS:
            raise ValueError("list handles need 64-bit value cells; "
                             "use the soa or aos layout")
        self.growth = growth if growth is not None else GrowthPolicy()
        self.pool = BucketPool(pool_capacity)
        self.key_store = SingleValueHashTable(
            min_keys, layout=layout, key_bits=key_bits, value_bits=64,
            sentinels=sentinels, group_width=group_width, plan=plan)
        self.value_bits = value_bits
        self.workers = workers
        self._total_values = 0
        self._meta_lock = threading.Lock()

    # -- introspection ------------------------------------------------------

    @property
    def capacity(self) -> int:
        return self.key_store.capacity

    @property
    def occupied_keys(self) -> int:
        return self.key_store.occupied

    @property
    def total_values(self) -> int:
        return self._total_values

    def key_load_factor(self) -> float:
        return self.key_store.load_factor()

    def storage_density(self) -> float:
        """Stored information bits over all allocated bits."""
        ks = self.key_store
        kb = ks.slots.key_bits
        stored = ks.occupied * kb + self._total_values * self.value_bits
        allocated = (ks.capacity * kb          # key cells
                     + ks.capacity * 64        # handle words
                     + self.pool.capacity * self.value_bits)
        return stored / allocated

    # -- handle helpers -----------------------------------------------------

    def _load_handle(self, slot: int) -> int:
        return self.key_store.slots.load_value(slot)

    def _cas_handle(self, slot: int, expected: int, desired: int) -> bool:
        won, _ = self.key_store.slots.cas_value(slot, expected, desired)
        return won

    # -- operations ----------------------------------------------------------

    def insert(self, key: int, value: int) -> InsertStatus:
        """Append ``value`` to ``key``'s chain, creating it if absent."""
        status, slot = self.key_store.find_or_claim(key)
        if status == InsertStatus.INVALID_KEY:
            return status
        if status == InsertStatus.TABLE_FULL:
            return InsertStatus.TABLE_FULL
        growth = self.growth
        arena = self.pool.arena
        delay = 1
        for _ in range(RETRY_BUDGET):
            word = self._load_handle(slot)
            state, count, tail = unpack_handle(word)
            if state == HandleState.BLOCKED:
                _backoff(delay)
                delay = min(delay * 2, BACKOFF_CAP)
                continue
            if state == HandleState.FULL:
                return InsertStatus.OUT_OF_MEMORY
            if state == HandleState.UNINITIALIZED:
                blocked = pack_handle(HandleState.BLOCKED, 0, 0)
                if not self._cas_handle(slot, word, blocked):
                    continue
                try:
                    off = self.pool.alloc(growth.bucket_size(0))
                except PoolExhausted:
                    self._cas_handle(slot, blocked, pack_handle(HandleState.FULL, 0, 0))
                    return InsertStatus.OUT_OF_MEMORY
                arena[off] = value
                self._cas_handle(slot, blocked, pack_handle(HandleState.READY, 1, off))
                self._bump_total()
                return InsertStatus.INSERTED
            # READY
            if count >= COUNT_MAX:
                self._cas_handle(slot, word,
                                 pack_handle(HandleState.FULL, count, tail))
                return InsertStatus.OUT_OF_MEMORY
            m = growth.buckets_for(count)
            cap = growth.capacity_of(m)
            if count < cap:
                # Reserve slot index ``count`` in the tail bucket.
                desired = pack_handle(HandleState.READY, count + 1, tail)
                if not self._cas_handle(slot, word, desired):
                    continue
                header = 1 if m > 1 else 0
                base = cap - growth.bucket_size(m - 1)
                arena[tail + header + (count - base)] = value
                self._bump_total()
                return InsertStatus.INSERTED
            # Tail bucket is full: block the handle and grow the chain.
            blocked = pack_handle(HandleState.BLOCKED, count, tail)
            if not self._cas_handle(slot, word, blocked):
                continue
            size = growth.bucket_size(m)
            try:
                off = self.pool.alloc(size + 1)
            except PoolExhausted:
                self._cas_handle(slot, blocked,
                                 pack_handle(HandleState.FULL, count, tail))
                return InsertStatus.OUT_OF_MEMORY
            arena[off] = tail        # leading slot references the previous bucket
            arena[off + 1] = value
            self._cas_handle(slot, blocked,
                             pack_handle(HandleState.READY, count + 1, off))
            self._bump_total()
            return InsertStatus.INSERTED
        raise ContentionTimeout(f"insert of key {key} exceeded the retry budget")

    def _bump_total(self) -> None:
        with self._meta_lock:
            self._total_values += 1

    def _snapshot(self, key: int) -> tuple[int, int]:
        """(count, tail) of the key's handle, waiting out blocked states.

        Returns (0, 0) for absent keys and uninitialized handles.
        """
        slot = self.key_store.slot_of(key)
        if slot < 0:
            return 0, 0
        delay = 1
        for _ in range(RETRY_BUDGET):
            state, count, tail = unpack_handle(self._load_handle(slot))
            if state == HandleState.BLOCKED:
                _backoff(delay)
                delay = min(delay * 2, BACKOFF_CAP)
                continue
            if state == HandleState.UNINITIALIZED:
                return 0, 0
            return count, tail
        raise ContentionTimeout(f"key {key} stayed blocked past the retry budget")

    def count(self, key: int) -> int:
        """Value count read straight from the handle; no chain walk."""
        slot = self.key_store.slot_of(key)
        if slot < 0:
            return 0
        _, count, _ = unpack_handle(self._load_handle(slot))
        return count

    def _bucket_bases(self, count: int, tail: int) -> list[int]:
        """Arena offsets of all buckets, head first, via the prev references."""
        m = self.growth.buckets_for(count)
        bases = [tail]
        cur = tail
        for _ in range(m - 1):
            cur = self.pool.arena[cur]
            bases.append(cur)
        bases.reverse()
        return bases

    def retrieve(self, key: int) -> list[int]:
        """All values appended under ``key`` (unspecified order)."""
        count, tail = self._snapshot(key)
        if count == 0:
            return []
        growth = self.growth
        arena = self.pool.arena
        bases = self._bucket_bases(count, tail)
        out: list[int] = []
        consumed = 0
        for b, base in enumerate(bases):
            size = growth.bucket_size(b)
            start = base + (1 if b > 0 else 0)
            take = min(size, count - consumed)
            out.extend(arena[start:start + take])
            consumed += take
        return out

    def chain_sizes(self, key: int) -> list[int]:
        """Allocated bucket sizes for ``key``'s chain, head first."""
        count, tail = self._snapshot(key)
        if count == 0:
            return []
        return [self.growth.bucket_size(b)
                for b in range(len(self._bucket_bases(count, tail)))]

    # -- bulk operations ------------------------------------------------------

    def insert_bulk(self, pairs: Sequence[tuple[int, int]],
                    workers: int | None = None) -> list[InsertStatus]:
        pairs = list(pairs)
        statuses = [InsertStatus.INVALID_KEY] * len(pairs)

        def job(lo: int, hi: int) -> None:
            for i in range(lo, hi):
                k, v = pairs[i]
                statuses[i] = self.insert(k, v)

        _run_chunked(len(pairs), workers if workers is not None else self.workers, job)
        return statuses

    def count_bulk(self, keys: Sequence[int]) -> list[int]:
        return [self.count(k) for k in keys]

    def retrieve_bulk(self, keys: Sequence[int]) -> tuple[list[int], list[int]]:
        """Offsets plus flat values; the counting pass reads only handles."""
        keys = list(keys)
        counts = self.count_bulk(keys)
        offsets = exclusive_prefix_sum(counts)
        flat: list[int] = [0] * offsets[-1]
        for i, k in enumerate(keys):
            want = counts[i]
            if want == 0:
                continue
            seg = self.retrieve(k)
            if len(seg) != want:
                seg = (seg + [0] * want)[:want]
            flat[offsets[i]:offsets[i] + want] = seg
        return offsets, flat

    def for_each(self, keys: Iterable[int],
                 callback: Callable[[int, int, int], None]) -> None:
        """Invoke callback(key, value, key_slot) for every stored value."""
        for k in keys:
            slot = self.key_store.slot_of(k)
            if slot < 0:
                continue
            for v in self.retrieve(k):
                callback(k, v, slot)
