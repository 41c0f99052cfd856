"""Slot storage with interchangeable memory layouts.

A :class:`SlotArray` holds a fixed number of key/value cells in one of
three layouts: parallel key and value arrays (SoA), interleaved cells
(AoS), or both halves bit-packed into a single 64-bit word (packed AoS,
only for keys and values that fit in 32 bits). Key cells are claimed by
compare-and-swap; value cells use plain stores and reads. In the packed
layout a claim writes key and value in one atomic step, which is what
makes mixed-operation overlap safe there and only there.

Empty and tombstone sentinel keys are fixed at construction and are
never accepted as user keys by the tables built on top.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

MASK32 = (1 << 32) - 1
_LOCK_STRIPES = 64


class LayoutUnsupported(Exception):
    """Operation or configuration not available for this layout."""


class LayoutKind(Enum):
    SOA = "soa"
    AOS = "aos"
    PACKED_AOS = "packed"


@dataclass(frozen=True)
class Sentinels:
    empty_key: int
    tombstone_key: int

    def __post_init__(self) -> None:
        if self.empty_key == self.tombstone_key:
            raise ValueError("empty and tombstone sentinels must differ")
        if self.empty_key < 0 or self.tombstone_key < 0:
            raise ValueError("sentinels must be non-negative")

    def is_sentinel(self, key: int) -> bool:
        return key == self.empty_key or key == self.tombstone_key


def default_sentinels(key_bits: int = 64) -> Sentinels:
    """All-ones empty key, all-ones minus one tombstone."""
    top = (1 << key_bits) - 1
    return Sentinels(empty_key=top, tombstone_key=top - 1)


def pack_pair(key: int, value: int) -> int:
    """Pack a 32-bit key (low half) and 32-bit value (high half)."""
    if not 0 <= key <= MASK32:
        raise ValueError("packed key must fit in 32 bits")
    if not 0 <= value <= MASK32:
        raise ValueError("packed value must fit in 32 bits")
    return (value << 32) | key


def unpack_pair(word: int) -> tuple[int, int]:
    return word & MASK32, word >> 32


class SlotArray:
    """Fixed-capacity key/value cells with atomic key claiming.

    Single-cell reads and writes are atomic. Compare-and-swap goes
    through a stripe of locks so that concurrent claims of one cell
    serialize; claims of different cells almost never contend.
    """

    __slots__ = ("capacity", "layout", "sentinels", "key_bits", "value_bits",
                 "_keys", "_vals", "_cells", "_words", "_locks", "load_window")

    def __init__(self, capacity: int, layout: LayoutKind = LayoutKind.SOA,
                 sentinels: Sentinels | None = None, *,
                 key_bits: int = 64, value_bits: int = 64):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        if layout == LayoutKind.PACKED_AOS and (key_bits > 32 or value_bits > 32):
            raise LayoutUnsupported("packed layout needs 32-bit keys and values")
        if sentinels is None:
            sentinels = default_sentinels(key_bits)
        self.capacity = capacity
        self.layout = layout
        self.sentinels = sentinels
        self.key_bits = key_bits
        self.value_bits = value_bits
        e = sentinels.empty_key
        if layout == LayoutKind.SOA:
            self._keys = [e] * capacity
            self._vals = [0] * capacity
            self.load_window = self._load_window_soa
        elif layout == LayoutKind.AOS:
            self._cells = [e, 0] * capacity
            self.load_window = self._load_window_aos
        else:
            self._words = [pack_pair(e, 0)] * capacity
            self.load_window = self._load_window_packed
        self._locks = [threading.Lock() for _ in range(_LOCK_STRIPES)]

    # -- window loads (hot path, one variant bound per layout) --------

    def _load_window_soa(self, start: int, width: int) -> list[int]:
        keys = self._keys
        c = self.capacity
        start %= c
        end = start + width
        if end <= c:
            return keys[start:end]
        return keys[start:] + keys[:end - c]

    def _load_window_aos(self, start: int, width: int) -> list[int]:
        cells = self._cells
        c = self.capacity
        start %= c
        end = start + width
        if end <= c:
            return cells[2 * start:2 * end:2]
        return cells[2 * start::2] + cells[:2 * (end - c):2]

    def _load_window_packed(self, start: int, width: int) -> list[int]:
        words = self._words
        c = self.capacity
        start %= c
        end = start + width
        if end <= c:
            window = words[start:end]
        else:
            window = words[start:] + words[:end - c]
        return [w & MASK32 for w in window]

    # -- single-cell access -------------------------------------------

    def load_key(self, i: int) -> int:
        if self.layout == LayoutKind.SOA:
            return self._keys[i]
        if self.layout == LayoutKind.AOS:
            return self._cells[2 * i]
        return self._words[i] & MASK32

    def load_value(self, i: int) -> int:
        if self.layout == LayoutKind.SOA:
            return self._vals[i]
        if self.layout == LayoutKind.AOS:
            return self._cells[2 * i + 1]
        return self._words[i] >> 32

    def load_pair(self, i: int) -> tuple[int, int]:
        """Key and value of one cell; a single atomic read when packed."""
        if self.layout == LayoutKind.PACKED_AOS:
            return unpack_pair(self._words[i])
        if self.layout == LayoutKind.SOA:
            return self._keys[i], self._vals[i]
        return self._cells[2 * i], self._cells[2 * i + 1]

    def store_value(self, i: int, value: int) -> None:
        """Plain value store; caller must own the slot's key."""
        if self.layout == LayoutKind.SOA:
            self._vals[i] = value
        elif self.layout == LayoutKind.AOS:
            self._cells[2 * i + 1] = value
        else:
            with self._locks[i & (_LOCK_STRIPES - 1)]:
                self._words[i] = (self._words[i] & MASK32) | (value << 32)

    # -- atomic transitions --------------------------------------------

    def try_claim_key(self, i: int, expected: int, desired: int) -> tuple[bool, int]:
        """CAS the key cell; returns (won, observed key)."""
        with self._locks[i & (_LOCK_STRIPES - 1)]:
            if self.layout == LayoutKind.SOA:
                actual = self._keys[i]
                if actual == expected:
                    self._keys[i] = desired
                    return True, actual
            elif self.layout == LayoutKind.AOS:
                actual = self._cells[2 * i]
                if actual == expected:
                    self._cells[2 * i] = desired
                    return True, actual
            else:
                word = self._words[i]
                actual = word & MASK32
                if actual == expected:
                    self._words[i] = (word & ~MASK32) | desired
                    return True, actual
            return False, actual

    def try_claim_pair_packed(self, i: int, key: int, value: int) -> tuple[bool, int]:
        """Claim a free packed cell, writing key and value in one step."""
        if self.layout != LayoutKind.PACKED_AOS:
            raise LayoutUnsupported("pair claim requires the packed layout")
        e, t = self.sentinels.empty_key, self.sentinels.tombstone_key
        with self._locks[i & (_LOCK_STRIPES - 1)]:
            actual = self._words[i] & MASK32
            if actual == e or actual == t:
                self._words[i] = pack_pair(key, value)
                return True, actual
            return False, actual

    def cas_value(self, i: int, expected: int, desired: int) -> tuple[bool, int]:
        """CAS the value cell (used for packed control words like list handles)."""
        if self.layout == LayoutKind.PACKED_AOS:
            raise LayoutUnsupported("value CAS is not available on packed cells")
        with self._locks[i & (_LOCK_STRIPES - 1)]:
            if self.layout == LayoutKind.SOA:
                actual = self._vals[i]
                if actual == expected:
                    self._vals[i] = desired
                    return True, actual
            else:
                actual = self._cells[2 * i + 1]
                if actual == expected:
                    self._cells[2 * i + 1] = desired
                    return True, actual
            return False, actual

    def retire_key(self, i: int, expected: int, tombstone_value: int = 0) -> tuple[bool, int]:
        """CAS a user key to the tombstone; packed cells zero the value too."""
        t = self.sentinels.tombstone_key
        with self._locks[i & (_LOCK_STRIPES - 1)]:
            if self.layout == LayoutKind.PACKED_AOS:
                actual = self._words[i] & MASK32
                if actual == expected:
                    self._words[i] = pack_pair(t, tombstone_value)
                    return True, actual
            elif self.layout == LayoutKind.SOA:
                actual = self._keys[i]
                if actual == expected:
                    self._keys[i] = t
                    return True, actual
            else:
                actual = self._cells[2 * i]
                if actual == expected:
                    self._cells[2 * i] = t
                    return True, actual
            return False, actual

    # -- iteration ------------------------------------------------------

    def iter_items(self) -> Iterator[tuple[int, int, int]]:
        """Yield (slot, key, value) for every cell holding a user key."""
        e, t = self.sentinels.empty_key, self.sentinels.tombstone_key
        if self.layout == LayoutKind.SOA:
            vals = self._vals
            for i, k in enumerate(self._keys):
                if k != e and k != t:
                    yield i, k, vals[i]
        elif self.layout == LayoutKind.AOS:
            cells = self._cells
            for i in range(self.capacity):
                k = cells[2 * i]
                if k != e and k != t:
                    yield i, k, cells[2 * i + 1]
        else:
            for i, w in enumerate(self._words):
                k = w & MASK32
                if k != e and k != t:
                    yield i, k, w >> 32


def new_slot_array(capacity: int, layout: LayoutKind = LayoutKind.SOA,
                   sentinels: Sentinels | None = None, *,
                   key_bits: int = 64, value_bits: int = 64) -> SlotArray:
    """Allocate a slot array with every key cell reading as empty."""
    return SlotArray(capacity, layout, sentinels,
                     key_bits=key_bits, value_bits=value_bits)
