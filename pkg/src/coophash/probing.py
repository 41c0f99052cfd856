"""Hash mixing, capacity planning, and the probing schemes.

Probing runs in two tiers: an outer scheme that picks the start of a
32-slot window for each attempt, and an inner linear pass over that
window executed by a probe group of width 1..32. The outer scheme
defaults to double hashing with step sizes that are multiples of the
window width; together with a capacity of ``32 * p`` for prime ``p``
this guarantees the window starts never cycle before all ``p`` windows
have been visited, and that those windows tile the whole table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

MASK64 = (1 << 64) - 1
WINDOW_WIDTH = 32
GROUP_WIDTHS = (1, 2, 4, 8, 16, 32)

_MIX_MUL_1 = 0xFF51AFD7ED558CCD
_MIX_MUL_2 = 0xC4CEB9FE1A85EC53
_MIX_SHIFT = 33
# Golden-ratio increment; mixed in up front so that 0 does not map to 0,
# and doubling as the seed that separates the step hash from the main hash.
STEP_SEED = 0x9E3779B97F4A7C15


class ProbeExhausted(Exception):
    """Raised when a probe sequence runs past its attempt budget."""


def mix64(key: int) -> int:
    """Finalizer-style 64-bit mixer (two multiply / xor-shift rounds)."""
    x = (key + STEP_SEED) & MASK64
    x ^= x >> _MIX_SHIFT
    x = (x * _MIX_MUL_1) & MASK64
    x ^= x >> _MIX_SHIFT
    x = (x * _MIX_MUL_2) & MASK64
    x ^= x >> _MIX_SHIFT
    return x


def mix64_array(keys: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` over a uint64 array."""
    x = np.asarray(keys, dtype=np.uint64).copy()
    with np.errstate(over="ignore"):
        x += np.uint64(STEP_SEED)
        x ^= x >> np.uint64(_MIX_SHIFT)
        x *= np.uint64(_MIX_MUL_1)
        x ^= x >> np.uint64(_MIX_SHIFT)
        x *= np.uint64(_MIX_MUL_2)
        x ^= x >> np.uint64(_MIX_SHIFT)
    return x


@dataclass(frozen=True)
class HashFn:
    """A seeded instance of the 64-bit mixer.

    Seed 0 is the main slot hash; ``STEP_SEED`` derives the independent
    step hash used by double hashing.
    """

    seed: int = 0

    def value(self, key: int) -> int:
        return mix64(self.seed ^ key)

    def values(self, keys: np.ndarray) -> np.ndarray:
        return mix64_array(np.asarray(keys, dtype=np.uint64) ^ np.uint64(self.seed))


_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime_at_least(n: int) -> int:
    while not is_prime(n):
        n += 1
    return n


@dataclass(frozen=True)
class CapacityPlan:
    """Capacity ``c = 32 * p`` with prime window count ``p``."""

    p: int
    c: int

    def __post_init__(self) -> None:
        if not is_prime(self.p):
            raise ValueError(f"window count {self.p} is not prime")
        if self.c != WINDOW_WIDTH * self.p:
            raise ValueError("capacity must equal 32 * p")

    @property
    def window_count(self) -> int:
        return self.p


def choose_capacity(min_slots: int) -> CapacityPlan:
    """Smallest plan with ``32 * p >= min_slots`` and ``p`` prime."""
    if min_slots < WINDOW_WIDTH:
        raise ValueError("min_slots must be at least 32")
    p = next_prime_at_least(max(2, -(-min_slots // WINDOW_WIDTH)))
    return CapacityPlan(p=p, c=WINDOW_WIDTH * p)


class ProbingScheme(Enum):
    LP = "lp"
    QP = "qp"
    DH = "dh"
    COOPERATIVE = "cooperative"


def lp(h: int, l: int, c: int) -> int:
    """Linear probing position for attempt ``l``."""
    return (h + l) % c

def qp(h: int, l: int, c: int) -> int:
    """Quadratic probing position for attempt ``l``."""
    return (h + l * l) % c


@dataclass(frozen=True)
class ProbingConfig:
    """Everything a table needs to turn a key into slot positions."""

    plan: CapacityPlan
    scheme: ProbingScheme = ProbingScheme.COOPERATIVE
    group_width: int = 32
    window_width: int = WINDOW_WIDTH
    max_outer_attempts: int | None = None
    hash: HashFn = field(default_factory=HashFn)
    step_hash: HashFn = field(default_factory=lambda: HashFn(STEP_SEED))

    def __post_init__(self) -> None:
        if self.group_width not in GROUP_WIDTHS:
            raise ValueError(f"group_width must be one of {GROUP_WIDTHS}")
        if self.window_width != WINDOW_WIDTH:
            raise ValueError("window width is fixed at 32")
        if self.window_width % self.group_width != 0:
            raise ValueError("group_width must divide window_width")
        if self.max_outer_attempts is None:
            object.__setattr__(self, "max_outer_attempts", self.plan.p)
        if not 1 <= self.max_outer_attempts <= self.plan.p:
            raise ValueError("max_outer_attempts must be in [1, p]")


def dh_step(key: int, plan: CapacityPlan, step_hash: HashFn = HashFn(STEP_SEED)) -> int:
    """Double-hashing step: a multiple of 32 with multiplier in [1, p-1].

    With prime ``p`` this makes the window-start sequence
    ``(h + j*step) mod c`` hit all ``p`` windows before repeating.
    """
    p = plan.p
    if p == 2:
        return WINDOW_WIDTH
    return WINDOW_WIDTH * (1 + step_hash.value(key) % (p - 1))


def dh_step_array(keys: np.ndarray, plan: CapacityPlan,
                  step_hash: HashFn = HashFn(STEP_SEED)) -> np.ndarray:
    p = plan.p
    if p == 2:
        return np.full(len(keys), WINDOW_WIDTH, dtype=np.uint64)
    mixed = step_hash.values(keys)
    return np.uint64(WINDOW_WIDTH) * (np.uint64(1) + mixed % np.uint64(p - 1))


def window_start(h: int, step: int, attempt: int, c: int) -> int:
    return (h + attempt * step) % c


def window_starts(key: int, cfg: ProbingConfig) -> Iterator[int]:
    """Outer window-start sequence for ``key`` under ``cfg.scheme``.

    LP and QP are offered at window granularity for benchmarking
    comparisons; tables default to the cooperative scheme.
    """
    c = cfg.plan.c
    h = cfg.hash.value(key) % c
    scheme = cfg.scheme
    if scheme in (ProbingScheme.COOPERATIVE, ProbingScheme.DH):
        step = dh_step(key, cfg.plan, cfg.step_hash)
    elif scheme == ProbingScheme.LP:
        step = WINDOW_WIDTH
    else:  # QP: quadratically spaced window starts
        for j in range(cfg.max_outer_attempts):
            yield (h + j * j * WINDOW_WIDTH) % c
        return
    for j in range(cfg.max_outer_attempts):
        yield (h + j * step) % c


def cops_positions(key: int, cfg: ProbingConfig, global_attempt: int) -> list[int]:
    """Slot indices examined by one group step of the cooperative scheme.

    ``global_attempt`` counts probed slots; attempt ``i`` falls in outer
    window ``i // 32`` at in-window offset ``i % 32``, and the group
    covers ``group_width`` consecutive slots from there. Because groups
    narrower than 32 walk the same window linearly before moving on, the
    concatenated position sequence is identical for every group width.
    """
    w = cfg.window_width
    j, offset = divmod(global_attempt, w)
    if j >= cfg.max_outer_attempts:
        raise ProbeExhausted(
            f"attempt {global_attempt} exceeds {cfg.max_outer_attempts} windows")
    c = cfg.plan.c
    h = cfg.hash.value(key) % c
    step = dh_step(key, cfg.plan, cfg.step_hash)
    start = (h + j * step) % c
    return [(start + offset + t) % c for t in range(cfg.group_width)]


def probe_order(key: int, cfg: ProbingConfig, limit: int | None = None) -> list[int]:
    """Full ordered slot sequence a probe visits (for tests and tooling)."""
    out: list[int] = []
    c = cfg.plan.c
    for start in window_starts(key, cfg):
        out.extend((start + t) % c for t in range(cfg.window_width))
        if limit is not None and len(out) >= limit:
            return out[:limit]
    return out
