"""Sharded table layer: multi-split partitioning and all-to-all exchange.

Shards are independent in-process table instances, each served by one
worker thread. Bulk calls run in barrier-separated phases: the batch is
scattered to the workers, each worker stable-partitions its sub-batch
by destination shard (multi-split), an all-to-all exchange delivers the
segments, every shard applies the local table operation in parallel,
and a gather restores the caller's input order.

Two modes mirror two placement policies. *Distributed* routes every key
to exactly one shard by hash, so per-key results never need merging.
*Independent* scatters inserts round-robin and broadcasts queries to
all shards, merging results (for single-value tables the lowest shard
id wins when several shards answer).
"""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

from .multi_table import exclusive_prefix_sum
from .probing import mix64
from .single_table import InsertStatus


class ShardMode(Enum):
    DISTRIBUTED = "distributed"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class ShardRouter:
    """Deterministic key -> shard assignment from the high hash bits."""

    num_shards: int

    def __post_init__(self) -> None:
        if self.num_shards < 1:
            raise ValueError("need at least one shard")

    def route(self, key: int) -> int:
        return (mix64(key) >> 32) % self.num_shards


@dataclass(frozen=True)
class PartitionPlan:
    """Stable permutation grouping input indices by shard, plus offsets."""

    permutation: list[int]
    offsets: list[int]

    def segment(self, shard: int) -> list[int]:
        return self.permutation[self.offsets[shard]:self.offsets[shard + 1]]


def multi_split(keys: Sequence[int], router: ShardRouter) -> PartitionPlan:
    """Stable partition of a batch by destination shard."""
    buckets: list[list[int]] = [[] for _ in range(router.num_shards)]
    route = router.route
    for i, k in enumerate(keys):
        buckets[route(k)].append(i)
    perm: list[int] = []
    for b in buckets:
        perm.extend(b)
    offsets = exclusive_prefix_sum([len(b) for b in buckets])
    return PartitionPlan(permutation=perm, offsets=offsets)


def exchange(outboxes: Sequence[Sequence[Sequence]]) -> list[list]:
    """All-to-all: inbox[t] is the concatenation of outboxes[s][t] over s."""
    num = len(outboxes)
    inboxes: list[list] = [[] for _ in range(num)]
    for s in range(num):
        if len(outboxes[s]) != num:
            raise ValueError("every outbox must address every shard")
        for t in range(num):
            inboxes[t].extend(outboxes[s][t])
    return inboxes


class DistributedTable:
    """Bulk facade over per-shard tables (single-, multi-, or bucket-value).

    The shard tables are built by ``shard_factory(shard_id)``. Whether a
    query returns one value or many follows the underlying table kind,
    detected by the presence of a counting pass. Concurrent bulk calls
    on the same facade serialize; element concurrency happens inside the
    shard tables.
    """

    def __init__(self, num_shards: int, shard_factory: Callable[[int], object],
                 mode: ShardMode = ShardMode.DISTRIBUTED):
        self.router = ShardRouter(num_shards)
        self.mode = mode
        self.shards = [shard_factory(s) for s in range(num_shards)]
        self._multi = hasattr(self.shards[0], "count_bulk")
        self._pool = ThreadPoolExecutor(max_workers=num_shards)
        self._bulk_lock = threading.Lock()

    @property
    def num_shards(self) -> int:
        return self.router.num_shards

    def _run_phase(self, job: Callable[[int], object]) -> list:
        futures = [self._pool.submit(job, s) for s in range(self.num_shards)]
        return [f.result() for f in futures]

    def _route_batch(self, items: Sequence, keys: Sequence[int]) -> list[list]:
        """Scatter -> per-worker multi-split -> all-to-all exchange.

        Returns per-shard inboxes of (original_index, item) pairs.
        """
        num = self.num_shards
        # Each worker starts out holding a round-robin share of the batch.
        shares: list[list[int]] = [list(range(s, len(items), num))
                                   for s in range(num)]

        def split_one(s: int) -> list[list]:
            plan = multi_split([keys[i] for i in shares[s]], self.router)
            return [[(shares[s][j], items[shares[s][j]]) for j in plan.segment(t)]
                    for t in range(num)]

        outboxes = self._run_phase(split_one)
        return exchange(outboxes)

    # -- insertion ---------------------------------------------------------

    def insert_bulk(self, pairs: Sequence[tuple[int, int]]) -> list[InsertStatus]:
        with self._bulk_lock:
            pairs = list(pairs)
            n = len(pairs)
            if self.mode == ShardMode.DISTRIBUTED:
                inboxes = self._route_batch(pairs, [k for k, _ in pairs])
            else:
                # Independent mode: data is simply scattered round-robin.
                inboxes = [[(i, pairs[i]) for i in range(s, n, self.num_shards)]
                           for s in range(self.num_shards)]
            results = self._run_phase(
                lambda s: self.shards[s].insert_bulk([p for _, p in inboxes[s]]))
            statuses: list[InsertStatus] = [InsertStatus.INVALID_KEY] * n
            for s in range(self.num_shards):
                for j, (i, _) in enumerate(inboxes[s]):
                    statuses[i] = results[s][j]
            return statuses

    # -- retrieval -----------------------------------------------------------

    def retrieve_bulk(self, keys: Sequence[int]):
        """Route (or broadcast) queries, run per-shard lookups, gather.

        Single-value shards: returns a list of optional values aligned to
        ``keys``. Multi-value shards: returns (offsets, flat values).
        """
        with self._bulk_lock:
            keys = list(keys)
            if self.mode == ShardMode.DISTRIBUTED:
                return self._retrieve_distributed(keys)
            return self._retrieve_independent(keys)

    def _retrieve_distributed(self, keys: list[int]):
        inboxes = self._route_batch(keys, keys)
        results = self._run_phase(
            lambda s: self.shards[s].retrieve_bulk([k for _, k in inboxes[s]]))
        if not self._multi:
            out: list[Optional[int]] = [None] * len(keys)
            for s in range(self.num_shards):
                for j, (i, _) in enumerate(inboxes[s]):
                    out[i] = results[s][j]
            return out
        per_key: list[list[int]] = [[] for _ in range(len(keys))]
        for s in range(self.num_shards):
            offsets, flat = results[s]
            for j, (i, _) in enumerate(inboxes[s]):
                per_key[i] = flat[offsets[j]:offsets[j + 1]]
        return self._flatten(per_key)

    def _retrieve_independent(self, keys: list[int]):
        results = self._run_phase(lambda s: self.shards[s].retrieve_bulk(keys))
        if not self._multi:
            out: list[Optional[int]] = [None] * len(keys)
            for s in range(self.num_shards):  # lowest shard id wins
                vals = results[s]
                for i in range(len(keys)):
                    if out[i] is None and vals[i] is not None:
                        out[i] = vals[i]
            return out
        per_key: list[list[int]] = [[] for _ in range(len(keys))]
        for s in range(self.num_shards):
            offsets, flat = results[s]
            for i in range(len(keys)):
                per_key[i].extend(flat[offsets[i]:offsets[i + 1]])
        return self._flatten(per_key)

    @staticmethod
    def _flatten(per_key: list[list[int]]) -> tuple[list[int], list[int]]:
        offsets = exclusive_prefix_sum([len(seg) for seg in per_key])
        flat: list[int] = []
        for seg in per_key:
            flat.extend(seg)
        return offsets, flat

    def count_bulk(self, keys: Sequence[int]) -> list[int]:
        if not self._multi:
            raise TypeError("count_bulk needs multi-value shard tables")
        with self._bulk_lock:
            keys = list(keys)
            if self.mode == ShardMode.DISTRIBUTED:
                inboxes = self._route_batch(keys, keys)
                results = self._run_phase(
                    lambda s: self.shards[s].count_bulk([k for _, k in inboxes[s]]))
                counts = [0] * len(keys)
                for s in range(self.num_shards):
                    for j, (i, _) in enumerate(inboxes[s]):
                        counts[i] = results[s][j]
                return counts
            results = self._run_phase(lambda s: self.shards[s].count_bulk(keys))
            return [sum(results[s][i] for s in range(self.num_shards))
                    for i in range(len(keys))]

    def close(self) -> None:
        self._pool.shutdown(wait=True)

    def __enter__(self) -> "DistributedTable":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
