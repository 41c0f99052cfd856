"""Concurrent open-addressing hash tables with cooperative window probing.

Data structures:

- :class:`SingleValueHashTable` - each key occurs at most once
- :class:`MultiValueHashTable` - every (key, value) pair gets a slot
- :class:`BucketListHashTable` - keys stored once, values chained in
  growing buckets from a pre-allocated pool
- :class:`DistributedTable` - sharded facade over any of the above

All tables share the probing machinery from :mod:`coophash.probing`
(double-hashed 32-slot windows scanned by probe groups) and the layout
abstractions from :mod:`coophash.layout`.
"""
from .layout import (LayoutKind, LayoutUnsupported, Sentinels, SlotArray,
                     default_sentinels, new_slot_array, pack_pair, unpack_pair)
from .probing import (CapacityPlan, HashFn, ProbeExhausted, ProbingConfig,
                      ProbingScheme, choose_capacity, cops_positions, dh_step,
                      is_prime, lp, mix64, qp, window_starts)
from .single_table import (InsertStatus, ProbeStats, SingleValueHashTable)
from .multi_table import MultiValueHashTable, exclusive_prefix_sum
from .bucket_list import (BucketListHashTable, BucketPool, ContentionTimeout,
                          GrowthPolicy, HandleState, PoolExhausted,
                          next_bucket_size, pack_handle, unpack_handle)
from .distributed import (DistributedTable, PartitionPlan, ShardMode,
                          ShardRouter, exchange, multi_split)

__all__ = [
    "LayoutKind", "LayoutUnsupported", "Sentinels", "SlotArray",
    "default_sentinels", "new_slot_array", "pack_pair", "unpack_pair",
    "CapacityPlan", "HashFn", "ProbeExhausted", "ProbingConfig",
    "ProbingScheme", "choose_capacity", "cops_positions", "dh_step",
    "is_prime", "lp", "mix64", "qp", "window_starts",
    "InsertStatus", "ProbeStats", "SingleValueHashTable",
    "MultiValueHashTable", "exclusive_prefix_sum",
    "BucketListHashTable", "BucketPool", "ContentionTimeout", "GrowthPolicy",
    "HandleState", "PoolExhausted", "next_bucket_size", "pack_handle",
    "unpack_handle",
    "DistributedTable", "PartitionPlan", "ShardMode", "ShardRouter",
    "exchange", "multi_split",
]

__version__ = "0.1.0"
