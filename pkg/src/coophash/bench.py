"""Benchmark CLI: density, multiplicity, growth-policy, and shard sweeps.

Every sweep point builds a fresh table, times the bulk insert and bulk
retrieve phases, and verifies the results against an in-memory oracle
before reporting a single CSV row per (point, operation). A benchmark
that returns wrong answers aborts the run with a nonzero exit code; a
fast wrong answer is worthless.

Timing covers only the bulk table operation. Workload generation and
verification happen outside the clock, with input data fully
materialized in memory beforehand.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np

from .bucket_list import BucketListHashTable, GrowthPolicy
from .distributed import DistributedTable, ShardMode
from .layout import LayoutKind, LayoutUnsupported
from .multi_table import MultiValueHashTable
from .probing import choose_capacity
from .single_table import InsertStatus, SingleValueHashTable

DEFAULT_N = 1 << 20
DEFAULT_DENSITIES = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95)
DEFAULT_MULTIPLICITIES = (1, 16, 256, 4096)
POOL_HEADROOM = 2.5


class VerificationError(Exception):
    """A benchmark produced results that disagree with the oracle."""


@dataclass(frozen=True)
class WorkloadSpec:
    n: int
    r: int = 1
    key_bits: int = 32
    seed: int = 42
    target_density: float = 0.8

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 1 <= self.r <= self.n:
            raise ValueError("multiplicity r must satisfy 1 <= r <= n")
        if self.key_bits not in (32, 64):
            raise ValueError("key_bits must be 32 or 64")
        if not 0 < self.target_density < 1:
            raise ValueError("target density must lie in (0, 1)")


def gen_unique(spec: WorkloadSpec) -> list[int]:
    """n pairwise-distinct non-sentinel keys, deterministic under seed."""
    rng = np.random.default_rng(spec.seed)
    high = (1 << spec.key_bits) - 2  # keeps both sentinels out of range
    if spec.n > high - 1:
        raise ValueError("key space too small for n unique keys")
    acc = np.empty(0, dtype=np.uint64)
    while len(acc) < spec.n:
        need = spec.n - len(acc)
        draw = rng.integers(1, high, size=need + need // 8 + 16, dtype=np.uint64)
        acc = np.unique(np.concatenate([acc, draw]))
    return rng.permutation(acc)[:spec.n].tolist()


def gen_multiplicity(spec: WorkloadSpec) -> list[int]:
    """n keys with mean multiplicity r, drawn uniformly from [1, n // r].

    r = 1 degenerates to the n unique keys 1..n in shuffled order, so
    querying the full range 1..n always returns exactly n values.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.r == 1:
        return rng.permutation(np.arange(1, spec.n + 1, dtype=np.uint64)).tolist()
    return rng.integers(1, spec.n // spec.r + 1, size=spec.n,
                        dtype=np.uint64).tolist()


@dataclass
class BenchRecord:
    structure: str
    operation: str
    layout: str
    group_width: int
    n: int
    r: int
    target_density: float
    achieved_density: float
    seconds: float
    mops: float
    probe_attempts_mean: float
    shards: int = 1


CSV_FIELDS = [f.name for f in fields(BenchRecord)]


def emit_csv(records: Sequence[BenchRecord], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for rec in records:
            writer.writerow([getattr(rec, name) for name in CSV_FIELDS])


def load_csv(path: str) -> list[BenchRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_FIELDS:
            raise ValueError(f"unexpected CSV header: {reader.fieldnames}")
        casts = {f.name: f.type for f in fields(BenchRecord)}
        for row in reader:
            kwargs = {}
            for name in CSV_FIELDS:
                typ = casts[name]
                if typ == "int":
                    kwargs[name] = int(row[name])
                elif typ == "float":
                    kwargs[name] = float(row[name])
                else:
                    kwargs[name] = row[name]
            out.append(BenchRecord(**kwargs))
    return out


def _timed(op: Callable[[], object]) -> tuple[float, object]:
    t0 = time.perf_counter()
    result = op()
    return time.perf_counter() - t0, result


def _mean_attempts(table, before_ops: int, before_attempts: int) -> float:
    counters = table.probe_counters()
    ops = counters.ops - before_ops
    return (counters.attempts - before_attempts) / ops if ops else 0.0


def _check_inserted(statuses: Sequence[InsertStatus], context: str) -> None:
    bad = sum(1 for s in statuses if s != InsertStatus.INSERTED)
    if bad:
        raise VerificationError(f"{context}: {bad} of {len(statuses)} inserts failed")


# -- sweeps ---------------------------------------------------------------


def run_single_sweep(densities: Sequence[float], spec: WorkloadSpec, *,
                     layout: str = "soa", group_width: int = 32,
                     threads: int = 1, repeats: int = 10) -> list[BenchRecord]:
    keys = gen_unique(spec)
    values = list(range(1, spec.n + 1))
    pairs = list(zip(keys, values))
    records: list[BenchRecord] = []
    for rho in sorted(densities):
        ins_secs = ret_secs = 0.0
        ins_attempts = ret_attempts = 0.0
        achieved = 0.0
        for _ in range(repeats):
            table = SingleValueHashTable(
                int(np.ceil(spec.n / rho)), layout=layout,
                key_bits=spec.key_bits,
                value_bits=32 if layout == "packed" else 64,
                group_width=group_width, workers=threads)
            c = table.probe_counters()
            ops0, att0 = c.ops, c.attempts
            secs, statuses = _timed(lambda: table.insert_bulk(pairs))
            _check_inserted(statuses, f"single-sweep rho={rho}")
            ins_secs += secs
            ins_attempts += _mean_attempts(table, ops0, att0)
            achieved = table.load_factor()

            c = table.probe_counters()
            ops0, att0 = c.ops, c.attempts
            secs, got = _timed(lambda: table.retrieve_bulk(keys))
            if got != values:
                raise VerificationError(
                    f"single-sweep rho={rho}: retrieval mismatch")
            ret_secs += secs
            ret_attempts += _mean_attempts(table, ops0, att0)
        for op, secs, attempts in (("insert", ins_secs, ins_attempts),
                                   ("retrieve", ret_secs, ret_attempts)):
            mean_secs = secs / repeats
            records.append(BenchRecord(
                structure="single_value", operation=op, layout=layout,
                group_width=group_width, n=spec.n, r=1,
                target_density=rho, achieved_density=achieved,
                seconds=mean_secs, mops=spec.n / mean_secs / 1e6,
                probe_attempts_mean=attempts / repeats))
    return records


def _multi_reference(pairs: Sequence[tuple[int, int]]) -> dict[int, list[int]]:
    ref: dict[int, list[int]] = {}
    for k, v in pairs:
        ref.setdefault(k, []).append(v)
    for seg in ref.values():
        seg.sort()
    return ref


def _verify_multi(queries: Sequence[int], offsets: Sequence[int],
                  flat: Sequence[int], ref: dict[int, list[int]],
                  context: str) -> None:
    if offsets[-1] != sum(len(v) for v in ref.values()):
        raise VerificationError(
            f"{context}: retrieved {offsets[-1]} values, "
            f"expected {sum(len(v) for v in ref.values())}")
    for i, q in enumerate(queries):
        seg = sorted(flat[offsets[i]:offsets[i + 1]])
        if seg != ref.get(q, []):
            raise VerificationError(f"{context}: value mismatch for key {q}")


def run_multi_sweep(multiplicities: Sequence[int], spec: WorkloadSpec, *,
                    layout: str = "soa", group_width: int = 32,
                    threads: int = 1, repeats: int = 10) -> list[BenchRecord]:
    records: list[BenchRecord] = []
    for r in multiplicities:
        wspec = WorkloadSpec(n=spec.n, r=r, key_bits=spec.key_bits,
                             seed=spec.seed, target_density=spec.target_density)
        keys = gen_multiplicity(wspec)
        pairs = list(zip(keys, range(1, wspec.n + 1)))
        queries = list(range(1, wspec.n + 1))
        ref = _multi_reference(pairs)
        rho = spec.target_density
        ins_secs = ret_secs = 0.0
        ins_attempts = ret_attempts = 0.0
        achieved = 0.0
        for _ in range(repeats):
            table = MultiValueHashTable(
                int(np.ceil(wspec.n / rho)), layout=layout,
                key_bits=spec.key_bits,
                value_bits=32 if layout == "packed" else 64,
                group_width=group_width, workers=threads)
            c = table.probe_counters()
            ops0, att0 = c.ops, c.attempts
            secs, statuses = _timed(lambda: table.insert_bulk(pairs))
            _check_inserted(statuses, f"multi-sweep r={r}")
            ins_secs += secs
            ins_attempts += _mean_attempts(table, ops0, att0)
            achieved = table.load_factor()

            c = table.probe_counters()
            ops0, att0 = c.ops, c.attempts
            secs, (offsets, flat) = _timed(lambda: table.retrieve_bulk(queries))
            _verify_multi(queries, offsets, flat, ref, f"multi-sweep r={r}")
            ret_secs += secs
            ret_attempts += _mean_attempts(table, ops0, att0)
        for op, secs, attempts in (("insert", ins_secs, ins_attempts),
                                   ("retrieve", ret_secs, ret_attempts)):
            mean_secs = secs / repeats
            records.append(BenchRecord(
                structure="multi_value", operation=op, layout=layout,
                group_width=group_width, n=wspec.n, r=r,
                target_density=rho, achieved_density=achieved,
                seconds=mean_secs, mops=wspec.n / mean_secs / 1e6,
                probe_attempts_mean=attempts / repeats))
    return records


def _parse_policy(name: str, r: int) -> tuple[str, GrowthPolicy]:
    if name == "default":
        return "bucket_list[s0=1,growth=1.1]", GrowthPolicy(1, "1.1")
    if name == "optimal":
        return f"bucket_list[s0={r},growth=1.0]", GrowthPolicy(max(1, r), "1.0")
    s0, _, lam = name.partition(":")
    return (f"bucket_list[s0={s0},growth={lam}]",
            GrowthPolicy(int(s0), lam))


def run_bucket_sweep(policies: Sequence[str], spec: WorkloadSpec, *,
                     group_width: int = 32, threads: int = 1,
                     repeats: int = 10) -> list[BenchRecord]:
    keys = gen_multiplicity(spec)
    pairs = list(zip(keys, range(1, spec.n + 1)))
    queries = list(range(1, spec.n + 1))
    ref = _multi_reference(pairs)
    distinct = len(ref)
    rho = spec.target_density
    pool_slots = int(spec.n * POOL_HEADROOM) + 64
    records: list[BenchRecord] = []
    for name in policies:
        label, policy = _parse_policy(name, spec.r)
        ins_secs = ret_secs = 0.0
        achieved = 0.0
        for _ in range(repeats):
            table = BucketListHashTable(
                int(np.ceil(distinct / rho)), pool_slots,
                growth=GrowthPolicy(policy.initial_size, policy.factor),
                key_bits=spec.key_bits, group_width=group_width,
                workers=threads)
            secs, statuses = _timed(lambda: table.insert_bulk(pairs))
            _check_inserted(statuses, f"bucket-sweep {name}")
            ins_secs += secs
            achieved = table.key_load_factor()
            secs, (offsets, flat) = _timed(lambda: table.retrieve_bulk(queries))
            _verify_multi(queries, offsets, flat, ref, f"bucket-sweep {name}")
            ret_secs += secs
        for op, secs in (("insert", ins_secs), ("retrieve", ret_secs)):
            mean_secs = secs / repeats
            records.append(BenchRecord(
                structure=label, operation=op, layout="soa",
                group_width=group_width, n=spec.n, r=spec.r,
                target_density=rho, achieved_density=achieved,
                seconds=mean_secs, mops=spec.n / mean_secs / 1e6,
                probe_attempts_mean=0.0))
    return records


def run_distributed_sweep(shard_counts: Sequence[int], spec: WorkloadSpec, *,
                          layout: str = "soa", group_width: int = 32,
                          threads: int = 1, repeats: int = 10,
                          mode: ShardMode = ShardMode.DISTRIBUTED
                          ) -> list[BenchRecord]:
    keys = gen_multiplicity(spec)
    pairs = list(zip(keys, range(1, spec.n + 1)))
    queries = list(range(1, spec.n + 1))
    ref = _multi_reference(pairs)
    rho = spec.target_density
    records: list[BenchRecord] = []
    for shards in shard_counts:
        per_shard = int(np.ceil(spec.n / shards / rho))
        ins_secs = ret_secs = 0.0
        achieved = 0.0
        for _ in range(repeats):
            with DistributedTable(
                    shards,
                    lambda s: MultiValueHashTable(
                        per_shard, layout=layout, key_bits=spec.key_bits,
                        value_bits=32 if layout == "packed" else 64,
                        group_width=group_width),
                    mode=mode) as table:
                secs, statuses = _timed(lambda: table.insert_bulk(pairs))
                _check_inserted(statuses, f"distributed-sweep shards={shards}")
                ins_secs += secs
                achieved = (sum(t.occupied for t in table.shards)
                            / sum(t.capacity for t in table.shards))
                secs, (offsets, flat) = _timed(lambda: table.retrieve_bulk(queries))
                _verify_multi(queries, offsets, flat, ref,
                              f"distributed-sweep shards={shards}")
                ret_secs += secs
        for op, secs in (("insert", ins_secs), ("retrieve", ret_secs)):
            mean_secs = secs / repeats
            records.append(BenchRecord(
                structure="distributed_multi", operation=op, layout=layout,
                group_width=group_width, n=spec.n, r=spec.r,
                target_density=rho, achieved_density=achieved,
                seconds=mean_secs, mops=spec.n / mean_secs / 1e6,
                probe_attempts_mean=0.0, shards=shards))
    return records


# -- CLI --------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="hash table sweep benchmarks with built-in verification")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=DEFAULT_N,
                        help="elements per sweep point (default 2^20)")
    common.add_argument("--r", type=int, default=16,
                        help="mean key multiplicity for multi-value workloads")
    common.add_argument("--density", type=float, default=0.8,
                        help="target storage density for fixed-density sweeps")
    common.add_argument("--densities", type=_float_list,
                        default=list(DEFAULT_DENSITIES),
                        help="comma list of target densities (single-sweep)")
    common.add_argument("--multiplicities", type=_int_list,
                        default=list(DEFAULT_MULTIPLICITIES),
                        help="comma list of r values (multi-sweep)")
    common.add_argument("--group-width", type=int, default=32,
                        choices=(1, 2, 4, 8, 16, 32))
    common.add_argument("--layout", default="soa",
                        choices=[k.value for k in LayoutKind])
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads inside the table under test")
    common.add_argument("--shards", type=_int_list, default=[1, 2, 4],
                        help="comma list of shard counts (distributed-sweep)")
    common.add_argument("--key-bits", type=int, default=32, choices=(32, 64))
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--repeats", type=int, default=10,
                        help="timed repetitions averaged per sweep point")
    common.add_argument("--policies", default="default,optimal",
                        help="comma list: default, optimal, or s0:growth")
    common.add_argument("--out", required=True, help="output CSV path")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("single-sweep", "multi-sweep", "bucket-sweep",
                 "distributed-sweep"):
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = WorkloadSpec(n=args.n, r=args.r, key_bits=args.key_bits,
                            seed=args.seed, target_density=args.density)
    except ValueError as err:
        print(f"invalid workload: {err}", file=sys.stderr)
        return 2
    try:
        if args.command == "single-sweep":
            records = run_single_sweep(
                args.densities, spec, layout=args.layout,
                group_width=args.group_width, threads=args.threads,
                repeats=args.repeats)
        elif args.command == "multi-sweep":
            records = run_multi_sweep(
                args.multiplicities, spec, layout=args.layout,
                group_width=args.group_width, threads=args.threads,
                repeats=args.repeats)
        elif args.command == "bucket-sweep":
            records = run_bucket_sweep(
                [p for p in args.policies.split(",") if p], spec,
                group_width=args.group_width, threads=args.threads,
                repeats=args.repeats)
        else:
            records = run_distributed_sweep(
                args.shards, spec, layout=args.layout,
                group_width=args.group_width, threads=args.threads,
                repeats=args.repeats)
    except VerificationError as err:
        print(f"verification failed: {err}", file=sys.stderr)
        return 2
    except (ValueError, LayoutUnsupported) as err:
        print(f"invalid configuration: {err}", file=sys.stderr)
        return 2
    emit_csv(records, args.out)
    for rec in records:
        print(f"{rec.structure:>28} {rec.operation:>8} "
              f"rho={rec.target_density:.2f} r={rec.r} shards={rec.shards} "
              f"{rec.mops:8.3f} Mops")
    return 0


if __name__ == "__main__":
    sys.exit(main())
