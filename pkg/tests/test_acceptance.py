"""Acceptance suite: one test per criterion, printed pass/fail lines.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the report.
Scales follow the criteria (n = 2^20 workloads); the whole module takes
a few minutes on a laptop-class machine.
"""
import random
import threading
import time
from fractions import Fraction
from math import ceil

from coophash.bench import WorkloadSpec, gen_multiplicity, gen_unique
from coophash.bucket_list import BucketListHashTable, GrowthPolicy
from coophash.distributed import DistributedTable, ShardMode
from coophash.layout import LayoutKind
from coophash.multi_table import MultiValueHashTable
from coophash.probing import (GROUP_WIDTHS, CapacityPlan, ProbingConfig,
                              choose_capacity, cops_positions, window_starts)
from coophash.single_table import InsertStatus, SingleValueHashTable

INSERTED = InsertStatus.INSERTED
N20 = 1 << 20


def _report(num: int, desc: str, fn) -> None:
    start = time.perf_counter()
    try:
        extra = fn() or ""
    except BaseException:
        print(f"[FAIL] criterion {num:2d}: {desc}")
        raise
    secs = time.perf_counter() - start
    print(f"[PASS] criterion {num:2d}: {desc} ({secs:.1f}s){extra}")


def _split_workers(keys, workers):
    per = len(keys) // workers
    return [keys[w * per:(w + 1) * per] for w in range(workers)]


def test_criterion_01_single_value_oracle_equivalence():
    def run():
        spec = WorkloadSpec(n=2 * N20, key_bits=32, seed=10_001)
        t0 = time.perf_counter()
        pool = gen_unique(spec)
        present, absent = pool[:N20], pool[N20:]
        values = [(k * 3) & 0xFFFFFFFF for k in present]
        table = SingleValueHashTable(ceil(N20 / 0.9), key_bits=32,
                                     value_bits=32)
        statuses = table.insert_bulk(list(zip(present, values)))
        assert all(s == INSERTED for s in statuses)
        hits = table.retrieve_bulk(present)
        assert hits == values  # 100% hit with exact values
        misses = table.retrieve_bulk(absent)
        assert misses == [None] * N20  # 100% miss
        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0, f"took {elapsed:.1f}s, budget is 30s"

    _report(1, "single-value oracle equivalence at rho=0.90, n=2^20", run)


def test_criterion_02_high_density_build():
    def run():
        spec = WorkloadSpec(n=N20, key_bits=32, seed=10_002)
        keys = gen_unique(spec)
        values = [(k + 7) & 0xFFFFFFFF for k in keys]
        table = SingleValueHashTable(ceil(N20 / 0.95), key_bits=32,
                                     value_bits=32)
        statuses = table.insert_bulk(list(zip(keys, values)))
        assert all(s == INSERTED for s in statuses)
        assert table.load_factor() >= 0.93
        assert table.retrieve_bulk(keys) == values
        mean = table.probe_counters().mean_attempts
        assert mean > 0 and mean == mean  # finite, not NaN
        return f" [mean probe attempts {mean:.2f}]"

    _report(2, "build and full verification at rho=0.95", run)


def test_criterion_03_duplicate_and_tombstone_semantics():
    def run():
        table = SingleValueHashTable(1000)
        assert table.insert(11, 110) == INSERTED
        assert table.insert(11, 999) == InsertStatus.DUPLICATE_KEY
        assert table.retrieve(11) == 110  # value unchanged

        assert table.insert(22, 220) == INSERTED
        assert table.erase(22)
        assert table.retrieve(22) is None

        occupied = table.occupied
        assert table.erase(11)
        assert table.insert(11, 111) == INSERTED
        assert table.occupied == occupied  # slot reused, count restored
        assert table.retrieve(11) == 111

    _report(3, "duplicate warning, tombstone miss, slot reuse", run)


def test_criterion_04_multi_value_conservation():
    def run():
        for r in (1, 16, 1024):
            spec = WorkloadSpec(n=N20, r=r, key_bits=32, seed=10_004,
                                target_density=0.8)
            keys = gen_multiplicity(spec)
            pairs = list(zip(keys, range(1, N20 + 1)))
            table = MultiValueHashTable(ceil(N20 / 0.8), key_bits=32)
            statuses = table.insert_bulk(pairs)
            assert all(s == INSERTED for s in statuses), f"r={r}"

            ref: dict[int, list[int]] = {}
            for k, v in pairs:
                ref.setdefault(k, []).append(v)
            for seg in ref.values():
                seg.sort()

            queries = list(range(1, N20 + 1))
            offsets, flat = table.retrieve_bulk(queries)
            assert offsets[-1] == N20, f"r={r}: total {offsets[-1]} != n"
            empty: list[int] = []
            for i, q in enumerate(queries):
                seg = flat[offsets[i]:offsets[i + 1]]
                expect = ref.get(q, empty)
                if len(seg) > 1:
                    seg = sorted(seg)
                assert seg == expect, f"r={r}: mismatch at key {q}"

    _report(4, "multi-value multiset conservation at r in {1,16,1024}", run)


def test_criterion_05_probing_structure():
    def run():
        plan = choose_capacity(4096)
        rng = random.Random(10_005)
        for _ in range(1000):
            key = rng.randrange(1 << 64)
            baseline = None
            for g in GROUP_WIDTHS:
                cfg = ProbingConfig(plan=plan, group_width=g,
                                    max_outer_attempts=2)
                seq = []
                for i in range(0, 2 * 32, g):
                    seq.extend(cops_positions(key, cfg, i))
                if baseline is None:
                    baseline = seq
                assert seq == baseline, f"group width {g} diverges"
        cfg = ProbingConfig(plan=CapacityPlan(p=101, c=32 * 101))
        for _ in range(200):
            key = rng.randrange(1 << 64)
            starts = list(window_starts(key, cfg))
            assert len(set(starts)) == 101  # all windows distinct

    _report(5, "group-width consistency and window cycle-freeness", run)


def test_criterion_06_bucket_growth():
    def run():
        table = BucketListHashTable(64, 64, growth=GrowthPolicy(1, 2))
        for v in range(6):
            assert table.insert(5, v) == INSERTED
        assert table.chain_sizes(5) == [1, 2, 4]
        assert sorted(table.retrieve(5)) == list(range(6))

        policy = GrowthPolicy(1, "1.1")
        s = 1
        for i in range(20):
            assert policy.bucket_size(i) == s
            s = ceil(Fraction(11, 10) * s)

    _report(6, "bucket growth: doubling chain shape and 1.1 recurrence", run)


def test_criterion_07_bucket_list_concurrency():
    def run():
        total, workers = 10_000, 64
        for run_idx in range(20):
            table = BucketListHashTable(64, 4 * total,
                                        growth=GrowthPolicy(1, "1.1"))
            shares = [range(w, total, workers) for w in range(workers)]
            barrier = threading.Barrier(workers)
            failures: list[str] = []

            def job(vals):
                barrier.wait()
                for v in vals:
                    if table.insert(99, v) != INSERTED:
                        failures.append(f"value {v}")

            threads = [threading.Thread(target=job, args=(s,)) for s in shares]
            for th in threads:
                th.start()
            for th in threads:
                th.join()
            assert not failures, failures[:3]
            assert table.count(99) == total, f"run {run_idx}"
            assert sorted(table.retrieve(99)) == list(range(total)), f"run {run_idx}"

    _report(7, "64-worker same-key appends, 20 runs, exact multiset", run)


def test_criterion_08_concurrent_disjoint_and_same_key():
    def run():
        workers = 8
        spec = WorkloadSpec(n=N20, key_bits=32, seed=10_008)
        keys = gen_unique(spec)
        values = [(k ^ 0x5A5A5A5A) & 0xFFFFFFFF for k in keys]
        pairs = list(zip(keys, values))
        slices = _split_workers(pairs, workers)
        for run_idx in range(10):
            table = SingleValueHashTable(ceil(N20 / 0.8),
                                         layout=LayoutKind.PACKED_AOS,
                                         key_bits=32, value_bits=32)
            barrier = threading.Barrier(workers)
            results: list = [None] * workers

            def job(w):
                barrier.wait()
                results[w] = table.insert_bulk(slices[w])

            threads = [threading.Thread(target=job, args=(w,))
                       for w in range(workers)]
            for th in threads:
                th.start()
            for th in threads:
                th.join()
            assert all(s == INSERTED for r in results for s in r), f"run {run_idx}"
            assert table.occupied == N20
            assert table.retrieve_bulk(keys) == values, f"run {run_idx}"

            # Same-key race on the packed layout: one winner, one pair.
            race = SingleValueHashTable(256, layout=LayoutKind.PACKED_AOS,
                                        key_bits=32, value_bits=32)
            statuses: list = [None] * workers
            barrier2 = threading.Barrier(workers)

            def race_job(w):
                barrier2.wait()
                statuses[w] = race.insert(4242, 1000 + w)

            threads = [threading.Thread(target=race_job, args=(w,))
                       for w in range(workers)]
            for th in threads:
                th.start()
            for th in threads:
                th.join()
            assert statuses.count(INSERTED) == 1, f"run {run_idx}"
            assert race.retrieve(4242) in range(1000, 1000 + workers)

    _report(8, "8-worker disjoint inserts and packed same-key race, 10 runs", run)


def test_criterion_09_distributed_equivalence():
    def run():
        spec = WorkloadSpec(n=N20, r=16, key_bits=32, seed=10_009,
                            target_density=0.8)
        keys = gen_multiplicity(spec)
        pairs = list(zip(keys, range(1, N20 + 1)))
        mono = MultiValueHashTable(ceil(N20 / 0.8), key_bits=32)
        assert all(s == INSERTED for s in mono.insert_bulk(pairs))

        with DistributedTable(
                4, lambda s: MultiValueHashTable(ceil(N20 / 4 / 0.7),
                                                 key_bits=32),
                mode=ShardMode.DISTRIBUTED) as table:
            assert all(s == INSERTED for s in table.insert_bulk(pairs))
            distinct = sorted(set(keys))
            offsets, flat = table.retrieve_bulk(distinct)
            m_offsets, m_flat = mono.retrieve_bulk(distinct)
            for i in range(len(distinct)):
                mine = sorted(flat[offsets[i]:offsets[i + 1]])
                ref = sorted(m_flat[m_offsets[i]:m_offsets[i + 1]])
                assert mine == ref, f"key {distinct[i]}"
            router = table.router
            for k in distinct:
                holders = [s for s, t in enumerate(table.shards)
                           if t.count(k) > 0]
                assert holders == [router.route(k)], f"key {k} on {holders}"

    _report(9, "4-shard distributed mode matches monolithic, unique placement", run)


def test_criterion_10_probe_trend_reproduction():
    def run():
        n = 1 << 16
        density_means = []
        for rho in (0.5, 0.6, 0.7, 0.8, 0.9, 0.95):
            keys = gen_unique(WorkloadSpec(n=n, key_bits=32, seed=10_010))
            table = SingleValueHashTable(ceil(n / rho), key_bits=32)
            table.insert_bulk(list(zip(keys, keys)))
            density_means.append(table.probe_counters().mean_attempts)
        assert density_means == sorted(density_means), density_means

        multiplicity_means = []
        for r in (1, 16, 256, 4096):
            spec = WorkloadSpec(n=n, r=r, key_bits=32, seed=10_011,
                                target_density=0.8)
            keys = gen_multiplicity(spec)
            table = MultiValueHashTable(ceil(n / 0.8), key_bits=32)
            table.insert_bulk(list(zip(keys, range(n))))
            multiplicity_means.append(table.probe_counters().mean_attempts)
        assert multiplicity_means == sorted(multiplicity_means), multiplicity_means
        return (f" [rho: {', '.join(f'{m:.1f}' for m in density_means)}"
                f" | r: {', '.join(f'{m:.1f}' for m in multiplicity_means)}]")

    _report(10, "mean insert probe attempts non-decreasing in rho and r", run)


def test_criterion_11_kmer_demo():
    def run():
        t0 = time.perf_counter()
        from coophash.kmer import (KmerParams, ReferenceRecord, build_index,
                                   classify, sketch_sequence)
        params = KmerParams(k=16, window=128, sketch_size=16)
        rng = random.Random(10_011)
        refs = [ReferenceRecord(i, "".join(rng.choice("ACGT")
                                           for _ in range(1000)))
                for i in range(100)]

        oa = MultiValueHashTable(32_768)
        bucket = BucketListHashTable(32_768, 65_536,
                                     growth=GrowthPolicy(1, "1.1"))
        build_index(refs, params, oa)
        build_index(refs, params, bucket)

        naive: dict[int, list[int]] = {}
        for ref in refs:
            for km in sketch_sequence(ref.sequence, params):
                naive.setdefault(km, []).append(ref.target_id)

        from collections import Counter
        for i in range(50):
            ref = refs[rng.randrange(len(refs))]
            start = rng.randrange(0, 800)
            read = ref.sequence[start:start + 200]
            hits = Counter()
            for km in sketch_sequence(read, params):
                hits.update(naive.get(km, []))
            expect = sorted(hits.items(), key=lambda kv: (-kv[1], kv[0]))
            got_oa = classify(read, params, oa)
            got_bucket = classify(read, params, bucket)
            assert got_oa == expect, f"read {i} differs from naive scan"
            assert got_oa == got_bucket, f"read {i}: backends disagree"
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0, f"took {elapsed:.1f}s, budget is 60s"

    _report(11, "k-mer classification equals naive oracle, backends agree", run)
