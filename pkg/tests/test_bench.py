"""Workload generators, CSV schema, and sweep harness."""
import os

import pytest

from coophash.bench import (BenchRecord, CSV_FIELDS, VerificationError,
                            WorkloadSpec, emit_csv, gen_multiplicity,
                            gen_unique, load_csv, main, run_bucket_sweep,
                            run_distributed_sweep, run_multi_sweep,
                            run_single_sweep)


def test_gen_unique_small():
    keys = gen_unique(WorkloadSpec(n=8, seed=1))
    assert len(keys) == len(set(keys)) == 8
    assert all(k >= 1 for k in keys)


def test_gen_unique_excludes_sentinels():
    spec = WorkloadSpec(n=50_000, key_bits=32, seed=2)
    keys = gen_unique(spec)
    assert len(set(keys)) == spec.n
    top = (1 << 32) - 1
    assert top not in keys and top - 1 not in keys


def test_gen_unique_64_bit_keys():
    keys = gen_unique(WorkloadSpec(n=10_000, key_bits=64, seed=12))
    assert len(set(keys)) == 10_000
    assert all(1 <= k < (1 << 64) - 2 for k in keys)


def test_cli_rejects_bad_layout_combination(tmp_path):
    out = str(tmp_path / "x.csv")
    code = main(["single-sweep", "--n", "512", "--densities", "0.5",
                 "--layout", "packed", "--key-bits", "64",
                 "--repeats", "1", "--out", out])
    assert code == 2
    assert not os.path.exists(out)


def test_gen_deterministic_under_seed():
    spec = WorkloadSpec(n=1000, r=4, seed=77)
    assert gen_unique(spec) == gen_unique(spec)
    assert gen_multiplicity(spec) == gen_multiplicity(spec)


def test_gen_multiplicity_mean():
    spec = WorkloadSpec(n=100_000, r=16, seed=3)
    keys = gen_multiplicity(spec)
    assert len(keys) == spec.n
    assert max(keys) <= spec.n // spec.r
    empirical = spec.n / len(set(keys))
    assert abs(empirical - 16) / 16 < 0.05


def test_gen_multiplicity_r1_unique_range():
    spec = WorkloadSpec(n=1000, r=1, seed=4)
    keys = gen_multiplicity(spec)
    assert sorted(keys) == list(range(1, 1001))


def test_invalid_spec():
    with pytest.raises(ValueError):
        WorkloadSpec(n=10, r=11)
    with pytest.raises(ValueError):
        WorkloadSpec(n=10, target_density=1.5)


def test_emit_csv_round_trip(tmp_path):
    path = str(tmp_path / "bench.csv")
    records = [
        BenchRecord("single_value", "insert", "soa", 32, 1024, 1,
                    0.8, 0.79, 0.5, 2.048, 33.5),
        BenchRecord("multi_value", "retrieve", "packed", 8, 2048, 16,
                    0.9, 0.88, 0.25, 8.192, 40.0, shards=4),
    ]
    emit_csv(records, path)
    assert load_csv(path) == records
    with open(path) as fh:
        assert fh.readline().strip() == ",".join(CSV_FIELDS)


def test_emit_csv_empty(tmp_path):
    path = str(tmp_path / "empty.csv")
    emit_csv([], path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines == [",".join(CSV_FIELDS)]


def test_single_sweep_record_shape():
    spec = WorkloadSpec(n=2048, seed=5)
    records = run_single_sweep([0.7, 0.5, 0.9], spec, repeats=2)
    assert len(records) == 6  # insert + retrieve per density
    densities = [r.target_density for r in records[::2]]
    assert densities == sorted(densities)  # monotone axis
    for rec in records:
        assert rec.mops > 0
        assert 0 < rec.achieved_density <= rec.target_density
        assert rec.operation in ("insert", "retrieve")


def test_multi_sweep_conserves_totals():
    spec = WorkloadSpec(n=4096, seed=6, target_density=0.8)
    records = run_multi_sweep([1, 16], spec, repeats=1)
    assert len(records) == 4
    assert {r.r for r in records} == {1, 16}


def test_bucket_sweep_policies():
    spec = WorkloadSpec(n=2048, r=8, seed=7, target_density=0.8)
    records = run_bucket_sweep(["default", "optimal"], spec, repeats=1)
    assert len(records) == 4
    assert any("s0=8" in r.structure for r in records)


def test_distributed_sweep_shards_column():
    spec = WorkloadSpec(n=2048, r=4, seed=8, target_density=0.8)
    records = run_distributed_sweep([1, 2], spec, repeats=1)
    assert [r.shards for r in records] == [1, 1, 2, 2]


def test_cli_end_to_end(tmp_path):
    out = str(tmp_path / "cli.csv")
    code = main(["single-sweep", "--n", "1024", "--densities", "0.5,0.8",
                 "--repeats", "1", "--seed", "1", "--out", out])
    assert code == 0
    records = load_csv(out)
    assert len(records) == 4
    assert os.path.getsize(out) > 0


def test_cli_group_width_and_layout(tmp_path):
    out = str(tmp_path / "cli2.csv")
    code = main(["multi-sweep", "--n", "1024", "--multiplicities", "1,4",
                 "--layout", "packed", "--group-width", "8",
                 "--repeats", "1", "--out", out])
    assert code == 0
    records = load_csv(out)
    assert all(r.layout == "packed" and r.group_width == 8 for r in records)


def test_cli_verification_failure_exits_nonzero(tmp_path, monkeypatch):
    from coophash import multi_table

    def corrupted(self, queries, workers=None):
        offsets, flat = original(self, queries, workers)
        if flat:
            flat[0] ^= 1
        return offsets, flat

    original = multi_table.MultiValueHashTable.retrieve_bulk
    monkeypatch.setattr(multi_table.MultiValueHashTable, "retrieve_bulk",
                        corrupted)
    out = str(tmp_path / "bad.csv")
    code = main(["multi-sweep", "--n", "512", "--multiplicities", "4",
                 "--repeats", "1", "--out", out])
    assert code == 2
    assert not os.path.exists(out)


def test_verification_error_type():
    with pytest.raises(VerificationError):
        raise VerificationError("boom")
