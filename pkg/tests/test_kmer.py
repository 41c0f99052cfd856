"""k-mer extraction, minhash sketching, indexing, and classification."""
import random
from collections import Counter

import pytest

from coophash.bucket_list import BucketListHashTable, GrowthPolicy
from coophash.kmer import (IndexCapacityError, KmerParams, ReferenceRecord,
                           build_index, canonical_kmers, classify,
                           expected_sketch_volume, load_references, main,
                           make_backend, minhash_sketch, parse_fasta,
                           sequence_windows, sketch_sequence)
from coophash.multi_table import MultiValueHashTable
from coophash.probing import mix64


def _encode(seq):
    code = {"A": 0, "C": 1, "G": 2, "T": 3}
    out = 0
    for ch in seq:
        out = (out << 2) | code[ch]
    return out


def _revcomp(seq):
    comp = {"A": "T", "C": "G", "G": "C", "T": "A"}
    return "".join(comp[ch] for ch in reversed(seq))


def _random_seq(rng, length):
    return "".join(rng.choice("ACGT") for _ in range(length))


def test_palindrome_is_its_own_canonical():
    kmers = list(canonical_kmers("ACGT", 4))
    assert kmers == [_encode("ACGT")]  # reverse complement of ACGT is ACGT


def test_poly_a_canonical():
    # AA beats its reverse complement TT; hand-encoded A=0,C=1,G=2,T=3.
    assert list(canonical_kmers("AAAA", 2)) == [_encode("AA")] * 3
    assert _encode("AA") == 0


def test_exact_length_sequence_yields_one_kmer():
    assert len(list(canonical_kmers("ACGTAC", 6))) == 1
    assert list(canonical_kmers("ACG", 4)) == []


def test_canonical_matches_string_oracle():
    rng = random.Random(19)
    for _ in range(50):
        k = rng.randrange(2, 12)
        seq = _random_seq(rng, 40)
        got = list(canonical_kmers(seq, k))
        expect = [min(_encode(seq[i:i + k]), _encode(_revcomp(seq[i:i + k])))
                  for i in range(len(seq) - k + 1)]
        assert got == expect


def test_non_acgt_splits_sequence():
    # The N breaks the roll: 1 k-mer on each side for k = 4.
    assert len(list(canonical_kmers("ACGTNACGT", 4))) == 2
    assert len(list(canonical_kmers("acgt", 4))) == 1  # case-insensitive


def test_poly_t_32mer_avoids_sentinels():
    # The all-T 32-mer encodes as all ones; its canonical form is the
    # all-A complement, so the empty sentinel can never be a key.
    kmers = list(canonical_kmers("T" * 32, 32))
    assert kmers == [0]


def test_sketch_keeps_all_when_small():
    params = KmerParams(k=4, window=16, sketch_size=8)
    kmers = list(canonical_kmers("ACGTACGT", 4))
    sketch = minhash_sketch(kmers, params)
    assert set(sketch) == set(kmers)


def test_sketch_equals_sort_and_take_oracle():
    rng = random.Random(23)
    params = KmerParams(k=8, window=64, sketch_size=4)
    for _ in range(50):
        kmers = list(canonical_kmers(_random_seq(rng, 64), 8))
        sketch = minhash_sketch(kmers, params)
        oracle = sorted(set(kmers), key=lambda km: (mix64(km), km))[:4]
        assert sketch == oracle
        assert set(sketch) <= set(kmers)  # subset property


def test_sketch_deterministic():
    params = KmerParams(k=6, window=32, sketch_size=4)
    seq = _random_seq(random.Random(29), 32)
    assert (minhash_sketch(canonical_kmers(seq, 6), params)
            == minhash_sketch(canonical_kmers(seq, 6), params))


def test_windows_cover_sequence():
    params = KmerParams(k=4, window=10, sketch_size=4)
    seq = _random_seq(random.Random(31), 25)
    windows = list(sequence_windows(seq, params))
    assert "".join(windows) == seq
    assert [len(w) for w in windows] == [10, 10, 5]


def test_reference_record_requires_sequence():
    with pytest.raises(ValueError):
        ReferenceRecord(3, "")


def test_params_validation():
    with pytest.raises(ValueError):
        KmerParams(k=0)
    with pytest.raises(ValueError):
        KmerParams(k=33)
    with pytest.raises(ValueError):
        KmerParams(k=8, window=4)
    with pytest.raises(ValueError):
        KmerParams(sketch_size=0)


def test_build_index_single_window():
    params = KmerParams(k=4, window=64, sketch_size=8)
    ref = ReferenceRecord(0, _random_seq(random.Random(37), 64))
    table = MultiValueHashTable(256)
    inserted = build_index([ref], params, table)
    sketch = list(sketch_sequence(ref.sequence, params))
    assert inserted == len(sketch) <= params.sketch_size
    assert sum(table.count(km) for km in set(sketch)) == inserted


def test_build_index_capacity_error_names_reference():
    params = KmerParams(k=4, window=8, sketch_size=8)
    table = MultiValueHashTable(32)  # capacity 64, will overflow
    refs = [ReferenceRecord(i, _random_seq(random.Random(i), 400))
            for i in range(10)]
    with pytest.raises(IndexCapacityError) as err:
        build_index(refs, params, table)
    assert "reference" in str(err.value)


def _corpus(n_refs=30, length=600, seed=41):
    rng = random.Random(seed)
    return [ReferenceRecord(i, _random_seq(rng, length)) for i in range(n_refs)]


def _naive_index(references, params):
    index: dict[int, list[int]] = {}
    for ref in references:
        for km in sketch_sequence(ref.sequence, params):
            index.setdefault(km, []).append(ref.target_id)
    return index


def _naive_classify(read, params, index):
    hits = Counter()
    for km in sketch_sequence(read, params):
        for target in index.get(km, []):
            hits[target] += 1
    return sorted(hits.items(), key=lambda kv: (-kv[1], kv[0]))


def test_classification_matches_naive_oracle():
    params = KmerParams(k=10, window=64, sketch_size=8)
    refs = _corpus()
    table = MultiValueHashTable(4096)
    build_index(refs, params, table)
    naive = _naive_index(refs, params)
    rng = random.Random(43)
    for _ in range(20):
        ref = rng.choice(refs)
        start = rng.randrange(0, len(ref.sequence) - 120)
        read = ref.sequence[start:start + 120]
        assert classify(read, params, table) == _naive_classify(read, params, naive)


def test_exact_substring_ranks_its_reference_first():
    params = KmerParams(k=12, window=64, sketch_size=8)
    refs = _corpus(seed=47)
    table = MultiValueHashTable(4096)
    build_index(refs, params, table)
    read = refs[7].sequence[100:400]
    ranked = classify(read, params, table)
    assert ranked[0][0] == 7


def test_read_without_hits_is_empty():
    params = KmerParams(k=12, window=64, sketch_size=8)
    refs = _corpus(seed=53)
    table = MultiValueHashTable(4096)
    build_index(refs, params, table)
    assert classify("N" * 50, params, table) == []
    other = _random_seq(random.Random(999), 100)
    result = classify(other, params, table)
    assert isinstance(result, list)


def test_backend_equivalence():
    params = KmerParams(k=10, window=64, sketch_size=8)
    refs = _corpus(seed=59)
    volume = expected_sketch_volume(refs, params)
    oa = make_backend("oa", volume)
    bucket = make_backend("bucket", volume)
    build_index(refs, params, oa)
    build_index(refs, params, bucket)
    rng = random.Random(61)
    for _ in range(15):
        ref = rng.choice(refs)
        read = ref.sequence[50:250]
        assert classify(read, params, oa) == classify(read, params, bucket)


def test_skewed_corpus_bucket_backend():
    # One shared k-mer across many targets, the case bucket chains serve.
    shared = "ACGTACGTACGTACGT"
    rng = random.Random(67)
    refs = [ReferenceRecord(i, shared + _random_seq(rng, 48))
            for i in range(200)]
    # sketch_size exceeds the per-window k-mer count, so nothing is dropped
    params = KmerParams(k=16, window=64, sketch_size=64)
    table = BucketListHashTable(16_384, 131_072, growth=GrowthPolicy(1, "1.1"))
    build_index(refs, params, table)
    km = next(canonical_kmers(shared, 16))
    assert table.count(km) == 200


def test_parse_fasta(tmp_path):
    fasta = tmp_path / "refs.fa"
    fasta.write_text(">r1 desc\nACGT\nACGT\n\n>r2\nTTTT\n")
    records = list(parse_fasta(fasta))
    assert records == [("r1 desc", "ACGTACGT"), ("r2", "TTTT")]
    refs = load_references(fasta)
    assert [r.target_id for r in refs] == [0, 1]


def test_cli_build_and_classify(tmp_path):
    rng = random.Random(71)
    refs_fa = tmp_path / "refs.fa"
    refs_fa.write_text("".join(
        f">ref{i}\n{_random_seq(rng, 300)}\n" for i in range(10)))
    reads_fa = tmp_path / "reads.fa"
    ref_seqs = [seq for _, seq in parse_fasta(refs_fa)]
    reads_fa.write_text("".join(
        f">read{i}\n{ref_seqs[i][20:220]}\n" for i in range(3)))

    stats_csv = tmp_path / "stats.csv"
    assert main(["build", "--refs", str(refs_fa), "--k", "10",
                 "--out", str(stats_csv)]) == 0
    header, row = stats_csv.read_text().splitlines()
    assert header.startswith("references,")
    assert row.startswith("10,")

    out_csv = tmp_path / "hits.csv"
    assert main(["classify", "--refs", str(refs_fa), "--reads", str(reads_fa),
                 "--k", "10", "--top", "2", "--backend", "bucket",
                 "--out", str(out_csv)]) == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "read,rank,target_id,hits"
    assert any(line.startswith("read0,1,0,") for line in lines[1:])


def test_cli_missing_file_fails(tmp_path):
    assert main(["build", "--refs", str(tmp_path / "nope.fa"),
                 "--out", str(tmp_path / "x.csv")]) == 2
