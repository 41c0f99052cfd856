"""Desk-scale k-mer indexing and read classification demo.

Reference sequences are cut into fixed-length windows; each window is
reduced to the ``sketch_size`` canonical k-mers with the smallest mixed
hash values (a bottom-s minhash sketch). Sketched k-mers stream one at
a time into a multi-value table as (k-mer, target-id) pairs. A read is
classified by sketching it the same way, querying each k-mer, and
ranking targets by hit count.

Input is a FASTA subset: header lines start with '>', sequence lines
belong to the preceding header, no quality data. Characters outside
ACGT split a sequence; k-mers never span the gap. The sketch window
length and size are explicit defaults of this demo, not calibrated
constants.
"""
from __future__ import annotations

import argparse
import csv
import sys
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .bucket_list import BucketListHashTable, GrowthPolicy
from .multi_table import MultiValueHashTable
from .probing import mix64
from .single_table import InsertStatus

_BASE_CODE = {"A": 0, "C": 1, "G": 2, "T": 3}


class IndexCapacityError(Exception):
    """The index table ran out of space while adding a reference."""


@dataclass(frozen=True)
class KmerParams:
    k: int = 16
    window: int = 128
    sketch_size: int = 16

    def __post_init__(self) -> None:
        if not 1 <= self.k <= 32:
            raise ValueError("k must lie in [1, 32] (2 bits per base)")
        if self.window < self.k:
            raise ValueError("window must be at least k bases")
        if self.sketch_size < 1:
            raise ValueError("sketch_size must be >= 1")


@dataclass(frozen=True)
class ReferenceRecord:
    target_id: int
    sequence: str

    def __post_init__(self) -> None:
        if not self.sequence:
            raise ValueError(f"reference {self.target_id} has no sequence")


def canonical_kmers(sequence: str, k: int) -> Iterator[int]:
    """2-bit packed canonical k-mers (min of strand encodings).

    Bases outside ACGT reset the roll, so k-mers never cross them.
    Note the canonical form of any k-mer near the top of the 2-bit range
    is its (small) reverse complement, so canonical k-mers can never
    collide with the all-ones / all-ones-minus-one key sentinels.
    """
    mask = (1 << (2 * k)) - 1
    shift = 2 * (k - 1)
    fwd = rev = 0
    run = 0
    for ch in sequence.upper():
        code = _BASE_CODE.get(ch)
        if code is None:
            run = 0
            fwd = rev = 0
            continue
        fwd = ((fwd << 2) | code) & mask
        rev = (rev >> 2) | ((3 - code) << shift)
        run += 1
        if run >= k:
            yield fwd if fwd <= rev else rev


def minhash_sketch(kmers: Iterable[int], params: KmerParams) -> list[int]:
    """The sketch_size distinct k-mers with the smallest mixed hashes.

    Ties break on the k-mer value itself, making the sketch a pure
    function of the k-mer set.
    """
    distinct = set(kmers)
    if len(distinct) <= params.sketch_size:
        return sorted(distinct, key=lambda km: (mix64(km), km))
    return sorted(distinct, key=lambda km: (mix64(km), km))[:params.sketch_size]


def sequence_windows(sequence: str, params: KmerParams) -> Iterator[str]:
    """Non-overlapping fixed-length windows; a short tail still counts."""
    for start in range(0, len(sequence), params.window):
        yield sequence[start:start + params.window]


def sketch_sequence(sequence: str, params: KmerParams) -> Iterator[int]:
    """Sketched k-mers of every window, in window order."""
    for window in sequence_windows(sequence, params):
        yield from minhash_sketch(canonical_kmers(window, params.k), params)


def build_index(references: Iterable[ReferenceRecord], params: KmerParams,
                table) -> int:
    """Stream sketched (k-mer, target) pairs into ``table`` element-wise.

    Works against any multi-value backend exposing ``insert``. Returns
    the number of inserted pairs; capacity problems raise with the
    offending reference named.
    """
    inserted = 0
    for ref in references:
        for km in sketch_sequence(ref.sequence, params):
            status = table.insert(km, ref.target_id)
            if status != InsertStatus.INSERTED:
                raise IndexCapacityError(
                    f"reference {ref.target_id}: insert returned {status.value}")
            inserted += 1
    return inserted


def classify(read: str, params: KmerParams, table) -> list[tuple[int, int]]:
    """Rank target ids by hit count, descending, ties by ascending id."""
    hits: Counter[int] = Counter()
    for km in sketch_sequence(read, params):
        for target in table.retrieve(km):
            hits[target] += 1
    return sorted(hits.items(), key=lambda item: (-item[1], item[0]))


# -- FASTA subset -------------------------------------------------------------


def parse_fasta(path: str | Path) -> Iterator[tuple[str, str]]:
    """Yield (header, concatenated sequence) pairs."""
    header = None
    chunks: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                if header is not None:
                    yield header, "".join(chunks)
                header = line[1:].strip()
                chunks = []
            else:
                chunks.append(line)
    if header is not None:
        yield header, "".join(chunks)


def load_references(path: str | Path) -> list[ReferenceRecord]:
    return [ReferenceRecord(target_id=i, sequence=seq)
            for i, (_, seq) in enumerate(parse_fasta(path))]


def make_backend(kind: str, expected_pairs: int, key_bits: int = 64):
    """Index backend sized for ``expected_pairs`` sketched insertions."""
    if kind == "oa":
        return MultiValueHashTable(max(64, int(expected_pairs / 0.8)),
                                   key_bits=key_bits)
    if kind == "bucket":
        return BucketListHashTable(max(64, int(expected_pairs / 0.8)),
                                   max(64, int(expected_pairs * 2.5)),
                                   growth=GrowthPolicy(1, "1.1"),
                                   key_bits=key_bits)
    raise ValueError(f"unknown backend {kind!r} (expected oa or bucket)")


def expected_sketch_volume(references: Sequence[ReferenceRecord],
                           params: KmerParams) -> int:
    windows = sum(-(-len(r.sequence) // params.window) for r in references)
    return windows * params.sketch_size


# -- CLI ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kmer", description="minhash-sketched k-mer index demo")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--refs", required=True, help="reference FASTA file")
    common.add_argument("--k", type=int, default=16)
    common.add_argument("--window", type=int, default=128)
    common.add_argument("--sketch", type=int, default=16)
    common.add_argument("--backend", default="oa", choices=("oa", "bucket"))

    build = sub.add_parser("build", parents=[common])
    build.add_argument("--out", required=True, help="index-stats CSV path")

    cls = sub.add_parser("classify", parents=[common])
    cls.add_argument("--reads", required=True, help="reads FASTA file")
    cls.add_argument("--top", type=int, default=5,
                     help="ranked targets reported per read")
    cls.add_argument("--out", default=None, help="CSV path (default stdout)")
    return parser


def _build_from_args(args) -> tuple[list[ReferenceRecord], KmerParams, object, int]:
    params = KmerParams(k=args.k, window=args.window, sketch_size=args.sketch)
    references = load_references(args.refs)
    table = make_backend(args.backend,
                         expected_sketch_volume(references, params))
    inserted = build_index(references, params, table)
    return references, params, table, inserted


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        references, params, table, inserted = _build_from_args(args)
    except (IndexCapacityError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    if args.command == "build":
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["references", "k", "window", "sketch_size",
                             "backend", "pairs_inserted", "key_load_factor"])
            load = (table.load_factor() if hasattr(table, "load_factor")
                    else table.key_load_factor())
            writer.writerow([len(references), params.k, params.window,
                             params.sketch_size, args.backend, inserted,
                             f"{load:.4f}"])
        print(f"indexed {len(references)} references, {inserted} pairs")
        return 0

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["read", "rank", "target_id", "hits"])
        for header, seq in parse_fasta(args.reads):
            ranked = classify(seq, params, table)
            for rank, (target, hits) in enumerate(ranked[:args.top], 1):
                writer.writerow([header, rank, target, hits])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
