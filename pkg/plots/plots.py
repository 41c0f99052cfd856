#!/usr/bin/env python3
"""Render benchmark sweep CSVs into line charts.

Reads the CSV emitted by the ``bench`` CLI and draws throughput (Mops,
log scale) against a sweep axis, one line per distinct value of a
chosen series column:

    python plots.py --in single.csv --x density --series operation --out single.png
    python plots.py --in multi.csv --x multiplicity --series group_width \
        --operation insert --out multi.png

The x axis names map onto CSV columns: density -> target_density,
multiplicity -> r, shards -> shards. Missing columns or a CSV without
data rows exit nonzero without writing anything.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

X_COLUMNS = {
    "density": ("target_density", "target storage density"),
    "multiplicity": ("r", "values per key"),
    "shards": ("shards", "shard count"),
}


@dataclass(frozen=True)
class ChartSpec:
    input_csv: str
    x_axis: str                 # density | multiplicity | shards
    series_by: str              # CSV column that names the lines
    output_image: str
    operation: str | None = None  # optional filter: insert / retrieve


class ChartError(Exception):
    """Bad input: unknown columns or nothing to plot."""


def _read_rows(spec: ChartSpec) -> tuple[list[dict], str]:
    x_col, x_label = X_COLUMNS[spec.x_axis]
    with open(spec.input_csv, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for needed in (x_col, spec.series_by, "mops", "operation"):
            if needed not in header:
                raise ChartError(f"column {needed!r} missing from {spec.input_csv}")
        rows = list(reader)
    if spec.operation is not None:
        rows = [r for r in rows if r["operation"] == spec.operation]
    if not rows:
        raise ChartError(f"no data rows to plot in {spec.input_csv}")
    return rows, x_label


def render(spec: ChartSpec) -> None:
    """Write the chart; raises ChartError before touching the output."""
    rows, x_label = _read_rows(spec)
    x_col, _ = X_COLUMNS[spec.x_axis]

    # One line per series value; if several operations survive the
    # filter and the series is not the operation itself, keep them
    # apart so a line never mixes insert and retrieve timings.
    split_ops = (spec.series_by != "operation" and spec.operation is None
                 and len({r["operation"] for r in rows}) > 1)
    lines: dict[str, list[tuple[float, float]]] = {}
    for row in rows:
        label = str(row[spec.series_by])
        if split_ops:
            label = f"{label} ({row['operation']})"
        lines.setdefault(label, []).append((float(row[x_col]), float(row["mops"])))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in sorted(lines):
        points = sorted(lines[label])
        ax.plot([p[0] for p in points], [p[1] for p in points],
                marker="o", label=label)
    ax.set_yscale("log")
    ax.set_xlabel(x_label)
    ax.set_ylabel("throughput [Mops]")
    ax.set_title(Path(spec.input_csv).stem)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(title=spec.series_by)
    fig.tight_layout()
    fig.savefig(spec.output_image)
    plt.close(fig)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots.py", description="benchmark CSV -> line chart")
    parser.add_argument("--in", dest="input_csv", required=True,
                        help="CSV produced by the bench CLI")
    parser.add_argument("--x", dest="x_axis", required=True,
                        choices=sorted(X_COLUMNS))
    parser.add_argument("--series", dest="series_by", required=True,
                        help="CSV column that names the lines")
    parser.add_argument("--out", dest="output_image", required=True,
                        help="output image path (png, svg, ...)")
    parser.add_argument("--operation", default=None,
                        help="optional filter, e.g. insert or retrieve")
    args = parser.parse_args(argv)
    spec = ChartSpec(input_csv=args.input_csv, x_axis=args.x_axis,
                     series_by=args.series_by, output_image=args.output_image,
                     operation=args.operation)
    try:
        render(spec)
    except (ChartError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {spec.output_image}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
