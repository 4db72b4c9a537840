"""CSV emission with a stable, lossless number format."""

from __future__ import annotations

import csv
import os

import numpy as np


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        # repr gives the shortest string that parses back to the same double
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def emit_csv(header, rows, path):
    """Write ``rows`` under ``header``; an empty ``rows`` gives a header-only file."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row {row!r} does not match header {header!r}")
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    """Read a CSV written by :func:`emit_csv` into ``(header, rows)`` of strings."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        return header, [tuple(row) for row in r]


def write_result(result, out_dir):
    """Write every table of an experiment result to ``out_dir/<name>.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name in sorted(result.tables):
        table = result.tables[name]
        paths.append(emit_csv(table.header, table.rows, os.path.join(out_dir, f"{name}.csv")))
    return paths
