"""CSV and JSON artifacts.

A CSV artifact starts with one ``#``-prefixed line of JSON metadata, then a
header row, then data. Floats are written with ``repr`` so they round-trip.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = ["write_csv", "read_csv", "write_json", "read_json", "sibling"]


def _plain(obj):
    # numpy scalars and arrays inside metadata
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True, default=_plain) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    """Return ``(meta, columns, rows)`` with cells parsed as floats where possible."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing metadata line")
        meta = json.loads(first[1:])
        reader = csv.reader(fh)
        columns = next(reader)
        rows = []
        for row in reader:
            parsed = []
            for cell in row:
                try:
                    parsed.append(float(cell))
                except ValueError:
                    parsed.append(cell)
            rows.append(parsed)
    return meta, columns, rows


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def sibling(path, suffix: str) -> Path:
    """``out/run.csv`` with suffix ``.config.json`` -> ``out/run.config.json``."""
    path = Path(path)
    return path.with_name(path.stem + suffix)
