"""Reading and validating sweep CSV files.

The simulator writes CSVs with a schema comment line, a header row and one
row per (sweep point, strategy). This module checks the schema version and
the presence of every column a figure needs; values are passed through
exactly as written, with no numerical processing.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

SUPPORTED_SCHEMA = 1
SCHEMA_PREFIX = "# dcsi-sim sweep schema v"
REQUIRED_COLUMNS = ("x_name", "x_value", "strategy", "ergodic_rate",
                    "std_error")


class SchemaError(Exception):
    """The CSV is not a sweep file this tool understands."""


@dataclass(frozen=True)
class SweepTable:
    columns: tuple[str, ...]
    rows: tuple[dict, ...]  # column -> string cell, plus parsed floats

    def series(self) -> dict[str, tuple[list, list, list]]:
        """Per-strategy (x, rate, std_error) float triples, in file order."""
        out: dict[str, tuple[list, list, list]] = {}
        for row in self.rows:
            xs, ys, es = out.setdefault(row["strategy"], ([], [], []))
            xs.append(float(row["x_value"]))
            ys.append(float(row["ergodic_rate"]))
            es.append(float(row["std_error"]))
        return out


def read_sweep(path: str, x_name: str | None = None) -> SweepTable:
    """Load a sweep CSV; if ``x_name`` is given, also require that every row
    sweeps that parameter."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            first = fh.readline().strip()
            if not first.startswith(SCHEMA_PREFIX):
                raise SchemaError(
                    f"{path}: not a sweep CSV (expected a first line "
                    f"starting with {SCHEMA_PREFIX!r}, got {first!r})")
            version = first[len(SCHEMA_PREFIX):]
            if version != str(SUPPORTED_SCHEMA):
                raise SchemaError(
                    f"{path}: schema version {version} is not supported "
                    f"(this tool reads v{SUPPORTED_SCHEMA})")
            reader = csv.DictReader(fh)
            columns = tuple(reader.fieldnames or ())
            missing = [c for c in REQUIRED_COLUMNS if c not in columns]
            if missing:
                raise SchemaError(
                    f"{path}: missing column(s) {missing}; header has "
                    f"{list(columns)}")
            rows = tuple(reader)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    if x_name is not None:
        found = {r["x_name"] for r in rows}
        if found != {x_name}:
            raise SchemaError(
                f"{path}: sweeps over {sorted(found)}, but this figure "
                f"expects a sweep over {x_name!r}")
    return SweepTable(columns=columns, rows=rows)
