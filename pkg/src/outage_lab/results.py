"""CSV rows in the fixed result schema shared by every subcommand."""

from __future__ import annotations

import csv
import io
import math
from typing import Iterable, TextIO

COLUMNS = (
    "method", "t", "r", "R", "P", "q1", "q2", "value", "uncertainty",
    "n_samples", "seed", "verdict", "q_star", "f_star", "f_at_zero", "f_at_half",
)
INT_COLUMNS = frozenset({"t", "r", "n_samples", "seed"})
STR_COLUMNS = frozenset({"method", "verdict"})


def format_cell(v) -> str:
    """repr() for floats so values survive a round trip bit for bit."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(float(v))
    if hasattr(v, "item"):  # numpy scalar
        return format_cell(v.item())
    return str(v)


def parse_cell(column: str, text: str):
    if text == "":
        return None
    if column in STR_COLUMNS:
        return text
    if column in INT_COLUMNS:
        return int(text)
    return float(text)


def make_row(**fields) -> dict:
    unknown = set(fields) - set(COLUMNS)
    if unknown:
        raise KeyError(f"unknown columns {sorted(unknown)}")
    return {c: fields.get(c) for c in COLUMNS}


class RowWriter:
    """Writes the header once, then rows, flushing after each row."""

    def __init__(self, fh: TextIO, header: bool = True):
        self._fh = fh
        self._w = csv.writer(fh, lineterminator="\n")
        if header:
            self._w.writerow(COLUMNS)

    def write(self, row: dict) -> None:
        self._w.writerow([format_cell(row.get(c)) for c in COLUMNS])
        self._fh.flush()

    def write_all(self, rows: Iterable[dict]) -> None:
        for row in rows:
            self.write(row)


def rows_to_text(rows: Iterable[dict], header: bool = True) -> str:
    buf = io.StringIO()
    RowWriter(buf, header).write_all(rows)
    return buf.getvalue()


def read_rows(fh: TextIO) -> list[dict]:
    """Parse a result CSV; lines starting with '#' are skipped."""
    lines = [ln for ln in fh if not ln.startswith("#") and ln.strip()]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty CSV") from None
    if tuple(header) != COLUMNS:
        raise ValueError(f"unexpected header {header}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(COLUMNS):
            raise ValueError(f"line {lineno}: expected {len(COLUMNS)} fields, got {len(rec)}")
        try:
            rows.append({c: parse_cell(c, v) for c, v in zip(COLUMNS, rec)})
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return rows


def read_rows_path(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return read_rows(fh)
