"""Result tables in whitespace ``.dat`` or CSV form."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class ResultTable:
    columns: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...] = ()
    provenance: str = ""
    failures: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        cols = tuple(self.columns)
        if not cols:
            raise ValueError("a table needs at least one column")
        rows = tuple(tuple(float(v) for v in r) for r in self.rows)
        for r in rows:
            if len(r) != len(cols):
                raise ValueError(f"row of length {len(r)} in a table with {len(cols)} columns")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "rows", rows)

    def column(self, name: str) -> list[float]:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def select(self, names) -> "ResultTable":
        idx = [self.columns.index(n) for n in names]
        return ResultTable(tuple(names), tuple(tuple(r[i] for i in idx) for r in self.rows),
                           self.provenance, self.failures)


def format_value(v: float) -> str:
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.10g}"


def render_table(t: ResultTable, fmt: str = "dat") -> str:
    if fmt == "dat":
        # a single header line keeps the file compatible with skip-first readers
        header = " ".join(t.columns)
        if t.provenance:
            header += "  # " + t.provenance
        lines = [header] + [" ".join(format_value(v) for v in r) for r in t.rows]
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if t.provenance:
            w.writerow(["# " + t.provenance])
        w.writerow(t.columns)
        for r in t.rows:
            w.writerow([format_value(v) for v in r])
        return buf.getvalue()
    raise ValueError(f"unknown table format {fmt!r}")


def write_table(t: ResultTable, path, fmt: str = "dat") -> None:
    """Write ``t``; identical tables give byte-identical files."""
    Path(path).write_bytes(render_table(t, fmt).encode("utf-8"))


def read_table(path, fmt: str | None = None) -> ResultTable:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "dat")
    text = path.read_text(encoding="utf-8")
    if fmt == "dat":
        lines = text.splitlines()
        header, _, prov = lines[0].partition("  # ")
        rows = [tuple(float(x) for x in ln.split()) for ln in lines[1:] if ln.strip()]
        return ResultTable(tuple(header.split()), tuple(rows), prov)
    records = list(csv.reader(io.StringIO(text)))
    prov = ""
    if records and len(records[0]) == 1 and records[0][0].startswith("# "):
        prov = records.pop(0)[0][2:]
    cols = tuple(records[0])
    rows = [tuple(float(x) for x in r) for r in records[1:]]
    return ResultTable(cols, tuple(rows), prov)
