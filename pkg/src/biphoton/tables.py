"""Tabular outputs and their CSV / JSON serialization.

CSV layout::

    # key: value            header comments (config echo, version, summary)
    # table: name           one block per table
    col_a,col_b
    1.0000000000000000e+00,2.0000000000000000e+00

Floats are written with 17 significant digits so that parsing reproduces them bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def __eq__(self, other):
        if not isinstance(other, Table) or self.columns != other.columns:
            return False
        if len(self.rows) != len(other.rows):
            return False
        return all(_same(a, b) for r1, r2 in zip(self.rows, other.rows) for a, b in zip(r1, r2))


def _same(a, b):
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


@dataclass
class Report:
    """Named tables plus header metadata (strings, numbers or nested JSON values)."""

    tables: dict[str, Table]
    meta: dict = field(default_factory=dict)


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.16e}"
    text = str(v)
    if any(ch in text for ch in ",\n\"#"):
        raise ValueError(f"cell value {text!r} is not CSV-safe")
    return text


def parse_value(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def emit_csv(report: Report) -> str:
    lines = [f"# {key}: {json.dumps(value, sort_keys=True)}" for key, value in report.meta.items()]
    for name, table in report.tables.items():
        lines.append(f"# table: {name}")
        lines.append(",".join(table.columns))
        lines.extend(",".join(format_value(v) for v in row) for row in table.rows)
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> Report:
    meta: dict = {}
    tables: dict[str, Table] = {}
    current = None
    expect_header = False
    for line in text.splitlines():
        if not line:
            continue
        if line.startswith("# table: "):
            current = line[len("# table: "):]
            expect_header = True
            continue
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
            continue
        if current is None:
            raise ValueError("data row before any table marker")
        if expect_header:
            tables[current] = Table(line.split(","))
            expect_header = False
        else:
            tables[current].rows.append(tuple(parse_value(v) for v in line.split(",")))
    return Report(tables, meta)


def emit_json(report: Report) -> str:
    payload = {
        "meta": report.meta,
        "tables": {name: {"columns": t.columns, "rows": [list(r) for r in t.rows]}
                   for name, t in report.tables.items()},
    }
    return json.dumps(payload, indent=1, sort_keys=False) + "\n"


def parse_json(text: str) -> Report:
    payload = json.loads(text)
    tables = {name: Table(list(t["columns"]), [tuple(r) for r in t["rows"]])
              for name, t in payload["tables"].items()}
    return Report(tables, payload["meta"])
