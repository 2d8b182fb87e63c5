#!/usr/bin/env python3
"""Convert a WikiSQL split to the canonical dataset format.

Usage:
    python3 scripts/convert_wikisql.py <split.jsonl> <split.tables.jsonl> <out.jsonl>

WikiSQL annotates each question with a structured ground-truth query
(sel/agg/conds indices) instead of answer text. This converter executes
that query over the table with sqlite3 and writes the flattened result as
the gold answer list; instances whose gold query fails or returns nothing
are rejected to stderr. The library exposes the same derivation for
canonical tables carrying a raw gold SQL string.
"""

import json
import sqlite3
import sys
from pathlib import Path

AGG = ["", "MAX", "MIN", "COUNT", "SUM", "AVG"]
COND_OP = ["=", ">", "<", "OP"]


def execute_gold(table, sql_struct):
    header, types, rows = table["header"], table["types"], table["rows"]
    conn = sqlite3.connect(":memory:")
    decls = ", ".join(
        f'"c{i}" {"NUMERIC" if t == "real" else "TEXT"}' for i, t in enumerate(types)
    )
    conn.execute(f"CREATE TABLE w ({decls})")
    conn.executemany(
        f"INSERT INTO w VALUES ({', '.join('?' for _ in header)})",
        [[str(c) for c in r] for r in rows],
    )
    sel, agg = sql_struct["sel"], sql_struct["agg"]
    select = f'"c{sel}"' if agg == 0 else f'{AGG[agg]}("c{sel}")'
    where, params = [], []
    for col, op, val in sql_struct["conds"]:
        if COND_OP[op] == "OP":
            raise ValueError("unsupported condition operator")
        where.append(f'"c{col}" {COND_OP[op]} ?')
        params.append(str(val) if not isinstance(val, (int, float)) else val)
    sql = f"SELECT {select} FROM w"
    if where:
        sql += " WHERE " + " AND ".join(where)
    cur = conn.execute(sql, params)
    out = []
    for row in cur.fetchall():
        for cell in row:
            out.append("" if cell is None else str(cell))
    return out


def main():
    if len(sys.argv) != 4:
        sys.exit(__doc__)
    split, tables_path, out_path = Path(sys.argv[1]), Path(sys.argv[2]), Path(sys.argv[3])
    tables = {}
    with open(tables_path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                t = json.loads(line)
                tables[t["id"]] = t
    written = skipped = 0
    with open(split, encoding="utf-8") as f, open(out_path, "w", encoding="utf-8") as out:
        for n, line in enumerate(f):
            if not line.strip():
                continue
            item = json.loads(line)
            table = tables.get(item["table_id"])
            if table is None:
                print(f"skip line {n}: unknown table {item['table_id']}", file=sys.stderr)
                skipped += 1
                continue
            try:
                gold = execute_gold(table, item["sql"])
            except Exception as e:
                print(f"skip line {n}: gold query failed: {e}", file=sys.stderr)
                skipped += 1
                continue
            if not gold:
                print(f"skip line {n}: gold query returned no rows", file=sys.stderr)
                skipped += 1
                continue
            record = {
                "id": f"wikisql-{n}",
                "task": "qa",
                "question": item["question"],
                "gold_answers": gold,
                "table": {
                    "header": table["header"],
                    "rows": [[str(c) for c in r] for r in table["rows"]],
                },
            }
            out.write(json.dumps(record, ensure_ascii=False) + "\n")
            written += 1
    print(f"wrote {written} instances ({skipped} skipped) -> {out_path}")


if __name__ == "__main__":
    main()
