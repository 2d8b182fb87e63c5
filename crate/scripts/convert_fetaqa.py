#!/usr/bin/env python3
"""Convert a FeTaQA split to the canonical dataset format.

Usage:
    python3 scripts/convert_fetaqa.py <split.jsonl> <out.jsonl>

<split.jsonl> is one of the release files (e.g. fetaQA-v1_test.jsonl) with
fields feta_id, table_array (first row is the header), question, answer,
and table_page_title. The free-form answer becomes a single gold entry.
The release's highlighted-cell annotations are not carried over.
"""

import json
import sys
from pathlib import Path


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    split, out_path = Path(sys.argv[1]), Path(sys.argv[2])
    written = skipped = 0
    with open(split, encoding="utf-8") as f, open(out_path, "w", encoding="utf-8") as out:
        for line in f:
            if not line.strip():
                continue
            item = json.loads(line)
            table = item.get("table_array") or []
            if len(table) < 1 or not table[0]:
                print(f"skip {item.get('feta_id')}: empty table", file=sys.stderr)
                skipped += 1
                continue
            header, body = table[0], table[1:]
            width = len(header)
            body = [r + [""] * (width - len(r)) if len(r) < width else r[:width] for r in body]
            record = {
                "id": str(item["feta_id"]),
                "task": "qa",
                "question": item["question"],
                "gold_answers": [item["answer"]],
                "context": item.get("table_page_title"),
                "table": {
                    "title": item.get("table_section_title") or item.get("table_page_title"),
                    "header": header,
                    "rows": body,
                },
            }
            out.write(json.dumps(record, ensure_ascii=False) + "\n")
            written += 1
    print(f"wrote {written} instances ({skipped} skipped) -> {out_path}")


if __name__ == "__main__":
    main()
