#!/usr/bin/env python3
"""Convert a TabFact split to the canonical dataset format.

Usage:
    python3 scripts/convert_tabfact.py <repo_root> <split.json> <out.jsonl>

<repo_root> is the Table-Fact-Checking checkout (it contains data/all_csv/).
<split.json> maps table file names to [statements, labels, caption], e.g.
tokenized_data/test_examples.json for the test-small split. Labels 1/0
become gold answers "true"/"false"; one instance is emitted per statement.
Table files separate cells with '#'.
"""

import json
import sys
from pathlib import Path


def load_table(repo_root: Path, table_id: str):
    path = repo_root / "data" / "all_csv" / table_id
    lines = path.read_text(encoding="utf-8").splitlines()
    rows = [line.split("#") for line in lines if line]
    if not rows:
        raise ValueError(f"empty table file {path}")
    header, body = rows[0], rows[1:]
    width = len(header)
    body = [r + [""] * (width - len(r)) if len(r) < width else r[:width] for r in body]
    return header, body


def main():
    if len(sys.argv) != 4:
        sys.exit(__doc__)
    repo_root, split, out_path = Path(sys.argv[1]), Path(sys.argv[2]), Path(sys.argv[3])
    examples = json.loads(Path(split).read_text(encoding="utf-8"))
    written = skipped = 0
    with open(out_path, "w", encoding="utf-8") as out:
        for table_id, (statements, labels, caption) in examples.items():
            try:
                header, body = load_table(repo_root, table_id)
            except Exception as e:
                print(f"skip {table_id}: {e}", file=sys.stderr)
                skipped += len(statements)
                continue
            for k, (statement, label) in enumerate(zip(statements, labels)):
                record = {
                    "id": f"{table_id}-{k}",
                    "task": "fact_verification",
                    "question": statement,
                    "gold_answers": ["true" if label == 1 else "false"],
                    "table": {"title": caption, "header": header, "rows": body},
                }
                out.write(json.dumps(record, ensure_ascii=False) + "\n")
                written += 1
    print(f"wrote {written} instances ({skipped} skipped) -> {out_path}")


if __name__ == "__main__":
    main()
