#!/usr/bin/env python3
"""Convert a WikiTableQuestions release split to the canonical dataset format.

Usage:
    python3 scripts/convert_wikitq.py <release_root> <split.tsv> <out.jsonl>

<release_root> is the unpacked WikiTableQuestions directory (it contains
csv/ with the table files). <split.tsv> is one of the question files, e.g.
data/pristine-unseen-tables.tsv, with columns id, utterance, context,
targetValue. The targetValue column separates multiple answer values with
'|'; they are emitted as a gold answer list.
"""

import csv
import json
import sys
from pathlib import Path


def load_table(release_root: Path, context: str):
    path = release_root / context
    # the release ships .csv tables with a .tsv twin; prefer whichever exists
    if not path.exists() and path.suffix == ".csv":
        path = path.with_suffix(".tsv")
    with open(path, newline="", encoding="utf-8") as f:
        if path.suffix == ".tsv":
            rows = list(csv.reader(f, delimiter="\t"))
        else:
            rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"empty table file {path}")
    header, body = rows[0], rows[1:]
    width = len(header)
    body = [r + [""] * (width - len(r)) if len(r) < width else r[:width] for r in body]
    return header, body


def main():
    if len(sys.argv) != 4:
        sys.exit(__doc__)
    release_root, split, out_path = Path(sys.argv[1]), Path(sys.argv[2]), Path(sys.argv[3])
    written = skipped = 0
    with open(split, newline="", encoding="utf-8") as f, open(out_path, "w", encoding="utf-8") as out:
        reader = csv.DictReader(f, delimiter="\t")
        for row in reader:
            try:
                header, body = load_table(release_root, row["context"])
            except Exception as e:
                print(f"skip {row['id']}: {e}", file=sys.stderr)
                skipped += 1
                continue
            record = {
                "id": row["id"],
                "task": "qa",
                "question": row["utterance"],
                "gold_answers": row["targetValue"].split("|"),
                "table": {"header": header, "rows": body},
            }
            out.write(json.dumps(record, ensure_ascii=False) + "\n")
            written += 1
    print(f"wrote {written} instances ({skipped} skipped) -> {out_path}")


if __name__ == "__main__":
    main()
