#!/usr/bin/env python3
"""Convert public benchmark dumps to the orchkit dataset JSONL format.

  mmlu      directory of <subject>_test.csv files (question, A, B, C, D, answer; no header)
  mmlu_pro  JSON or JSONL rows with question_id, question, options, answer, category
  gsm8k     JSONL rows with question and answer ("... #### 72")

Output: one record per line with item_id, benchmark, subject, stem, options, gold.
"""
import argparse
import csv
import json
import re
import sys
from pathlib import Path


def write_rows(rows, out):
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n")


def read_json_rows(path):
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("["):
        return json.loads(text)
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def mmlu(src):
    rows = []
    files = sorted(Path(src).glob("*_test.csv"))
    if not files:
        sys.exit(f"no *_test.csv files under {src}")
    for path in files:
        subject = path.name[: -len("_test.csv")]
        with open(path, newline="", encoding="utf-8") as f:
            for i, rec in enumerate(csv.reader(f)):
                if len(rec) != 6:
                    sys.exit(f"{path}:{i + 1}: expected 6 columns, got {len(rec)}")
                rows.append({
                    "item_id": f"mmlu/{subject}/{i:04d}",
                    "benchmark": "mmlu",
                    "subject": subject,
                    "stem": rec[0].strip(),
                    "options": [o.strip() for o in rec[1:5]],
                    "gold": rec[5].strip().upper(),
                })
    return rows


def mmlu_pro(src):
    rows = []
    for rec in read_json_rows(src):
        options = [o for o in rec["options"] if str(o).strip() not in ("", "N/A")]
        if not 2 <= len(options) <= 10:
            continue
        rows.append({
            "item_id": f"mmlu_pro/{rec['question_id']}",
            "benchmark": "mmlu_pro",
            "subject": rec["category"],
            "stem": rec["question"].strip(),
            "options": options,
            "gold": rec["answer"].strip().upper(),
        })
    return rows


FINAL = re.compile(r"####\s*(.+)$")


def gsm8k(src):
    rows = []
    for i, rec in enumerate(read_json_rows(src)):
        m = FINAL.search(rec["answer"].strip())
        if not m:
            sys.exit(f"{src}: record {i} has no '#### <number>' line")
        gold = m.group(1).strip().replace("$", "")
        rows.append({
            "item_id": f"gsm8k/{i:04d}",
            "benchmark": "gsm8k",
            "subject": "gsm8k",
            "stem": rec["question"].strip(),
            "gold": gold,
        })
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("benchmark", choices=["mmlu", "mmlu_pro", "gsm8k"])
    ap.add_argument("source", help="dump directory (mmlu) or file")
    ap.add_argument("out", help="output JSONL path")
    args = ap.parse_args()
    rows = {"mmlu": mmlu, "mmlu_pro": mmlu_pro, "gsm8k": gsm8k}[args.benchmark](args.source)
    write_rows(rows, args.out)
    print(f"{len(rows)} records -> {args.out}")


if __name__ == "__main__":
    main()
