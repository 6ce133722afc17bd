#!/usr/bin/env python3
"""Regenerates the small synthetic datasets under tests/data.

The files are committed; rerunning this script reproduces them byte for byte.
"""
import json
import random
import sys
from pathlib import Path

MMLU_SUBJECTS = [
    "abstract_algebra", "anatomy", "business_ethics", "clinical_knowledge",
    "college_mathematics", "computer_security", "econometrics", "jurisprudence",
    "machine_learning", "moral_scenarios",
]

# (category, ten-option records, nine-option records)
MMLU_PRO_CATEGORIES = [
    ("law", 45, 0), ("math", 42, 3), ("physics", 38, 0), ("chemistry", 36, 2),
    ("history", 34, 0), ("economics", 33, 0), ("biology", 32, 1), ("psychology", 31, 0),
    ("business", 30, 0), ("philosophy", 30, 0), ("engineering", 24, 20), ("health", 12, 0),
]

WORDS = ("apples crates trains miles hours tickets coins pages boxes students "
         "marbles gallons cookies dollars shelves buses minutes books").split()


def dump(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n")


def mmlu(rng):
    rows = []
    for subject in MMLU_SUBJECTS + ["astronomy"]:
        count = 12 if subject == "astronomy" else 40
        for i in range(count):
            rows.append({
                "item_id": f"mmlu/{subject}/{i:03d}",
                "benchmark": "mmlu",
                "subject": subject,
                "stem": f"Fixture question {i} on {subject.replace('_', ' ')}?",
                "options": [f"{subject} option {k} for item {i}" for k in "wxyz"],
                "gold": "ABCD"[rng.randrange(4)],
            })
    rng.shuffle(rows)
    return rows


def mmlu_pro(rng):
    rows = []
    for category, ten, nine in MMLU_PRO_CATEGORIES:
        for i in range(ten + nine):
            n = 10 if i < ten else 9
            rows.append({
                "item_id": f"mmlu_pro/{category}/{i:03d}",
                "benchmark": "mmlu_pro",
                "subject": category,
                "stem": f"Fixture {category} question {i}?",
                "options": [f"{category} choice {k} of item {i}" for k in range(n)],
                "gold": "ABCDEFGHIJ"[rng.randrange(n)],
            })
    rng.shuffle(rows)
    return rows


def gsm8k(rng):
    rows = []
    for i in range(330):
        length = rng.randrange(12, 90)
        words = [rng.choice(WORDS) for _ in range(length - 2)]
        stem = f"Problem {i}: " + " ".join(words) + " total?"
        gold = rng.randrange(1, 5000)
        if i % 17 == 0:
            gold_text = f"{gold}.5"
        elif gold >= 1000 and i % 3 == 0:
            gold_text = f"{gold // 1000},{gold % 1000:03d}"
        else:
            gold_text = str(gold)
        rows.append({
            "item_id": f"gsm8k/{i:04d}",
            "benchmark": "gsm8k",
            "subject": "gsm8k",
            "stem": stem,
            "gold": gold_text,
        })
    return rows


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests" / "data"
    out.mkdir(parents=True, exist_ok=True)
    dump(out / "mmlu.jsonl", mmlu(random.Random(1)))
    dump(out / "mmlu_pro.jsonl", mmlu_pro(random.Random(2)))
    dump(out / "gsm8k.jsonl", gsm8k(random.Random(3)))


if __name__ == "__main__":
    main()
