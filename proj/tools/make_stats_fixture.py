#!/usr/bin/env python3
"""Writes the synthetic QA fixture used when the released dataset is absent.

The fixture has fixed split sizes and evidence totals so the dataset-statistics
check has exact numbers to compare against. Output is deterministic.
"""
import argparse
import json
import pathlib
import random

TYPES = ["causal", "narrative", "character", "thematic", "goal", "social", "hypothetical"]
SPLITS = {"train": (59, 2967), "test": (29, 1475)}
TOTAL_EVIDENCE = 17327


def evidence_counts(n, total, rng):
    counts = [min(20, max(2, round(rng.gammavariate(2.0, 0.95)) + 2)) for _ in range(n)]
    # Nudge single items up or down until the total is exact.
    while sum(counts) != total:
        i = rng.randrange(n)
        if sum(counts) < total and counts[i] < 20:
            counts[i] += 1
        elif sum(counts) > total and counts[i] > 2:
            counts[i] -= 1
    return counts


def bucket(span):
    return "short" if span <= 4 else ("medium" if span <= 15 else "far")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=pathlib.Path)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    n_items = sum(n for _, n in SPLITS.values())
    counts = evidence_counts(n_items, TOTAL_EVIDENCE, rng)
    args.out_dir.mkdir(parents=True, exist_ok=True)

    offset = 0
    movie_base = 0
    for split, (n_movies, n_qa) in SPLITS.items():
        with open(args.out_dir / f"{split}.jsonl", "w") as out:
            for i in range(n_qa):
                k = counts[offset + i]
                start = rng.randrange(0, 40)
                span = rng.choice([k - 1, rng.randrange(k - 1, k + 14), rng.randrange(k + 15, k + 40)])
                middle = sorted(rng.sample(range(start + 1, start + span), k - 2)) if k > 2 else []
                evidence = [start] + middle + [start + span]
                item = {
                    "question": f"q{offset + i}",
                    "answer": f"a{offset + i}",
                    "evidence_events": evidence,
                    "reasoning_type": TYPES[(offset + i) % len(TYPES)],
                    "scene_distance": bucket(span),
                    "movie_id": f"movie_{movie_base + i % n_movies:03d}",
                }
                out.write(json.dumps(item, separators=(",", ":")) + "\n")
        offset += n_qa
        movie_base += n_movies


if __name__ == "__main__":
    main()
