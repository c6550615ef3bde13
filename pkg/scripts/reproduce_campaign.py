#!/usr/bin/env python3
"""End-to-end reproduction of the canonical desk-scale experiment.

Generates the seeded corpus, trains both recognizers at the training
defaults, runs the four-method transfer campaign at xi = 0.01 over the
first 50 test utterances, and writes results.csv plus a per-utterance
JSONL log. Everything is seeded; rerunning reproduces identical bytes.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from asrattack.cli import main as cli

CORPUS_SEED = 1234
LINA_SEED = 9
CONVB_SEED = 0
CAMPAIGN_SEED = 2024


def run(out_dir: str, jobs: int) -> int:
    data = os.path.join(out_dir, "corpus")
    lina = os.path.join(out_dir, "linA.json")
    convb = os.path.join(out_dir, "convB.json")
    results = os.path.join(out_dir, "results.csv")
    log = os.path.join(out_dir, "utterances.jsonl")
    steps = [
        ["gen-data", "--out", data, "--seed", str(CORPUS_SEED), "--train", "500", "--test", "100"],
        ["train", "--data", data, "--arch", "linA", "--seed", str(LINA_SEED), "--out", lina],
        ["train", "--data", data, "--arch", "convB", "--seed", str(CONVB_SEED), "--out", convb],
        [
            "campaign", "--models", f"{lina},{convb}", "--data", data,
            "--methods", "pgd,sago,mifgsm,vmifgsm", "--xi", "0.01",
            "--seed", str(CAMPAIGN_SEED), "--limit", "50",
            "--out", results, "--log", log, "--jobs", str(jobs),
        ],
    ]
    for argv in steps:
        code = cli(argv)
        if code != 0:
            return code
    print(f"done: {results}")
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/canonical")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    sys.exit(run(args.out, args.jobs))
