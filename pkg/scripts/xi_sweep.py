#!/usr/bin/env python3
"""Sweep the perturbation budget xi and print white-box/transfer WER vs SNR.

Useful for picking an operating point: larger budgets transfer better
but cost SNR, and the momentum methods saturate the ball sooner than
plain PGD. Expects a corpus and two trained models (see
reproduce_campaign.py) and decodes a small utterance subset per budget.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from asrattack.attacks import AttackConfig
from asrattack.evaluate import render_text, run_campaign
from asrattack.models import load_model
from asrattack.train import load_utterances

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", required=True)
    parser.add_argument("--models", required=True, help="comma-separated model JSON paths")
    parser.add_argument("--xi", default="0.002,0.005,0.01,0.02")
    parser.add_argument("--methods", default="pgd,mifgsm")
    parser.add_argument("--limit", type=int, default=12)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    models = {}
    for path in args.models.split(","):
        models[os.path.splitext(os.path.basename(path))[0]] = load_model(path)
    utts, _ = load_utterances(os.path.join(args.data, "manifest.json"))
    test = sorted((u for u in utts if u.split == "test"), key=lambda u: u.utt_id)
    out = run_campaign(
        models,
        test[: args.limit],
        methods=args.methods.split(","),
        xis=[float(x) for x in args.xi.split(",")],
        seed=args.seed,
        attack_config=AttackConfig(),
    )
    print(render_text(out.rows))
