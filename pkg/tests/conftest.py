"""Session-scoped desk-scale fixtures shared by the acceptance suite.

Canonical configuration: corpus master seed 1234 (500 train / 100 test),
linA trained with seed 9, convB with seed 0, both at the training
defaults (20 epochs, lr 0.1, batch 8). Campaign: first 50 test
utterances, all four methods, xi = 0.01, master seed 2024.
"""

import time

import pytest

from asrattack.attacks import AttackConfig
from asrattack.evaluate import run_campaign
from asrattack.synth import SynthSpec, synth_dataset
from asrattack.train import load_utterances, train_model

CORPUS_SEED = 1234
LINA_SEED = 9
CONVB_SEED = 0
CAMPAIGN_SEED = 2024
CHOSEN_XI = 0.01
METHODS = ["pgd", "sago", "mifgsm", "vmifgsm"]
N_CAMPAIGN_UTTS = 50


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    synth_dataset(SynthSpec(master_seed=CORPUS_SEED), 500, 100, out)
    return out


@pytest.fixture(scope="session")
def trained_models(corpus_dir):
    t0 = time.monotonic()
    manifest = corpus_dir / "manifest.json"
    linA, rep_a = train_model(manifest, "linA", seed=LINA_SEED)
    convB, rep_b = train_model(manifest, "convB", seed=CONVB_SEED)
    elapsed = time.monotonic() - t0
    return {
        "models": {"linA": linA, "convB": convB},
        "reports": {"linA": rep_a, "convB": rep_b},
        "train_seconds": elapsed,
    }


@pytest.fixture(scope="session")
def campaign_utts(corpus_dir):
    utts, _ = load_utterances(corpus_dir / "manifest.json")
    test = sorted((u for u in utts if u.split == "test"), key=lambda u: u.utt_id)
    return test[:N_CAMPAIGN_UTTS]


def run_canonical_campaign(models, utts):
    return run_campaign(
        models,
        utts,
        methods=METHODS,
        xis=[CHOSEN_XI],
        seed=CAMPAIGN_SEED,
        attack_config=AttackConfig(),
        noise_source="white",
        noise_snr_db=30.0,
    )


@pytest.fixture(scope="session")
def canonical_campaign(trained_models, campaign_utts):
    t0 = time.monotonic()
    out = run_canonical_campaign(trained_models["models"], campaign_utts)
    elapsed = time.monotonic() - t0
    return {"output": out, "campaign_seconds": elapsed}
