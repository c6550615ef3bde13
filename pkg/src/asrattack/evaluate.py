"""WER metric, noise baselines, and the source->target transfer campaign."""

from __future__ import annotations

import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .attacks import AttackConfig, run_attack
from .audio import AudioBuffer, mix_at_snr, read_wav, snr_db, white_noise
from .audio import ATTACK_SAMPLE_RATE
from .features import SpectrogramConfig, extract_features
from .models import ToyModelParams, greedy_decode, model_forward
from .train import Utterance


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class WerBreakdown:
    substitutions: int
    deletions: int
    insertions: int
    reference_words: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer_percent(self) -> float:
        return min(100.0, 100.0 * self.errors / self.reference_words)


def wer(reference, hypothesis) -> WerBreakdown:
    """Minimal-edit WER with deterministic backtrace (sub > del > ins on ties)."""
    ref = [str(t) for t in reference]
    hyp = [str(t) for t in hypothesis]
    if not ref:
        raise EvalError("empty reference")
    m, n = len(ref), len(hyp)
    d = np.zeros((m + 1, n + 1), dtype=np.int64)
    d[:, 0] = np.arange(m + 1)
    d[0, :] = np.arange(n + 1)
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            sub = d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            d[i, j] = min(sub, d[i - 1, j] + 1, d[i, j - 1] + 1)

    subs = dels = ins = 0
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return WerBreakdown(
        substitutions=int(subs), deletions=int(dels), insertions=int(ins), reference_words=m
    )


def pooled_wer(pairs) -> float:
    """Corpus WER: total errors over total reference words, capped at 100."""
    errors = 0
    words = 0
    for ref, hyp in pairs:
        b = wer(ref, hyp)
        errors += b.errors
        words += b.reference_words
    if words == 0:
        raise EvalError("no reference words")
    return min(100.0, 100.0 * errors / words)


@dataclass(frozen=True)
class CampaignRow:
    source_model: str
    target_model: str
    method: str
    xi: float | None
    mean_snr_db: float | None
    wer_clean: float
    wer_adv: float
    n_utts: int
    white_box: bool


def _decode(params: ToyModelParams, audio: AudioBuffer, config: SpectrogramConfig) -> np.ndarray:
    return greedy_decode(model_forward(params, extract_features(audio, config)))


def _utterance_seed(master_seed: int, utt_id: str) -> int:
    # stable across runs and worker schedules; independent of list order
    import zlib

    return (master_seed * 1000003 + zlib.crc32(utt_id.encode())) % (2**31)


def clean_rows(
    models: dict[str, ToyModelParams],
    utts: list[Utterance],
    config: SpectrogramConfig = SpectrogramConfig(),
) -> list[CampaignRow]:
    rows = []
    for name, params in models.items():
        w = pooled_wer([(u.tokens, _decode(params, u.audio, config)) for u in utts])
        rows.append(
            CampaignRow(
                source_model="-",
                target_model=name,
                method="clean",
                xi=None,
                mean_snr_db=None,
                wer_clean=w,
                wer_adv=w,
                n_utts=len(utts),
                white_box=False,
            )
        )
    return rows


def noise_baseline(
    model: ToyModelParams,
    model_name: str,
    utts: list[Utterance],
    noise_source: str,
    target_snr_db: float,
    seed: int,
    config: SpectrogramConfig = SpectrogramConfig(),
) -> CampaignRow:
    """Decode every utterance with noise mixed at the target SNR."""
    if noise_source != "white":
        noise = read_wav(noise_source)
        if float(np.mean(noise.samples**2)) <= 0.0:
            raise EvalError(f"noise file {noise_source} has zero power")
    clean_pairs = []
    noisy_pairs = []
    snrs = []
    for u in utts:
        if noise_source == "white":
            noise = white_noise(len(u.audio), seed=_utterance_seed(seed, u.utt_id + ":wn"))
        noisy = mix_at_snr(u.audio, noise, target_snr_db, seed=_utterance_seed(seed, u.utt_id))
        snrs.append(snr_db(u.audio, noisy.samples - u.audio.samples))
        clean_pairs.append((u.tokens, _decode(model, u.audio, config)))
        noisy_pairs.append((u.tokens, _decode(model, noisy, config)))
    label = "noise-white" if noise_source == "white" else f"noise-file:{os.path.basename(noise_source)}"
    return CampaignRow(
        source_model="-",
        target_model=model_name,
        method=label,
        xi=None,
        mean_snr_db=float(np.mean(snrs)),
        wer_clean=pooled_wer(clean_pairs),
        wer_adv=pooled_wer(noisy_pairs),
        n_utts=len(utts),
        white_box=False,
    )


def _attack_one(args):
    source_params, utt, method, xi, base_config, master_seed, spec_config = args
    config = replace(
        base_config,
        method=method,
        xi=xi,
        seed=_utterance_seed(master_seed, f"{utt.utt_id}:{method}:{xi}"),
    )
    result = run_attack(source_params, utt.audio, utt.tokens, config, spec_config=spec_config)
    return utt.utt_id, result.adversarial.samples, result.snr_db


@dataclass
class CampaignOutput:
    rows: list[CampaignRow]
    utterance_log: list[dict]


def run_campaign(
    models: dict[str, ToyModelParams],
    utts: list[Utterance],
    methods: list[str],
    xis: list[float],
    seed: int = 0,
    attack_config: AttackConfig = AttackConfig(),
    spec_config: SpectrogramConfig = SpectrogramConfig(),
    noise_source: str | None = "white",
    noise_snr_db: float = 30.0,
    jobs: int = 1,
) -> CampaignOutput:
    """Attack every utterance on every source model; decode on every target.

    Deterministic given the master seed: per-utterance attack seeds are
    derived from (seed, utterance id, method, xi), and results are
    assembled in sorted utterance order regardless of worker count.
    """
    if not models:
        raise EvalError("need at least one model")
    utts = sorted(utts, key=lambda u: u.utt_id)
    rows = clean_rows(models, utts, spec_config)
    if noise_source is not None:
        for name, params in models.items():
            rows.append(
                noise_baseline(params, name, utts, noise_source, noise_snr_db, seed, spec_config)
            )

    clean_wers = {
        name: pooled_wer([(u.tokens, _decode(params, u.audio, spec_config)) for u in utts])
        for name, params in models.items()
    }

    log = []
    for source_name, source_params in models.items():
        for method in methods:
            for xi in xis:
                tasks = [
                    (source_params, u, method, xi, attack_config, seed, spec_config)
                    for u in utts
                ]
                if jobs > 1:
                    with ProcessPoolExecutor(max_workers=jobs) as pool:
                        outcomes = list(pool.map(_attack_one, tasks))
                else:
                    outcomes = [_attack_one(t) for t in tasks]
                outcomes.sort(key=lambda r: r[0])
                adv_audio = {
                    utt_id: AudioBuffer(samples, ATTACK_SAMPLE_RATE)
                    for utt_id, samples, _ in outcomes
                }
                utt_snr = {utt_id: s for utt_id, _, s in outcomes}
                snrs = [s for s in utt_snr.values() if s is not None]
                mean_snr = float(np.mean(snrs)) if snrs else None
                for target_name, target_params in models.items():
                    pairs = []
                    for u in utts:
                        hyp = _decode(target_params, adv_audio[u.utt_id], spec_config)
                        pairs.append((u.tokens, hyp))
                        log.append(
                            {
                                "utterance_id": u.utt_id,
                                "source": source_name,
                                "target": target_name,
                                "method": method,
                                "xi": xi,
                                "snr_db": utt_snr[u.utt_id],
                                "wer_clean": wer(
                                    u.tokens, _decode(target_params, u.audio, spec_config)
                                ).wer_percent,
                                "wer_adv": wer(u.tokens, hyp).wer_percent,
                            }
                        )
                    rows.append(
                        CampaignRow(
                            source_model=source_name,
                            target_model=target_name,
                            method=method,
                            xi=xi,
                            mean_snr_db=mean_snr,
                            wer_clean=clean_wers[target_name],
                            wer_adv=pooled_wer(pairs),
                            n_utts=len(utts),
                            white_box=source_name == target_name,
                        )
                    )
    return CampaignOutput(rows=rows, utterance_log=log)


CSV_COLUMNS = (
    "source_model",
    "target_model",
    "method",
    "xi",
    "mean_snr_db",
    "wer_clean",
    "wer_adv",
    "n_utts",
    "white_box",
)


def _fmt(value, decimals=2) -> str:
    if value is None:
        return ""
    return f"{value:.{decimals}f}"


def render_csv(rows: list[CampaignRow]) -> str:
    """UTF-8 CSV, '.' decimal, 2-decimal WER and SNR."""
    if not rows:
        raise EvalError("no rows to render")
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    for r in rows:
        out.write(
            ",".join(
                [
                    r.source_model,
                    r.target_model,
                    r.method,
                    "" if r.xi is None else f"{r.xi:g}",
                    _fmt(r.mean_snr_db),
                    _fmt(r.wer_clean),
                    _fmt(r.wer_adv),
                    str(r.n_utts),
                    "yes" if r.white_box else "no",
                ]
            )
            + "\n"
        )
    return out.getvalue()


def render_text(rows: list[CampaignRow]) -> str:
    """Aligned text table grouped by source model."""
    if not rows:
        raise EvalError("no rows to render")
    header = ["target", "method", "xi", "snr_db", "wer_clean", "wer_adv", "wb"]
    groups: dict[str, list[CampaignRow]] = {}
    for r in rows:
        groups.setdefault(r.source_model, []).append(r)
    lines = []
    for source, group in groups.items():
        title = "baselines" if source == "-" else f"source: {source}"
        lines.append(f"== {title} ==")
        table = [header] + [
            [
                r.target_model,
                r.method,
                "" if r.xi is None else f"{r.xi:g}",
                _fmt(r.mean_snr_db),
                _fmt(r.wer_clean),
                _fmt(r.wer_adv),
                "*" if r.white_box else "",
            ]
            for r in group
        ]
        widths = [max(len(row[c]) for row in table) for c in range(len(header))]
        for row in table:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        lines.append("")
    return "\n".join(lines)


def save_utterance_log(log: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(json.dumps(entry) + "\n")
