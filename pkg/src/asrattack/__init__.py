"""Time-domain transferable adversarial attacks against toy CTC recognizers."""

from .audio import AudioBuffer, mix_at_snr, read_wav, snr_db, white_noise, write_wav
from .attacks import AttackConfig, AttackResult, project_linf, run_attack, time_domain_gradient
from .ctc import ctc_loss_and_grad
from .evaluate import CampaignRow, WerBreakdown, noise_baseline, render_csv, run_campaign, wer
from .features import SpectrogramConfig, build_mel_filterbank, extract_features, features_vjp
from .models import ToyModelParams, Vocabulary, greedy_decode, load_model, model_forward, save_model
from .synth import SynthSpec, synth_dataset, synth_utterance
from .train import train_model
from .vad import VadConfig, VadMask, apply_mask, compute_vad_mask

__version__ = "0.1.0"
