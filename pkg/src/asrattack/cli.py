"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Every run
prints the master seed in effect so artifacts can be regenerated.
"""

from __future__ import annotations

import argparse
import os
import sys


class _UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageExit(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="asrattack", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("gen-data", help="synthesize the seeded toy corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", type=int, default=500)
    p.add_argument("--test", type=int, default=100)

    p = sub.add_parser("train", help="train a toy CTC recognizer")
    p.add_argument("--data", required=True)
    p.add_argument("--arch", required=True, choices=["linA", "convB"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--out", required=True)

    p = sub.add_parser("attack", help="attack one utterance")
    p.add_argument("--model", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--transcript", required=True)
    p.add_argument("--method", required=True, choices=["pgd", "sago", "mifgsm", "vmifgsm"])
    p.add_argument("--xi", type=float, required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--nv", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--result", default=None)

    p = sub.add_parser("campaign", help="full source->target attack campaign")
    p.add_argument("--models", required=True, help="comma-separated model JSON paths")
    p.add_argument("--data", required=True)
    p.add_argument("--methods", default="pgd,sago,mifgsm,vmifgsm")
    p.add_argument("--xi", default="0.002,0.0035")
    p.add_argument("--out", required=True)
    p.add_argument("--noise", default="white", help="'white', a WAV path, or 'none'")
    p.add_argument("--noise-snr", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--split", default="test", choices=["train", "test", "all"])
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--log", default=None, help="per-utterance JSONL log path")

    p = sub.add_parser("gradcheck", help="finite-difference checks of every backward pass")
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("vad-dump", help="dump the VAD mask of a WAV as JSON")
    p.add_argument("--wav", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)

    return parser


def _cmd_gen_data(args) -> int:
    from .synth import SynthSpec, synth_dataset

    print(f"master seed: {args.seed}")
    spec = SynthSpec(master_seed=args.seed)
    manifest = synth_dataset(spec, args.train, args.test, args.out)
    print(f"wrote {len(manifest.entries)} utterances to {args.out}")
    return 0


def _cmd_train(args) -> int:
    from .models import save_model
    from .train import train_model

    print(f"master seed: {args.seed}")
    manifest_path = os.path.join(args.data, "manifest.json")
    params, report = train_model(
        manifest_path,
        arch_id=args.arch,
        seed=args.seed,
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch,
    )
    save_model(params, args.out)
    print(
        f"{args.arch}: train WER {report.train_wer:.2f}%  test WER {report.test_wer:.2f}%  "
        f"({args.epochs} epochs, lr {args.lr})"
    )
    return 0


def _cmd_attack(args) -> int:
    from .attacks import AttackConfig, run_attack
    from .audio import read_wav, write_wav
    from .models import load_model

    print(f"master seed: {args.seed}")
    params = load_model(args.model)
    clean = read_wav(args.wav)
    target = params.vocabulary.encode(args.transcript)
    config = AttackConfig(
        method=args.method,
        xi=args.xi,
        alpha=args.alpha,
        steps=args.steps,
        momentum_decay=args.mu,
        variance_samples=args.nv,
        seed=args.seed,
    )
    result = run_attack(params, clean, target, config)
    write_wav(result.adversarial, args.out)
    if args.result:
        with open(args.result, "w", encoding="utf-8") as fh:
            fh.write(result.to_json())
    snr = "inf" if result.snr_db is None else f"{result.snr_db:.2f}"
    print(f"{args.method} xi={args.xi:g}: wrote {args.out} (SNR {snr} dB)")
    return 0


def _cmd_campaign(args) -> int:
    from .evaluate import render_csv, render_text, run_campaign, save_utterance_log
    from .models import load_model
    from .train import load_utterances

    print(f"master seed: {args.seed}")
    models = {}
    for path in args.models.split(","):
        name = os.path.splitext(os.path.basename(path))[0]
        models[name] = load_model(path)
    manifest_path = os.path.join(args.data, "manifest.json")
    utts, _ = load_utterances(manifest_path)
    if args.split != "all":
        utts = [u for u in utts if u.split == args.split]
    utts = sorted(utts, key=lambda u: u.utt_id)
    if args.limit is not None:
        utts = utts[: args.limit]
    from .attacks import AttackConfig

    output = run_campaign(
        models,
        utts,
        methods=args.methods.split(","),
        xis=[float(x) for x in args.xi.split(",")],
        seed=args.seed,
        attack_config=AttackConfig(steps=args.steps),
        noise_source=None if args.noise == "none" else args.noise,
        noise_snr_db=args.noise_snr,
        jobs=args.jobs,
    )
    csv_text = render_csv(output.rows)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    if args.log:
        save_utterance_log(output.utterance_log, args.log)
    print(render_text(output.rows))
    print(f"wrote {args.out}")
    return 0


def _cmd_gradcheck(args) -> int:
    from .gradcheck import run_all

    print(f"master seed: {args.seed}")
    outcomes = run_all(cases=args.cases, tol=args.tol, seed=args.seed)
    failed = 0
    for o in outcomes:
        status = "PASS" if o.passed else "FAIL"
        failed += not o.passed
        print(f"{status}  {o.name:<18} seed={o.seed:<4d} rel_err={o.rel_err:.3e} tol={o.tol:g}")
    print(f"{len(outcomes) - failed}/{len(outcomes)} checks passed")
    return 0 if failed == 0 else 2


def _cmd_vad_dump(args) -> int:
    from .audio import read_wav
    from .vad import compute_vad_mask

    print(f"master seed: {args.seed}")
    mask = compute_vad_mask(read_wav(args.wav))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(mask.to_json())
    print(
        f"speech [{mask.speech_onset}, {mask.speech_offset}) "
        f"fallback={mask.fallback_flag} -> {args.out}"
    )
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "attack": _cmd_attack,
    "campaign": _cmd_campaign,
    "gradcheck": _cmd_gradcheck,
    "vad-dump": _cmd_vad_dump,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit:
        return 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - one-line cause, exit 2
        sys.stderr.write(f"asrattack {args.command}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
