"""Command-line entry point: ``ddsp-vocoder {synth,analyze,gradcheck,bench,flops,inspect}``.

Exit codes: 0 success, 2 I/O or parse error, 3 validation or shape error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from ddsp_vocoder.core import DEFAULT_CONFIG, validate_track
from ddsp_vocoder.fileio import (
    FormatError,
    read_f0_text,
    read_features,
    read_wav,
    write_features,
    write_loss_history,
    write_wav,
)

EXIT_OK, EXIT_IO, EXIT_INVALID = 0, 2, 3

log = logging.getLogger("ddsp_vocoder")


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _print_pairs(pairs) -> None:
    for key, value in pairs:
        print(f"{key}={value}")


def cmd_synth(args) -> int:
    from ddsp_vocoder.synth import synthesize

    config = DEFAULT_CONFIG
    try:
        track, meta = read_features(args.features)
    except (OSError, FormatError) as exc:
        return _fail(EXIT_IO, f"cannot read features: {exc}")
    if meta["sample_rate_hz"] != config.sample_rate_hz or meta["frame_shift"] != config.frame_shift:
        return _fail(EXIT_INVALID, f"feature file is for {meta['sample_rate_hz']} Hz / hop "
                                   f"{meta['frame_shift']}, vocoder runs {config.sample_rate_hz} Hz / hop {config.frame_shift}")
    violations = validate_track(track, config)
    if violations:
        for v in violations:
            print(f"frame {v.index}: {v.field} {v.reason}", file=sys.stderr)
        return _fail(EXIT_INVALID, f"{len(violations)} invalid frame fields")
    audio = synthesize(track, config, args.seed)
    try:
        write_wav(args.out, audio)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write {args.out}: {exc}")
    print(f"samples={len(audio)}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    from ddsp_vocoder.analysis import OptimizerConfig, estimate_features

    config = DEFAULT_CONFIG
    try:
        audio = read_wav(args.audio)
        f0 = read_f0_text(args.f0)
    except (OSError, FormatError) as exc:
        return _fail(EXIT_IO, f"cannot read inputs: {exc}")
    if audio.sample_rate_hz != config.sample_rate_hz:
        return _fail(EXIT_IO, f"audio is {audio.sample_rate_hz} Hz, expected {config.sample_rate_hz} Hz")
    needed = config.num_frames(len(audio))
    if len(f0) != needed:
        return _fail(EXIT_INVALID, f"f0 file has {len(f0)} frames, audio needs {needed}")
    if np.any(~np.isfinite(f0)) or np.any(f0 < 0) or np.any(f0 >= config.sample_rate_hz / 2):
        return _fail(EXIT_INVALID, "f0 values must lie in [0, sample_rate/2)")
    opt = OptimizerConfig(learning_rate=args.lr, max_iters=args.iters)
    track, history = estimate_features(audio, f0, config, opt, args.seed)
    history_path = args.history or f"{args.out}.loss.txt"
    try:
        write_features(args.out, track, config)
        write_loss_history(history_path, history)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write outputs: {exc}")
    _print_pairs([("initial_loss", history[0]), ("best_loss", min(history)), ("iterations", args.iters)])
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from ddsp_vocoder.grad import finite_diff_check, gradcheck_problem

    track, target = gradcheck_problem(args.frames, args.seed)
    worst, details = finite_diff_check(track, target, DEFAULT_CONFIG, args.seed, args.eps,
                                       args.trials, rng_seed=args.seed, return_details=True)
    if args.trials == 1:
        t, field, k, analytic, numeric, rel, _ = details[0]
        _print_pairs([("frame", t), ("field", field), ("index", k),
                      ("analytic", analytic), ("numeric", numeric)])
    degenerate = sum(1 for d in details if d[-1])
    _print_pairs([("trials", args.trials), ("degenerate_samples", degenerate),
                  ("max_rel_error", f"{worst:.6e}")])
    return EXIT_OK if worst < args.tolerance else 1


def cmd_flops(args) -> int:
    from ddsp_vocoder.perf import count_flops

    _print_pairs(count_flops(DEFAULT_CONFIG).as_pairs())
    return EXIT_OK


def cmd_bench(args) -> int:
    from ddsp_vocoder.perf import bench_rtf, benchmark_track, count_flops

    stats = bench_rtf(benchmark_track(args.seconds), DEFAULT_CONFIG, args.seed, args.repeats)
    _print_pairs([("mflops_total", round(count_flops(DEFAULT_CONFIG).mflops_total, 4))])
    _print_pairs(stats.as_pairs())
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        track, meta = read_features(args.features)
    except (OSError, FormatError) as exc:
        return _fail(EXIT_IO, f"cannot read features: {exc}")
    voiced = track.f0 > 0
    pairs = list(meta.items())
    pairs += [
        ("voiced_frames", int(voiced.sum())),
        ("f0_mean_voiced", float(track.f0[voiced].mean()) if voiced.any() else 0.0),
        ("p_mean", float(track.p.mean()) if len(track) else 0.0),
        ("v_mean", float(track.v.mean()) if len(track) else 0.0),
        ("violations", len(validate_track(track))),
    ]
    _print_pairs(pairs)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddsp-vocoder", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a feature file to WAV")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="recover p and v from audio and an f0 track")
    p.add_argument("--audio", required=True)
    p.add_argument("--f0", required=True, help="text file, one Hz value per frame")
    p.add_argument("--out", required=True)
    p.add_argument("--history", help="loss history path (default: OUT.loss.txt)")
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--trials", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="single-threaded real-time factor")
    p.add_argument("--seconds", type=float, default=10.0)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("flops", help="analytic FLOP count per second of audio")
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("inspect", help="summarize a feature file")
    p.add_argument("--features", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
