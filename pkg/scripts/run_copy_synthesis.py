"""Copy-synthesis experiment: render known features, recover p and v, report the fit.

    python scripts/run_copy_synthesis.py --iters 2000 --out results/copy
"""

import argparse
import logging
import time
from pathlib import Path

import numpy as np

from ddsp_vocoder.analysis import OptimizerConfig, estimate_features
from ddsp_vocoder.core import FeatureTrack
from ddsp_vocoder.fileio import write_features, write_loss_history, write_wav
from ddsp_vocoder.synth import synthesize


def known_features(frames: int) -> FeatureTrack:
    """Gliding f0, fixed two-formant envelope with spectral tilt, periodicity falling with frequency."""
    t = np.arange(frames)
    k = np.arange(257)
    f0 = 130.0 + 30.0 * np.sin(2 * np.pi * t / frames)
    v = (-3.0 + 2.0 * np.exp(-0.5 * ((k - 40) / 5.0) ** 2)
         + 0.8 * np.exp(-0.5 * ((k - 110) / 8.0) ** 2) - 1.5 * k / 256)
    p = np.linspace(0.9, 0.2, 12)
    return FeatureTrack(f0, np.tile(p, (frames, 1)), np.tile(v, (frames, 1)))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--frames", type=int, default=188)
    parser.add_argument("--iters", type=int, default=2000)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", type=Path, default=None, help="directory for wav, features and history")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO)

    known = known_features(args.frames)
    target = synthesize(known, seed=args.seed)

    def progress(it, loss, track):
        if it % 200 == 0:
            print(f"iter {it:5d} loss {loss:.4f}")

    start = time.perf_counter()
    opt = OptimizerConfig(learning_rate=args.lr, max_iters=args.iters)
    best, history = estimate_features(target, known.f0, opt=opt, seed=args.seed, callback=progress)
    elapsed = time.perf_counter() - start

    true_peak = int(np.argmax(known.v[0]))
    edge = len(best) // 10
    found_peak = int(np.argmax(np.exp(best.v[edge:len(best) - edge]).mean(axis=0)))
    print(f"initial_loss={history[0]:.4f}")
    print(f"best_loss={min(history):.4f}")
    print(f"reduction={1 - min(history) / history[0]:.4f}")
    print(f"formant_true={true_peak} formant_found={found_peak}")
    print(f"p_mean_abs_error={np.abs(best.p - known.p).mean():.4f}")
    print(f"seconds={elapsed:.1f}")

    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_wav(args.out / "target.wav", target)
        write_wav(args.out / "recovered.wav", synthesize(best, seed=args.seed))
        write_features(args.out / "recovered.feat", best)
        write_loss_history(args.out / "loss.txt", history)


if __name__ == "__main__":
    main()
