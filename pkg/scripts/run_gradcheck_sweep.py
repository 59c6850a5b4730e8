"""Finite-difference gradient check over many random problems.

    python scripts/run_gradcheck_sweep.py --seeds 30 --trials 64
"""

import argparse

import numpy as np

from ddsp_vocoder.grad import finite_diff_check, gradcheck_problem


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=30)
    parser.add_argument("--frames", type=int, default=8)
    parser.add_argument("--trials", type=int, default=64)
    parser.add_argument("--eps", type=float, default=1e-5)
    args = parser.parse_args()

    worst_all, degenerate_all = [], 0
    for seed in range(args.seeds):
        track, target = gradcheck_problem(args.frames, seed)
        worst, details = finite_diff_check(track, target, seed=seed, eps=args.eps, trials=args.trials,
                                           rng_seed=seed, return_details=True)
        degenerate = sum(d[-1] for d in details)
        degenerate_all += degenerate
        worst_all.append(worst)
        print(f"seed {seed:3d} max_rel_error {worst:.3e} degenerate {degenerate}")
    worst_all = np.array(worst_all)
    print(f"overall max {worst_all.max():.3e} median {np.median(worst_all):.3e} "
          f"degenerate {degenerate_all}/{args.seeds * args.trials}")


if __name__ == "__main__":
    main()
