"""Print the FLOP breakdown and single-threaded RTF for several track lengths.

    python scripts/run_benchmark.py --seconds 1 5 10 20
"""

import argparse

from ddsp_vocoder.perf import bench_rtf, benchmark_track, count_flops, rtf_lower_bound


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seconds", type=float, nargs="+", default=[1.0, 5.0, 10.0, 20.0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--machine-gflops", type=float, default=2.0,
                        help="sustained rate used for the FLOP-implied RTF")
    args = parser.parse_args()

    report = count_flops()
    for name, flops in report.stages.items():
        print(f"{name:22s} {flops:10.1f} flops/frame")
    print(f"{'total':22s} {report.flops_per_frame:10.1f} flops/frame")
    print(f"mflops per second of audio: {report.mflops_total:.3f}")
    for line in report.conventions:
        print(f"  convention: {line}")
    print(f"flop-implied rtf at {args.machine_gflops} GFLOP/s: {rtf_lower_bound(report, args.machine_gflops):.5f}")
    print()
    print(f"{'seconds':>8s} {'median':>9s} {'p95':>9s}")
    for seconds in args.seconds:
        stats = bench_rtf(benchmark_track(seconds), repeats=args.repeats)
        print(f"{seconds:8.1f} {stats.median:9.5f} {stats.p95:9.5f}")


if __name__ == "__main__":
    main()
