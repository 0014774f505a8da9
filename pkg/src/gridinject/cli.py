"""``bench`` command line entry point."""

from __future__ import annotations

import argparse
import sys

from . import bench
from .errors import IndexingError, VerificationError

EXIT_VERIFY = 1
EXIT_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bench",
        description="Time bus injection and Jacobian steps of the Ybus and element-wise methods.",
    )
    p.add_argument("--case", action="append", required=True, metavar="PATH",
                   help="MATPOWER .m file or bundled case name; repeat for several cases")
    p.add_argument("--replicate", type=int, default=1, metavar="K",
                   help="stack K uncoupled copies of each case")
    p.add_argument("--reps", type=int, default=20, metavar="N")
    p.add_argument("--warmup", type=int, default=3, metavar="W")
    p.add_argument("--methods", default="ybus,elementwise",
                   help="comma-separated subset of ybus,elementwise")
    p.add_argument("--storage", choices=("interleaved", "separate"), default="interleaved")
    p.add_argument("--reduction", choices=("two_step", "copy_add", "new_matrix"),
                   default="two_step")
    p.add_argument("--derivatives", choices=("two_pass", "matmul"), default="two_pass")
    p.add_argument("--assembly", choices=("inplace", "concat"), default="inplace")
    p.add_argument("--out", choices=("csv", "md"), default="csv")
    p.add_argument("--verify", action="store_true",
                   help="check cross-method agreement (untimed) before timing")
    p.add_argument("--perturb", type=float, default=0.0, metavar="EPS",
                   help="jitter the case voltages by uniform(-EPS, EPS), seed 42")
    p.add_argument("--ratio-ref", metavar="CASE",
                   help="also print time-cost ratios relative to this case name")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    results = []
    try:
        for case in args.case:
            cfg = bench.BenchConfig(
                case_path=case, replicate_k=args.replicate, reps=args.reps,
                warmup=args.warmup, methods=methods, storage_mode=args.storage,
                reduction_variant=args.reduction, derivative_variant=args.derivatives,
                assembly_variant=args.assembly, output=args.out, verify=args.verify,
                perturb=args.perturb,
            )
            results.append(bench.run_bench(cfg))
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (FileNotFoundError, IndexingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    sys.stdout.write(bench.emit_report(results, args.out))
    if args.ratio_ref:
        try:
            rows = bench.time_cost_ratio(results, args.ratio_ref)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        sys.stdout.write("\n" + bench.emit_ratio_report(rows, args.out))

    if args.verify:
        print("verification: both methods agree within "
              f"{bench.VERIFY_TOL:g} pu", file=sys.stderr)
    print(f"aggregation: {bench.AGGREGATION}; {bench.PHASOR_NOTE}", file=sys.stderr)
    for t in results:
        note = bench.simd_note(t)
        if note:
            print(note, file=sys.stderr)
    print(bench.PROFILER_HINT, file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
