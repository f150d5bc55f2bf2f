#!/usr/bin/env python3
"""
Run the complete separation experiment: synthesize a scenario, sweep q,
compare the best q with the FFT baseline and write the baseline trace.
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path


def run_command(description, command):
    """Run a command and handle errors."""
    print("\n" + "=" * 80)
    print(f"STEP: {description}")
    print("=" * 80)
    print(f"Running: {' '.join(command)}\n")

    try:
        subprocess.run(command, check=True)
        print(f"\n✓ {description} completed successfully")
        return True
    except subprocess.CalledProcessError as e:
        print(f"\n✗ {description} failed with error code {e.returncode}", file=sys.stderr)
        return False


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.strip().split("\n")[0])
    parser.add_argument("--out", default="runs/default", help="Output root directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--length", type=int, default=403)
    parser.add_argument("--n-max", dest="n_max", type=int, default=21)
    parser.add_argument("--step", type=float, default=0.1, help="q grid step")
    parser.add_argument("--plot", action="store_true")
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    root = Path(args.out)
    subsep = [sys.executable, "-m", "subsep"]
    seed = ["--seed", str(args.seed)]
    plot = ["--plot"] if args.plot else []

    synth_dir = root / "synth"
    sweep_dir = root / "sweep"
    compare_dir = root / "compare"
    baseline_dir = root / "baseline"
    mixed = str(synth_dir / "mixed.csv")
    truth = str(synth_dir / "signal.csv")

    print("=" * 80)
    print("LOW-FREQUENCY NOISE SEPARATION PIPELINE")
    print("=" * 80)
    print(f"\n  Samples: {args.length}  n_max: {args.n_max}  seed: {args.seed}  q step: {args.step}")

    # Step 1: Synthetic scenario
    if not run_command(
        "Synthesize noise, signal and mixture",
        subsep + ["synth", "--length", str(args.length), "--n-max", str(args.n_max),
                  "--out", str(synth_dir)] + seed + plot
    ):
        return False

    # Step 2: q sweep
    if not run_command(
        "Sweep q against the noise-free signal",
        subsep + ["sweep", "--input", mixed, "--truth", truth, "--step", str(args.step),
                  "--n-max", str(args.n_max), "--out", str(sweep_dir)] + seed + plot
    ):
        return False

    with open(sweep_dir / "summary.json", "r") as f:
        best_q = json.load(f)["best_q"]

    # Step 3: Best q against the FFT baseline
    if not run_command(
        f"Compare q={best_q:g} with the FFT baseline",
        subsep + ["compare", "--input", mixed, "--truth", truth, "--q", repr(best_q),
                  "--n-max", str(args.n_max), "--out", str(compare_dir)] + seed + plot
    ):
        return False

    # Step 4: Baseline trace
    if not run_command(
        "Write the FFT band-stop trace",
        subsep + ["baseline", "--input", mixed, "--n-max", str(args.n_max),
                  "--out", str(baseline_dir)] + seed + plot
    ):
        return False

    print("\n" + "=" * 80)
    print("PIPELINE COMPLETED SUCCESSFULLY")
    print("=" * 80)
    print("\nResults saved to:")
    print(f"  - Scenario: {synth_dir}")
    print(f"  - Sweep CSV: {sweep_dir / 'sweep.csv'}")
    print(f"  - Error traces: {compare_dir}")
    print(f"  - Baseline: {baseline_dir / 'baseline.csv'}")

    return True


if __name__ == '__main__':
    success = main()
    sys.exit(0 if success else 1)
