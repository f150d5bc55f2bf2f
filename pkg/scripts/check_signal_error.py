#!/usr/bin/env python3
"""
Quick script to check the error norm between a filtered trace and the truth.
"""

import sys
from pathlib import Path

import numpy as np

from subsep.errors import SubsepError
from subsep.pipeline import error_norm
from subsep.signal import read_signal_csv


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("Usage: python check_signal_error.py <estimate_csv> <truth_csv>")
        return 1

    estimate_path, truth_path = Path(argv[0]), Path(argv[1])
    try:
        estimate = read_signal_csv(estimate_path)
        truth = read_signal_csv(truth_path)
        distance = error_norm(estimate, truth)
    except (SubsepError, OSError) as err:
        print(f"Error: {err}")
        return 1

    peak = int(np.argmax(np.abs(estimate.samples - truth.samples)))
    print(f"\nEstimate: {estimate_path} ({estimate.length} samples)")
    print(f"Truth:    {truth_path}")
    print(f"\nError norm: {distance:.6f}")
    print(f"Largest deviation at t={truth.times[peak]:.6g}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
