"""Identify the closure of a known quadratic truth and compare both smoothers."""

import argparse

import numpy as np

from _common import configure, run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default="runs/synthetic")
    parser.add_argument("--Z", type=int, default=1000)
    args = parser.parse_args()

    cfg = configure("quadratic_truth", args.output, smoother={"Z": args.Z})
    report = run(cfg)
    eps = report.error_series
    print(f"active variables: {report.summary['n_active']} of {report.summary['n_parameters']}")
    for key in ("uncorrected", "enkf", "pce"):
        if key in eps:
            print(f"mean eps {key:<12} {np.mean(eps[key]):.4e}")
    print(f"corrected/uncorrected (EnKF): {np.mean(eps['enkf']) / np.mean(eps['uncorrected']):.4f}")
    print(f"outputs in {args.output}")


if __name__ == "__main__":
    main()
