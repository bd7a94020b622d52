"""Burgers end-to-end run: POD energy, projection error and corrected ROM errors."""

import argparse

import numpy as np

from _common import configure, run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default="runs/burgers")
    args = parser.parse_args()

    report = run(configure("burgers", args.output))
    eps = report.error_series
    print(f"POD energy fraction: {report.summary['energy_fraction']:.6f}")
    proj = eps["projection"]
    for key in ("uncorrected", "enkf", "pce"):
        print(
            f"{key:<12} mean eps {np.mean(eps[key]):.4e}  "
            f"max eps/eps_projection {np.max(eps[key] / proj):8.1f}"
        )
    print(f"projection mean eps {np.mean(proj):.4e}")


if __name__ == "__main__":
    main()
