"""Sensitivity screening on the quadratic truth: which entries survive?"""

import argparse
import warnings

import numpy as np

from rombayes.fom import default_truth_correction, oscillator_truth
from rombayes.pipeline import run_pipeline

from _common import configure


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default="runs/screening")
    parser.add_argument("--threshold", type=float, default=0.95)
    args = parser.parse_args()

    cfg = configure("quadratic_truth", args.output, sensitivity={"threshold": args.threshold})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = run_pipeline(cfg, until="sensitivity")
    fom = cfg.fom
    base = oscillator_truth(fom.n_modes, damping=fom.damping, coupling=fom.coupling, seed=fom.truth_seed)
    truth = default_truth_correction(base.diffusion, base.convection, multiple=fom.truth_multiple)

    sens = report.sensitivity
    active = set(sens.active_set.tolist())
    print(f"retained {len(active)} of {sens.ratio.size} ({1 - len(active) / sens.ratio.size:.0%} discarded)")
    for idx, value in sorted(truth.items()):
        print(f"true entry {idx:>4} = {value:+.4f}  J = {sens.ratio[idx]:.4f}  kept {idx in active}")
    order = np.argsort(sens.ratio)[:10]
    print("ten most informed entries:", order.tolist())


if __name__ == "__main__":
    main()
