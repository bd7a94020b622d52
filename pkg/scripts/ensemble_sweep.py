"""EnKF convergence in the ensemble size on a linear-Gaussian problem.

The exact posterior mean is known, so the root-mean-square error over
repeated runs should fall like ``Z^{-1/2}``.
"""

import argparse

import numpy as np

from rombayes.enkf import ForecastSet, add_forecast_noise, enkf_update
from rombayes.prior import GaussianPrior, sample_prior


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=5)
    parser.add_argument("--reps", type=int, default=30)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    dim, n_obs = args.dim, max(args.dim - 1, 1)
    h = rng.standard_normal((n_obs, dim))
    std = rng.uniform(0.5, 1.5, dim)
    noise = np.full(n_obs, 0.4)
    y = rng.standard_normal(n_obs)
    c_f = np.diag(std**2)
    c_y = h @ c_f @ h.T + np.diag(noise**2)
    exact = c_f @ h.T @ np.linalg.solve(c_y, y)

    sizes = np.array([30, 100, 300, 1000, 3000, 10_000])
    rms = []
    for z in sizes:
        errs = []
        for rep in range(args.reps):
            ens = sample_prior(GaussianPrior(np.zeros(dim), std), z, seed=rep * 7919 + z)
            clean = ens.members @ h.T
            fc = ForecastSet(clean, np.arange(n_obs, dtype=float), False, np.arange(z), clean)
            post = enkf_update(ens, add_forecast_noise(fc, noise, seed=rep), y)
            errs.append(np.sum((post.mean() - exact) ** 2))
        rms.append(np.sqrt(np.mean(errs)))
        print(f"Z={z:>6}  rms error {rms[-1]:.3e}")
    slope = np.polyfit(np.log(sizes), np.log(rms), 1)[0]
    print(f"log-log slope {slope:.3f} (expected -0.5)")


if __name__ == "__main__":
    main()
