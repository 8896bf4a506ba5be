"""Parameter recovery of the three estimators on the baseline scenario.

Prints, per seed and estimator, the largest absolute deviation of the
aligned Gamma from the truth, plus the mean bias over seeds.
"""

import argparse
import time

import numpy as np

from mlca import ModelSpec, baseline_truth, fit, generate
from mlca.simulate import align_low


def aligned_gamma(res, truth, W):
    perm_low = align_low(res.phi, truth.phi)
    perm_high = (0, 1) if np.mean(np.argmax(res.posteriors.pw, axis=1) == W) >= 0.5 else (1, 0)
    return res.structural.permuted(low_perm=perm_low, high_perm=perm_high).gamma


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--groups", "-J", type=int, default=50)
    ap.add_argument("--units", "-n", type=int, default=100)
    args = ap.parse_args()

    truth = baseline_truth()
    errors = {e: [] for e in ("two_step", "two_stage", "one_step")}
    print(f"{'seed':>4} {'estimator':>10} {'max|err|':>9} {'seconds':>8}")
    for seed in range(1, args.seeds + 1):
        sim = generate(truth, args.groups, args.units, seed=seed)
        for est in errors:
            t0 = time.perf_counter()
            res = fit(sim.dataset, ModelSpec(3, 2, est), inference=False)
            err = aligned_gamma(res, truth, sim.W) - truth.structural.gamma
            errors[est].append(err)
            print(f"{seed:>4} {est:>10} {np.abs(err).max():>9.4f} {time.perf_counter() - t0:>8.2f}")
    print()
    for est, errs in errors.items():
        print(f"{est:>10}: mean |bias| {np.abs(np.mean(errs, axis=0)).mean():.4f}, mean RMSE {np.sqrt(np.mean(np.square(errs))):.4f}")


if __name__ == "__main__":
    main()
