#!/usr/bin/env python3
"""Empirical convergence rates for schedules sampled from a neuron mixture.

Draws N-slice schedules from the built-in atom mixture over a range of N,
measures the endpoint error e_N against a finely integrated reference flow
and the time-grid discrepancy delta_N, and fits log-log slopes.  Both are
expected near -1/2.

Usage:
    python scripts/maurey_rate_study.py [n_seeds] [seed]
"""

import sys

import numpy as np

from reluflow.maurey import (
    builtin_mixture,
    rate_fit,
    reference_flow,
    run_errors,
    sample_schedule,
)

NS = (16, 32, 64, 128, 256, 512)


def main() -> int:
    n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0

    m = builtin_mixture()
    rng = np.random.default_rng(seed)
    radius = 0.5 * m.R / np.sqrt(m.d)
    pts = rng.uniform(-radius, radius, size=(64, m.d))
    reference = reference_flow(m, pts, step=1e-3)

    means_e, means_d = [], []
    print(f"{'N':>5}  {'mean e_N':>12}  {'mean delta_N':>12}")
    for N in NS:
        es, ds = zip(*(
            run_errors(sample_schedule(m, N, seed + s), m, pts,
                       reference=reference)
            for s in range(n_seeds)))
        means_e.append((N, float(np.mean(es))))
        means_d.append((N, float(np.mean(ds))))
        print(f"{N:>5}  {means_e[-1][1]:>12.6g}  {means_d[-1][1]:>12.6g}")

    print(f"slope(e_N)     = {rate_fit(means_e):+.3f}")
    print(f"slope(delta_N) = {rate_fit(means_d):+.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
