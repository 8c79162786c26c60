"""How fast the step-kernel covariance approaches the smooth-kernel one.

For each step count, prints the max difference from the quadrature oracle on
a lag grid. With midpoint levels the error drops about fourfold per doubling.

    python scripts/step_convergence.py --mu 1 --nu 2 --range 3.14159
"""
import argparse
import math

import numpy as np

from sphconv.covariance import covariance_at
from sphconv.kernel import SmoothKernelParams, discretize, normalize
from sphconv.oracle import quad_covariance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mu", type=float, default=1.0)
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--range", type=float, default=math.pi)
    ap.add_argument("--n-lags", type=int, default=64)
    ap.add_argument("--max-steps", type=int, default=4096)
    args = ap.parse_args()

    p = SmoothKernelParams(args.mu, args.nu, args.range)
    d = np.linspace(0.0, min(math.pi, args.range), args.n_lags)
    ref = quad_covariance(p, d)
    n = 4
    prev = None
    print("n_steps  max|step - quad|  ratio")
    while n <= args.max_steps:
        err = float(np.max(np.abs(covariance_at(normalize(discretize(p, n)), d) - ref)))
        ratio = f"{prev / err:.2f}" if prev else ""
        print(f"{n:<8} {err:<17.3e} {ratio}")
        prev, n = err, 2 * n


if __name__ == "__main__":
    main()
