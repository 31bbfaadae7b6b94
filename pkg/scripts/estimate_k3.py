"""Random-search lower bound for the trilinear constant k3."""

import argparse

import numpy as np

from nsalpha_da.assimilation import estimate_k3
from nsalpha_da.spectral import make_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=16)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    est = estimate_k3(args.trials, args.seed, make_grid(2 * np.pi, args.N))
    q = np.array(est.quotients)
    print(f"k3 >= {est.lower_bound:.6g}  (median quotient {np.median(q):.4g}, {len(q)} trials)")


if __name__ == "__main__":
    main()
