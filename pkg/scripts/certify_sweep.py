"""Worst interpolation ratios for all three observers over a range of resolutions."""

import argparse

import numpy as np

from nsalpha_da.observers import certify_type1, certify_type2, make_observer, mode_cutoff, modes_c1_sq
from nsalpha_da.spectral import make_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=32)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    g = make_grid(2 * np.pi, args.N)

    print("modes: h, kappa, worst, 1/(h^2 l1 (k^2+1)), 1/(h^2 l1 (k+1)^2)")
    for h in (1.0, 0.5, 1 / 3, 0.25, 0.2, 0.125):
        k = mode_cutoff(g, h)
        cert = certify_type1(make_observer("modes", g, h=h), g, args.trials, args.seed)
        print(f"  {h:.4f} {k:3d} {cert.worst_ratio:.6f} {modes_c1_sq(g, h):.6f} {1 / (h**2 * g.lambda1 * (k + 1) ** 2):.6f}")

    print("volumes: n, worst ratio (bound 1/3)")
    for n in (1, 2, 4, 8, 16):
        cert = certify_type1(make_observer("volumes", g, cells_per_dim=n), g, args.trials, args.seed)
        print(f"  {n:3d} {cert.worst_ratio:.6f}")

    print("nodes: n, worst err/(h^2 grad^2), err/(h^4 |A|^2), err/(32,8) bound, err/(32,4) bound")
    for n in (2, 4, 8, 16):
        c = certify_type2(make_observer("nodes", g, cells_per_dim=n), g, args.trials, args.seed)
        print(f"  {n:3d} {c.worst_a:.6f} {c.worst_b:.6f} {c.worst_proof:.6f} {c.worst_statement:.6f}")


if __name__ == "__main__":
    main()
