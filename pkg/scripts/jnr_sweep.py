"""Median change-point error against the jump-to-noise ratio."""

import argparse

from earlywarn.experiments import jnr_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.02, 0.05, 0.1, 0.2])
    ap.add_argument("--replications", type=int, default=20)
    args = ap.parse_args()
    res = jnr_sweep(tuple(args.alphas), args.replications)
    print("alpha\tjnr\tmedian_error")
    for a, j, m in zip(res.alphas, res.jnr, res.median_errors):
        print(f"{a:g}\t{j:.4g}\t{m:.4g}")
    print(f"# rank correlation {res.rank_correlation:.3f}, inversions {res.inversions}")


if __name__ == "__main__":
    main()
