"""Change-point recovery rate on the seven MJD scenarios."""

import argparse
import time

import numpy as np

from earlywarn.experiments import DetectionSettings, scenario_recovery


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replications", type=int, default=20)
    ap.add_argument("--window", type=int, default=2)
    args = ap.parse_args()
    settings = DetectionSettings(window_A=args.window)
    t0 = time.time()
    print("scenario\tsuccesses\trate\tmedian_error")
    for r in scenario_recovery(replications=args.replications, settings=settings):
        print(f"{r.scenario}\t{r.successes}/{r.replications}\t{r.rate:.2f}\t{np.median(r.errors):.4g}")
    print(f"# {time.time() - t0:.0f} s")


if __name__ == "__main__":
    main()
