"""Threshold x window sweep on a plant CSV; prints the RMSE and SF grids."""

import argparse
import json

from earlywarn import data
from earlywarn.config import load_config
from earlywarn.pipeline import parameter_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("--config", default="configs/synthetic.yaml")
    ap.add_argument("--thresholds", type=float, nargs="+", default=[0.3, 0.45, 0.6])
    ap.add_argument("--windows", type=float, nargs="+", default=[4, 6, 8, 10],
                    help="monitor window in minutes")
    ap.add_argument("--json", help="write the full grid here")
    args = ap.parse_args()
    cfg = load_config(args.config)
    ds = data.preprocess(data.load_csv(args.csv), cfg.data.restart_exclusion_s,
                         cfg.data.interpolate, split=cfg.data.split)
    tr, va, te = data.split(ds, cfg.data.split)
    res = parameter_sweep(tr, va, te, cfg, args.thresholds, args.windows)
    for metric in ("rmse", "sf"):
        print(metric.upper(), "rows=thresholds", args.thresholds, "cols=windows", args.windows)
        print(res.grid(metric))
    best = res.best()
    print(f"best: threshold {best.threshold}, window {best.window_minutes} min, RMSE {best.rmse:.4f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(res.to_dict(), fh, indent=1)


if __name__ == "__main__":
    main()
