"""Write the synthetic plant fixture (CSV plus ground truth) to a directory."""

import argparse
import json
from pathlib import Path

from earlywarn import data, synthetic


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data")
    ap.add_argument("--cycles", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    raw, truth = synthetic.make_cycles(synthetic.SyntheticSpec(n_cycles=args.cycles), seed=args.seed)
    out = Path(args.out)
    data.save_csv(raw, out / "plant.csv")
    (out / "plant_truth.json").write_text(json.dumps(truth.to_dict(), indent=1))
    print(f"{raw.n_rows} rows, {raw.n_features} features, planted columns "
          f"{[f'x{p + 1}' for p in truth.planted]}")


if __name__ == "__main__":
    main()
