"""Writes data/wine.csv: wine classes 2 and 3 as normals, 10 class-1 rows as outliers."""

import argparse
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.datasets import load_wine


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "wine.csv"))
    parser.add_argument("--outliers", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    wine = load_wine(as_frame=True)
    frame = wine.frame.rename(columns={"target": "cls"})
    rng = np.random.default_rng(args.seed)
    class1 = frame[frame.cls == 0]
    picked = class1.iloc[np.sort(rng.choice(len(class1), size=args.outliers, replace=False))]
    out = pd.concat([frame[frame.cls != 0], picked])
    out["label"] = (out.pop("cls") == 0).astype(int)
    out.columns = [c.replace("/", "_") for c in out.columns]
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    out.to_csv(args.out, index=False)
    print(f"{args.out}: {len(out)} rows, {int(out.label.sum())} outliers")


if __name__ == "__main__":
    main()
