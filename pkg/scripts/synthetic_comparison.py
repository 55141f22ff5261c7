"""NN vs SVAE type accuracy on the synthetic suffixing language, over several seeds.

    python scripts/synthetic_comparison.py --seeds 0 1 2 --out runs/synthetic
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from morphogen.config import desk_config
from morphogen.experiment import evaluate, load_data, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--out", default="runs/synthetic")
    ap.add_argument("--labeled", type=int, default=200, help="labeled token budget")
    ap.add_argument("--unlabeled", type=int, default=2000)
    ap.add_argument("--iterations", type=int, default=2)
    args = ap.parse_args()

    rows = []
    for seed in args.seeds:
        row = {"seed": seed}
        for mode in ("nn", "svae"):
            cfg = desk_config(seed, mode)
            cfg.tokens = args.labeled
            cfg.synthetic.unlabeled_tokens = args.unlabeled
            cfg.wakesleep.iterations = args.iterations
            cfg.output_dir = str(Path(args.out) / f"{mode}-{seed}")
            t0 = time.perf_counter()
            data = load_data(cfg)
            train(cfg, data)
            rep = evaluate(cfg, cfg.output_dir, data)
            row[mode] = rep.accuracy
            row[f"{mode}_seconds"] = round(time.perf_counter() - t0, 1)
            print(f"seed {seed} {mode:4s} accuracy {rep.accuracy:.3f} "
                  f"(unseen {rep.unseen[0]}/{rep.unseen[1]})  {row[f'{mode}_seconds']}s", flush=True)
        rows.append(row)
    nn = np.mean([r["nn"] for r in rows])
    svae = np.mean([r["svae"] for r in rows])
    print(f"mean NN {nn:.3f}  SVAE {svae:.3f}  gain {100 * (svae - nn):+.1f} points")
    Path(args.out).mkdir(parents=True, exist_ok=True)
    (Path(args.out) / "summary.json").write_text(json.dumps({"runs": rows, "nn": nn, "svae": svae}, indent=2) + "\n")


if __name__ == "__main__":
    main()
