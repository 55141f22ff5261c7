"""Train and evaluate NN and SVAE at several labeled-token budgets on one CoNLL-U treebank.

    python scripts/budget_sweep.py --config configs/treebank.json --budgets 500 1000 5000

The config must name ``train`` and ``eval`` files. Results go to
``<output_dir>/<mode>-<budget>/`` plus a ``sweep.tsv`` summary.
"""

import argparse
import dataclasses
from pathlib import Path

from morphogen.config import load_config
from morphogen.experiment import evaluate, load_data, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--budgets", type=int, nargs="+", default=[500, 1000, 5000])
    ap.add_argument("--modes", nargs="+", default=["nn", "svae"], choices=["nn", "svae"])
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()

    base = load_config(args.config)
    if args.seed is not None:
        base = dataclasses.replace(base, seed=args.seed)
    root = Path(base.output_dir)
    lines = ["budget\tmode\tsize\tcorrect\taccuracy\tunseen_accuracy"]
    for n in args.budgets:
        for mode in args.modes:
            cfg = dataclasses.replace(base, tokens=n, mode=mode, output_dir=str(root / f"{mode}-{n}"))
            data = load_data(cfg)
            train(cfg, data)
            rep = evaluate(cfg, cfg.output_dir, data)
            unseen = rep.unseen[0] / rep.unseen[1] if rep.unseen[1] else float("nan")
            lines.append(f"{n}\t{mode}\t{rep.size}\t{rep.correct}\t{rep.accuracy:.4f}\t{unseen:.4f}")
            print(lines[-1], flush=True)
    root.mkdir(parents=True, exist_ok=True)
    (root / "sweep.tsv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
