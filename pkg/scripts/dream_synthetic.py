"""Fit the generative model on synthetic labeled text and print dreamt sentences with their analyses.

    python scripts/dream_synthetic.py --count 8 --seed 0
"""

import argparse

from morphogen.config import desk_config
from morphogen.experiment import effective_wakesleep, load_data
from morphogen.numcore import derive_rng
from morphogen.wakesleep import joint_sample, train_supervised


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--labeled", type=int, default=500)
    args = ap.parse_args()

    cfg = desk_config(args.seed, "nn")
    cfg.tokens = args.labeled
    ws = effective_wakesleep(cfg)
    p = train_supervised(load_data(cfg).labeled, ws)
    for k in range(args.count):
        s = joint_sample(p, derive_rng(args.seed, "script-dream", k), ws.max_tags, ws.max_lemma, ws.lemma_temperature)
        if s is None:
            print("(no sample)")
            continue
        print(" ".join(s.forms))
        print("    " + " ".join(f"{l}/{m}" for l, m in zip(s.lemmata, s.tags)))


if __name__ == "__main__":
    main()
