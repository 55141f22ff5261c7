"""``morphogen`` command line: train, evaluate, inflect, dream, tag."""

from __future__ import annotations

import argparse
import dataclasses
import sys
import warnings
from pathlib import Path

from .config import STANDARD_BUDGETS, ExperimentConfig, load_config
from .errors import ConfigError, DegenerateModelWarning, ModelError, ParseError, RejectedInput
from .morphdata import MorphTag, parse_forms, serialize_conllu
from .numcore import derive_rng

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _tokens(text: str):
    if text == "custom":
        return None
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected one of {STANDARD_BUDGETS}, 'custom' or a positive integer")
    if n < 1:
        raise argparse.ArgumentTypeError("token budget must be positive")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="morphogen", description=__doc__, allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, **kw):
        return sub.add_parser(name, allow_abbrev=False, **kw)

    def experiment_flags(sp):
        sp.add_argument("--config", required=True, help="experiment JSON")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        sp.add_argument("--tokens", type=_tokens, help="labeled token budget: 500, 1000, 5000 or custom")
        sp.add_argument("--mode", choices=("nn", "svae"))

    t = command("train", help="train NN or SVAE models")
    experiment_flags(t)
    t.add_argument("--output", help="overrides output_dir")

    e = command("evaluate", help="type-level accuracy of a trained inflector")
    experiment_flags(e)
    e.add_argument("--model", help="model directory (default: the config's output_dir)")

    i = command("inflect", help="decode one form")
    i.add_argument("model")
    i.add_argument("lemma")
    i.add_argument("tag", help='tag string such as "V;tns=pst"')
    i.add_argument("--decoder", choices=("beam", "greedy"), default="beam")

    d = command("dream", help="sample sentences from the generative model")
    d.add_argument("model")
    d.add_argument("--count", type=int, default=10)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--triples", help="companion CoNLL-U file (default: dreams-<seed>.conllu in the model directory)")

    g = command("tag", help="MAP lemmata and tags for tokenized text")
    g.add_argument("model")
    g.add_argument("input", nargs="?", help="CoNLL-U style input with at least ID and FORM (default: stdin)")
    return p


def _experiment(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.tokens is not None:
        changes["tokens"] = args.tokens
    if getattr(args, "mode", None):
        changes["mode"] = args.mode
    if getattr(args, "output", None):
        changes["output_dir"] = args.output
    cfg = dataclasses.replace(cfg, **changes)
    cfg.validate()
    return cfg


def cmd_train(args, out) -> int:
    from .experiment import train

    cfg = _experiment(args)
    train(cfg)
    print(f"trained {cfg.mode} models (seed {cfg.seed}, fingerprint {cfg.fingerprint()}) in {cfg.output_dir}",
          file=out)
    return EXIT_OK


def cmd_evaluate(args, out) -> int:
    from .experiment import evaluate

    cfg = _experiment(args)
    report = evaluate(cfg, args.model or cfg.output_dir)
    out.write(report.to_json())
    return EXIT_OK


def cmd_inflect(args, out) -> int:
    from .inflector import InflectorModel

    m = MorphTag.parse(args.tag)
    model = _load(InflectorModel.load, args.model)
    print(model.decode(args.lemma, m, mode=args.decoder).form, file=out)
    return EXIT_OK


def cmd_dream(args, out) -> int:
    from .wakesleep import GenerativeModel, WakeSleepConfig, joint_sample

    if args.count < 0:
        raise RejectedInput("--count must be >= 0")
    p = _load(GenerativeModel.load, args.model)
    cfg = WakeSleepConfig()
    dreams = []
    for k in range(args.count):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateModelWarning)
            s = joint_sample(p, derive_rng(args.seed, "cli-dream", k), cfg.max_tags, cfg.max_lemma,
                             cfg.lemma_temperature)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        if s is not None:
            dreams.append(s)
            print(" ".join(s.forms), file=out)
    triples = Path(args.triples) if args.triples else Path(args.model) / f"dreams-{args.seed}.conllu"
    triples.write_text(serialize_conllu(dreams), encoding="utf-8")
    return EXIT_OK


def cmd_tag(args, out) -> int:
    from .inferencenet import CRFModel

    text = Path(args.input).read_text(encoding="utf-8") if args.input else sys.stdin.read()
    sentences = parse_forms(text)
    q = _load(CRFModel.load, args.model)
    for forms in sentences:
        lemmata, tags = q.map(forms)
        for k, (f, l, m) in enumerate(zip(forms, lemmata, tags), 1):
            out.write(f"{k}\t{f}\t{l}\t{m}\n")
        out.write("\n")
    return EXIT_OK


def _load(loader, directory):
    try:
        return loader(directory)
    except ModelError:
        raise
    except (OSError, KeyError, ValueError) as exc:
        raise ModelError(f"cannot load model from {directory}: {exc}") from exc


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "inflect": cmd_inflect, "dream": cmd_dream,
            "tag": cmd_tag}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"morphogen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return COMMANDS[args.command](args, out)
    except ModelError as exc:
        print(f"morphogen: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except ParseError as exc:
        print(f"morphogen: parse error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, RejectedInput, OSError) as exc:
        print(f"morphogen: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
