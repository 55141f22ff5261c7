"""Reproducible train/evaluate runs driven by an ``ExperimentConfig``."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import ConfigError
from .evaluation import EvalReport, evaluate_type_accuracy
from .inferencenet import CRFModel
from .inflector import InflectorModel
from .morphdata import AnnotatedSentence, TypeLexicon, compile_type_lexicon, read_conllu, split_tokens
from .synthetic import make_task
from .wakesleep import GenerativeModel, RunLog, WakeSleepConfig, run_wake_sleep, sleep_phase, train_supervised


@dataclass
class ExperimentData:
    labeled: list[AnnotatedSentence]
    unlabeled: list[tuple[str, ...]]
    eval_lexicon: TypeLexicon | None

    @property
    def train_lexicon(self) -> TypeLexicon:
        return compile_type_lexicon(self.labeled)


def effective_wakesleep(cfg: ExperimentConfig) -> WakeSleepConfig:
    """The wake-sleep settings with the experiment seed as the single source of randomness."""
    return dataclasses.replace(cfg.wakesleep, seed=cfg.seed)


def load_data(cfg: ExperimentConfig) -> ExperimentData:
    if cfg.synthetic is not None:
        task = make_task(cfg.seed, labeled_tokens=cfg.tokens, unlabeled_tokens=cfg.synthetic.unlabeled_tokens,
                         heldout_types=cfg.synthetic.heldout_types)
        return ExperimentData(list(task.corpus.labeled), list(task.corpus.unlabeled), task.heldout)
    corpus = split_tokens(read_conllu(cfg.resolve(cfg.train)), cfg.tokens)
    lex = compile_type_lexicon(read_conllu(cfg.resolve(cfg.eval))) if cfg.eval else None
    return ExperimentData(list(corpus.labeled), list(corpus.unlabeled), lex)


def train(cfg: ExperimentConfig, data: ExperimentData | None = None) -> tuple[GenerativeModel, CRFModel]:
    """Train in the configured mode and write models, log and resolved config to the output directory.

    NN mode trains the three factors on labeled data only; its CRF is the
    supervised one, saved so the tagger command works on either kind of run.
    """
    cfg.validate()
    data = data or load_data(cfg)
    ws = effective_wakesleep(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"seed": cfg.seed, "fingerprint": cfg.fingerprint(), "mode": cfg.mode}
    log = RunLog(out / "run.log")
    log.add(phase="start", mode=cfg.mode, seed=cfg.seed, fingerprint=cfg.fingerprint(), budget=cfg.budget_name,
            labeled_sentences=len(data.labeled), labeled_tokens=sum(len(s) for s in data.labeled),
            unlabeled_sentences=len(data.unlabeled))
    if cfg.mode == "nn":
        q, m = sleep_phase(data.labeled, [], 0.0, ws, 1)
        log.add(phase="sleep", iteration=1, **m)
        p = train_supervised(data.labeled, ws)
        log.add(phase="supervised", iteration=1, labeled=len(data.labeled))
    else:
        res = run_wake_sleep(data.labeled, data.unlabeled, ws, log)
        p, q = res.generative, res.inference
    p.save(out, meta=meta)
    q.save(out, meta=meta)
    (out / "config.json").write_text(dataclasses.replace(cfg, wakesleep=ws).to_json(), encoding="utf-8")
    return p, q


def evaluate(cfg: ExperimentConfig, model_dir, data: ExperimentData | None = None) -> EvalReport:
    """Score the saved inflector on the evaluation lexicon; writes eval.json and eval.tsv beside it."""
    cfg.validate()
    data = data or load_data(cfg)
    if data.eval_lexicon is None:
        raise ConfigError("eval: no evaluation data configured")
    saved = Path(model_dir) / "config.json"
    if saved.is_file():
        trained = dataclasses.replace(load_config(saved), decode=cfg.decode)
        if trained.fingerprint() != cfg.fingerprint():
            raise ConfigError(f"config: {model_dir} was trained with fingerprint {trained.fingerprint()}, "
                              f"this configuration gives {cfg.fingerprint()}")
    inflector = InflectorModel.load(model_dir)
    report = evaluate_type_accuracy(inflector, data.eval_lexicon, data.train_lexicon, cfg.fingerprint(), cfg.decode)
    d = Path(model_dir)
    doc = json.loads(report.to_json())
    doc["seed"] = cfg.seed
    (d / "eval.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (d / "eval.tsv").write_text(report.dump(), encoding="utf-8")
    return report
