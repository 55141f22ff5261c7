"""Semi-supervised wake-sleep over the three-factor generative model and the CRF.

Each phase trains from a fresh initialization. Every random choice draws from
a generator derived from ``(seed, phase, iteration, ...)``, so supervised-only
training and the first wake phase see identical streams. That is what makes
the collapsed configuration (no dreams, zero mixing weights) reproduce
supervised training bit for bit.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateModelWarning
from .inferencenet import CRFConfig, CRFModel, train_crf
from .inflector import InflectorConfig, InflectorModel, train_inflector
from .lemmagen import LemmaGenConfig, LemmaGenModel, train_lemmagen
from .morphdata import AnnotatedSentence
from .numcore import derive_rng
from .taglm import TagLMConfig, TagLMModel, train_taglm

MAX_RESAMPLES = 10


@dataclass
class WakeSleepConfig:
    iterations: int = 2
    sleep_samples: int | None = None  # K; None means ceil(0.25 * labeled sentences)
    gamma_sleep: float = 0.25
    gamma_wake: float = 0.25
    seed: int = 0
    max_tags: int = 30
    max_lemma: int = 40
    lemma_temperature: float = 0.75
    taglm: TagLMConfig = field(default_factory=TagLMConfig)
    lemmagen: LemmaGenConfig = field(default_factory=LemmaGenConfig)
    inflector: InflectorConfig = field(default_factory=InflectorConfig)
    crf: CRFConfig = field(default_factory=CRFConfig)

    def validate(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.sleep_samples is not None and self.sleep_samples < 0:
            raise ConfigError("sleep_samples must be >= 0")
        if self.gamma_sleep < 0 or self.gamma_wake < 0:
            raise ConfigError("gamma_sleep and gamma_wake must be >= 0")
        if self.lemma_temperature <= 0:
            raise ConfigError("lemma_temperature must be positive")
        for sub in (self.taglm, self.lemmagen, self.inflector, self.crf):
            sub.validate()

    def dream_count(self, n_labeled_sentences: int) -> int:
        if self.sleep_samples is not None:
            return self.sleep_samples
        return math.ceil(0.25 * n_labeled_sentences)


@dataclass
class GenerativeModel:
    taglm: TagLMModel
    lemmagen: LemmaGenModel
    inflector: InflectorModel

    def logprob(self, forms, lemmata, tags) -> float:
        """log p(f, l, m) as the sum of the three factors."""
        total = self.taglm.logprob(tags)
        for f, l, m in zip(forms, lemmata, tags):
            total += self.lemmagen.logprob(l, m.pos) + self.inflector.logprob(f, l, m)
        return total

    def save(self, directory, meta: dict | None = None) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.taglm.save(d, meta=meta)
        self.lemmagen.save(d, meta=meta)
        self.inflector.save(d, meta=meta)

    @classmethod
    def load(cls, directory) -> "GenerativeModel":
        return cls(TagLMModel.load(directory), LemmaGenModel.load(directory), InflectorModel.load(directory))


@dataclass
class DreamStats:
    requested: int = 0
    produced: int = 0
    resamples: int = 0
    truncated: int = 0
    tokens: int = 0


def joint_sample(p: GenerativeModel, rng: np.random.Generator, max_tags: int = 30, max_lemma: int = 40,
                 temperature: float = 0.75, stats: DreamStats | None = None) -> AnnotatedSentence | None:
    """Ancestral draw of (forms, lemmata, tags); ``None`` after repeated empty draws."""
    stats = stats if stats is not None else DreamStats()
    for attempt in range(MAX_RESAMPLES + 1):
        if attempt:
            stats.resamples += 1
        ts = p.taglm.sample(rng, max_len=max_tags)
        if not ts.tags:
            continue
        truncated = ts.truncated
        lemmata, forms = [], []
        for m in ts.tags:
            ls = p.lemmagen.sample(m.pos, rng, temperature=temperature, max_len=max_lemma)
            fs = p.inflector.sample(ls.lemma, m, rng)
            lemmata.append(ls.lemma)
            forms.append(fs.form)
            truncated |= ls.truncated or fs.truncated
        if all(lemmata) and all(forms):
            stats.truncated += int(truncated)
            return AnnotatedSentence(forms, lemmata, ts.tags)
    warnings.warn(f"generative model gave empty samples {MAX_RESAMPLES + 1} times in a row",
                  DegenerateModelWarning, stacklevel=2)
    return None


def dream(p: GenerativeModel, count: int, config: WakeSleepConfig, iteration: int, stats: DreamStats | None = None):
    stats = stats if stats is not None else DreamStats()
    stats.requested += count
    out = []
    for k in range(count):
        s = joint_sample(p, derive_rng(config.seed, "dream", iteration, k), config.max_tags, config.max_lemma,
                         config.lemma_temperature, stats)
        if s is not None:
            out.append(s)
            stats.tokens += len(s)
    stats.produced += len(out)
    return out


def train_generative(sentences, weights, config: WakeSleepConfig, iteration: int = 1) -> GenerativeModel:
    """Fit the three factors on weighted annotated sentences (each factor on its own slice)."""
    sentences = list(sentences)
    weights = [1.0] * len(sentences) if weights is None else list(weights)
    tag_seqs = [s.tags for s in sentences]
    pairs, pair_w, triples, triple_w = [], [], [], []
    for s, w in zip(sentences, weights):
        for f, l, m in s.triples():
            pairs.append((l, m.pos))
            pair_w.append(w)
            triples.append((f, l, m))
            triple_w.append(w)
    seed = config.seed
    taglm = train_taglm(tag_seqs, config.taglm, derive_rng(seed, "wake", iteration, "taglm"), weights)
    lemmagen = train_lemmagen(pairs, config.lemmagen, derive_rng(seed, "wake", iteration, "lemmagen"), pair_w)
    inflector = train_inflector(triples, config.inflector, derive_rng(seed, "wake", iteration, "inflector"), triple_w)
    return GenerativeModel(taglm, lemmagen, inflector)


def train_supervised(labeled, config: WakeSleepConfig) -> GenerativeModel:
    """The supervised-only baseline: the three factors on labeled data alone."""
    config.validate()
    return train_generative(labeled, None, config, iteration=1)


def sleep_phase(labeled, dreams, gamma_sleep: float, config: WakeSleepConfig, iteration: int):
    """Fit q on labeled sentences at weight 1 and dreamt ones at ``gamma_sleep``."""
    labeled, dreams = list(labeled), list(dreams)
    weights = [1.0] * len(labeled) + [gamma_sleep] * len(dreams)
    q = train_crf(labeled + dreams, config.crf, derive_rng(config.seed, "sleep", iteration, "crf"), weights)
    theta = q.get_theta()
    penalty = 0.5 * config.crf.l2 * float(theta @ theta)
    metrics = {"objective": q.final_objective, "loglik": q.final_objective + penalty,
               "labeled": len(labeled), "dreams": len(dreams), "gamma": gamma_sleep}
    return q, metrics


def impute(q, unlabeled, config: WakeSleepConfig, iteration: int) -> list[AnnotatedSentence]:
    """One posterior draw per unlabeled sentence, each from its own derived generator."""
    unlabeled = [list(f) for f in unlabeled]
    if not unlabeled:
        return []
    rngs = [derive_rng(config.seed, "impute", iteration, j) for j in range(len(unlabeled))]
    draws = q.sample_many(unlabeled, rngs)
    return [AnnotatedSentence(f, l, m) for f, (l, m) in zip(unlabeled, draws)]


def wake_phase(labeled, unlabeled, q, gamma_wake: float, config: WakeSleepConfig, iteration: int):
    """Impute latents for unlabeled text with q, then fit p on labeled (weight 1) plus imputed (``gamma_wake``)."""
    labeled = list(labeled)
    imputed = impute(q, unlabeled, config, iteration)
    weights = [1.0] * len(labeled) + [gamma_wake] * len(imputed)
    p = train_generative(labeled + imputed, weights, config, iteration)
    metrics = {"labeled": len(labeled), "imputed": len(imputed), "gamma": gamma_wake,
               "taglm_loss": p.taglm.final_train_loss, "lemmagen_loss": p.lemmagen.final_train_loss,
               "inflector_loss": p.inflector.history[-1]["train_loss"] if p.inflector.history else float("nan")}
    return p, imputed, metrics


class RunLog:
    """Line-oriented ``key=value`` records, one per phase."""

    def __init__(self, path=None):
        self.records: list[dict] = []
        self.path = Path(path) if path else None
        if self.path:
            self.path.write_text("", encoding="utf-8")

    def add(self, **record) -> None:
        self.records.append(record)
        if self.path:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(self.format(record) + "\n")

    @staticmethod
    def format(record: dict) -> str:
        def fmt(v):
            return f"{v:.10g}" if isinstance(v, float) else str(v)

        return " ".join(f"{k}={fmt(v)}" for k, v in record.items())

    def lines(self, with_time: bool = True) -> list[str]:
        return [self.format({k: v for k, v in r.items() if with_time or k != "seconds"}) for r in self.records]


@dataclass
class WakeSleepResult:
    generative: GenerativeModel
    inference: CRFModel
    log: RunLog
    dream_stats: list[DreamStats]


def run_wake_sleep(labeled, unlabeled, config: WakeSleepConfig, log: RunLog | None = None,
                   checkpoint_dir=None) -> WakeSleepResult:
    config.validate()
    labeled = list(labeled)
    if not labeled:
        raise ConfigError("wake-sleep needs labeled sentences")
    log = log if log is not None else RunLog()
    K = config.dream_count(len(labeled))
    p: GenerativeModel | None = None
    q: CRFModel | None = None
    all_stats = []
    for i in range(1, config.iterations + 1):
        t0 = time.perf_counter()
        stats = DreamStats()
        dreams = []
        if i > 1:
            dreams = dream(p, K, config, i, stats)
        gamma = config.gamma_sleep if i > 1 else 0.0
        q, m = sleep_phase(labeled, dreams, gamma, config, i)
        all_stats.append(stats)
        log.add(phase="sleep", iteration=i, **m, resamples=stats.resamples, truncated=stats.truncated,
                dream_tokens=stats.tokens, seconds=round(time.perf_counter() - t0, 3))
        if checkpoint_dir:
            d = Path(checkpoint_dir) / f"iter{i}-sleep"
            d.mkdir(parents=True, exist_ok=True)
            q.save(d, meta={"seed": config.seed})
        t0 = time.perf_counter()
        p, _, m = wake_phase(labeled, unlabeled, q, config.gamma_wake, config, i)
        log.add(phase="wake", iteration=i, **m, seconds=round(time.perf_counter() - t0, 3))
        if checkpoint_dir:
            p.save(Path(checkpoint_dir) / f"iter{i}-wake", meta={"seed": config.seed})
    return WakeSleepResult(p, q, log, all_stats)


def autoencoder_logprob(p: GenerativeModel, q: CRFModel, forms, source=None) -> float:
    """log of sum over (l, m) of p(forms | l, m) * q(l, m | source); ``source`` defaults to ``forms``.

    Exact: the inflector term factorizes over positions, so it rides along in
    q's forward pass as an extra per-candidate potential.
    """
    source = list(forms if source is None else source)
    forms = list(forms)
    if len(forms) != len(source):
        raise ConfigError("reconstruction and source must have the same length")

    def extra(i, label):
        m, tree = label
        return p.inflector.logprob(forms[i], tree.apply(source[i]), m)

    return q.log_partition(source, extra) - q.log_partition(source)


def config_dict(config: WakeSleepConfig) -> dict:
    return asdict(config)
