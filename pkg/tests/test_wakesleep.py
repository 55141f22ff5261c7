import itertools
import math
import warnings

import numpy as np
import pytest

from morphogen.errors import ConfigError, DegenerateModelWarning
from morphogen.inferencenet import CRFConfig, CRFModel, EditTree, train_crf
from morphogen.inflector import InflectorConfig
from morphogen.lemmagen import LemmaGenConfig
from morphogen.morphdata import AnnotatedSentence, tag
from morphogen.numcore import derive_rng
from morphogen.synthetic import make_language, make_task
from morphogen.taglm import TagLMConfig
from morphogen.wakesleep import (GenerativeModel, RunLog, WakeSleepConfig, autoencoder_logprob, dream,
                                 joint_sample, run_wake_sleep, sleep_phase, train_generative, train_supervised,
                                 wake_phase)

# the tiny models below are undertrained and often stop immediately
pytestmark = pytest.mark.filterwarnings("ignore::morphogen.errors.DegenerateModelWarning")


def tiny(**kw) -> WakeSleepConfig:
    return WakeSleepConfig(
        taglm=TagLMConfig(embed_dim=8, hidden=8, layers=1, epochs=2, lr=1.0, dropout=0.0),
        lemmagen=LemmaGenConfig(hidden=8, epochs=3),
        inflector=InflectorConfig(embed_dim=8, hidden=8, epochs=1, dropout=0.0),
        crf=CRFConfig(steps=30),
        **kw)


@pytest.fixture(scope="module")
def task():
    t = make_task(0, labeled_tokens=60, unlabeled_tokens=60, heldout_types=5)
    return list(t.corpus.labeled), list(t.corpus.unlabeled)


def same_generative(a: GenerativeModel, b: GenerativeModel):
    for x, y in ((a.taglm, b.taglm), (a.lemmagen, b.lemmagen), (a.inflector, b.inflector)):
        ax, ay = x.arrays(), y.arrays()
        assert ax.keys() == ay.keys()
        for k in ax:
            np.testing.assert_array_equal(ax[k], ay[k])


def same_crf(a: CRFModel, b: CRFModel):
    assert a.labels == b.labels
    np.testing.assert_array_equal(a.get_theta(), b.get_theta())


# --- configuration ------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(iterations=0), dict(sleep_samples=-1), dict(gamma_sleep=-0.1),
                                dict(gamma_wake=-1.0), dict(lemma_temperature=0.0)])
def test_bad_settings_rejected(kw):
    with pytest.raises(ConfigError):
        tiny(**kw).validate()


def test_default_dream_count_is_a_quarter_rounded_up():
    assert WakeSleepConfig().dream_count(10) == 3
    assert WakeSleepConfig().dream_count(8) == 2
    assert WakeSleepConfig(sleep_samples=0).dream_count(10) == 0


def test_no_labeled_data_rejected():
    with pytest.raises(ConfigError):
        run_wake_sleep([], [("a",)], tiny())


# --- sleep --------------------------------------------------------------------

def test_sleep_with_zero_gamma_is_supervised(task):
    labeled, _ = task
    cfg = tiny()
    p = train_supervised(labeled, cfg)
    dreams = dream(p, 4, cfg, 2)
    assert dreams
    q0, _ = sleep_phase(labeled, dreams, 0.0, cfg, 2)
    qk, _ = sleep_phase(labeled, [], cfg.gamma_sleep, cfg, 2)
    sup = train_crf(labeled, cfg.crf, derive_rng(cfg.seed, "sleep", 2, "crf"))
    same_crf(q0, sup)
    same_crf(qk, sup)


def test_sleep_objective_recomputes(task):
    labeled, _ = task
    cfg = tiny()
    p = train_supervised(labeled, cfg)
    dreams = dream(p, 3, cfg, 2)
    q, m = sleep_phase(labeled, dreams, 0.25, cfg, 2)
    ll = sum(w * q.logprob(s.forms, s.lemmata, s.tags)
             for s, w in zip(labeled + dreams, [1.0] * len(labeled) + [0.25] * len(dreams)))
    theta = q.get_theta()
    assert m["loglik"] == pytest.approx(ll, rel=1e-8, abs=1e-8)
    assert m["objective"] == pytest.approx(ll - 0.5 * cfg.crf.l2 * theta @ theta, rel=1e-8, abs=1e-8)
    assert m["dreams"] == len(dreams) and m["labeled"] == len(labeled)


# --- wake ---------------------------------------------------------------------

def test_wake_without_unlabeled_text_matches_zero_gamma(task):
    labeled, unlabeled = task
    cfg = tiny()
    q = train_crf(labeled, cfg.crf)
    p_empty, imputed, _ = wake_phase(labeled, [], q, 0.25, cfg, 1)
    p_zero, _, _ = wake_phase(labeled, unlabeled, q, 0.0, cfg, 1)
    assert imputed == []
    same_generative(p_empty, p_zero)
    same_generative(p_empty, train_generative(labeled, None, cfg, 1))


class Oracle:
    """A stand-in q that returns the true analysis of each sentence."""

    def __init__(self, gold):
        self.gold = {tuple(s.forms): s for s in gold}

    def sample_many(self, sentences, rngs):
        return [(list(self.gold[tuple(f)].lemmata), list(self.gold[tuple(f)].tags)) for f in sentences]


def test_wake_with_oracle_matches_fully_labeled_training():
    sents = make_language(1).sample_corpus(np.random.default_rng(5), 400)
    cfg = tiny()
    labeled, gold_rest = sents[:5], sents[5:]
    p, imputed, _ = wake_phase(labeled, [g.forms for g in gold_rest], Oracle(gold_rest), 0.5, cfg, 3)
    assert [list(s.triples()) for s in imputed] == [list(s.triples()) for s in gold_rest]
    ref = train_generative(labeled + gold_rest, [1.0] * len(labeled) + [0.5] * len(gold_rest), cfg, 3)
    same_generative(p, ref)


def test_every_unlabeled_sentence_gets_one_aligned_imputation(task):
    labeled, unlabeled = task
    cfg = tiny()
    q = train_crf(labeled, cfg.crf)
    _, imputed, m = wake_phase(labeled, unlabeled, q, 0.25, cfg, 1)
    assert len(imputed) == len(unlabeled) == m["imputed"]
    for s, forms in zip(imputed, unlabeled):
        assert list(s.forms) == list(forms)
        assert len(s.lemmata) == len(s.tags) == len(forms)
        for f, l, mt in s.triples():
            assert any(r.apply(f) == l and mt == t for t, r in q.candidates([f])[0])


# --- the loop ------------------------------------------------------------------

def test_one_iteration_is_supervised_training(task):
    labeled, unlabeled = task
    cfg = tiny(iterations=1, gamma_wake=0.0)
    res = run_wake_sleep(labeled, unlabeled, cfg)
    same_generative(res.generative, train_supervised(labeled, cfg))
    same_crf(res.inference, train_crf(labeled, cfg.crf))
    assert [r["phase"] for r in res.log.records] == ["sleep", "wake"]


def test_no_dreams_means_q_is_unchanged_across_iterations(task):
    labeled, unlabeled = task
    cfg = tiny(iterations=2, sleep_samples=0)
    two = run_wake_sleep(labeled, unlabeled, cfg)
    one = run_wake_sleep(labeled, unlabeled, tiny(iterations=1, sleep_samples=0))
    same_crf(two.inference, one.inference)
    p2, _, _ = wake_phase(labeled, unlabeled, one.inference, cfg.gamma_wake, cfg, 2)
    same_generative(two.generative, p2)


def test_runs_are_reproducible(task, tmp_path):
    labeled, unlabeled = task
    cfg = tiny(iterations=2, sleep_samples=3)
    a = run_wake_sleep(labeled, unlabeled, cfg, RunLog(tmp_path / "a.log"), checkpoint_dir=tmp_path / "ck")
    b = run_wake_sleep(labeled, unlabeled, cfg)
    same_generative(a.generative, b.generative)
    same_crf(a.inference, b.inference)
    assert a.log.lines(with_time=False) == b.log.lines(with_time=False)
    text = (tmp_path / "a.log").read_text().splitlines()
    assert text == a.log.lines() and len(text) == 4
    assert "phase=sleep iteration=2" in text[2] and "dreams=" in text[2]
    same_generative(GenerativeModel.load(tmp_path / "ck" / "iter2-wake"), a.generative)
    same_crf(CRFModel.load(tmp_path / "ck" / "iter2-sleep"), a.inference)


def test_different_seeds_give_different_dreams(task):
    labeled, _ = task
    cfg = tiny()
    p = train_supervised(labeled, cfg)
    a = dream(p, 5, cfg, 2)
    b = dream(p, 5, tiny(seed=9), 2)
    assert [s.forms for s in a] != [s.forms for s in b]


# --- dreaming ------------------------------------------------------------------

def test_overfit_model_dreams_its_only_sentence():
    s = AnnotatedSentence(("dogs", "bark"), ("dog", "bark"), (tag("N", num="pl"), tag("V", tns="prs")))
    cfg = WakeSleepConfig(
        taglm=TagLMConfig(embed_dim=8, hidden=16, layers=1, epochs=100, lr=1.0, dropout=0.0, valid_fraction=0.0,
                          lr_decay=1.0),
        lemmagen=LemmaGenConfig(hidden=16, epochs=300),
        inflector=InflectorConfig(embed_dim=16, hidden=16, epochs=400, dropout=0.0))
    p = train_generative([s] * 20, None, cfg)
    rng = np.random.default_rng(0)
    hits = sum(joint_sample(p, rng) == s for _ in range(100))
    assert hits >= 90


def test_degenerate_generator_warns():
    s = AnnotatedSentence(("a",), ("a",), (tag("N"),))
    p = train_generative([s], None, tiny())
    p.taglm.params["out.b"].value[:] = 0.0
    p.taglm.params["out.b"].value[p.taglm.eos] = 1e4  # stop before emitting any tag
    with pytest.warns(DegenerateModelWarning):
        assert joint_sample(p, np.random.default_rng(0)) is None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateModelWarning)
        assert dream(p, 2, tiny(), 2) == []


# --- reconstruction bound -------------------------------------------------------

def test_autoencoder_marginal_matches_enumeration(task):
    labeled, _ = task
    cfg = tiny()
    p = train_supervised(labeled, cfg)
    q = train_crf(labeled, cfg.crf)
    src = list(next(s for s in labeled if len(s) >= 3).forms[:3])
    recon = [src[0], src[1] + "s", src[2]]
    cands = q.candidates(src)
    logZ = q.log_partition(src)
    terms = []
    for labels in itertools.product(*cands):
        lq = q.label_score(src, list(labels)) - logZ
        lp = sum(p.inflector.logprob(f, r.apply(h), m) for f, h, (m, r) in zip(recon, src, labels))
        terms.append(lq + lp)
    brute = float(np.logaddexp.reduce(terms))
    assert autoencoder_logprob(p, q, recon, src) == pytest.approx(brute, abs=1e-8)
    assert autoencoder_logprob(p, q, src) <= 0.0


def test_autoencoder_rejects_length_mismatch(task):
    labeled, _ = task
    cfg = tiny()
    p = train_supervised(labeled, cfg)
    with pytest.raises(ConfigError):
        autoencoder_logprob(p, train_crf(labeled, cfg.crf), ["a"], ["a", "b"])


def test_edit_tree_candidates_are_well_formed(task):
    labeled, _ = task
    q = train_crf(labeled, CRFConfig(steps=5))
    for f in labeled[0].forms:
        for m, r in q.candidates([f])[0]:
            assert isinstance(r, EditTree) and r.apply(f) is not None and math.isfinite(len(r.apply(f)))
