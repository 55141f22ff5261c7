"""Acceptance criteria 1-8, each printing one PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are printed even with
output capture on). Criterion 5 is the slow one, at a few minutes.
"""

import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.special import logsumexp

from morphogen.config import desk_config
from morphogen.experiment import evaluate, load_data, train
from morphogen.inferencenet import CRFConfig, build_crf, extract_edit_tree
from morphogen.inflector import BOW, EOW, UNK, InflectorConfig, InflectorModel, train_inflector
from morphogen.lemmagen import LemmaGenConfig, LemmaGenModel, train_lemmagen
from morphogen.morphdata import Vocab, compile_type_lexicon, read_conllu, split_tokens, tag
from morphogen.numcore import (GRUParams, LSTMParams, Parameter, affine, bilinear_attention, dumps_params, gru_step,
                               load_params, lstm_step, mul, softmax_cross_entropy, tanh, total)
from morphogen.numcore.gradcheck import check, relative_error
from morphogen.synthetic import make_language
from morphogen.taglm import UNK_FEATURE, TagLMConfig, TagLMModel, train_taglm
from oracles import lemmagen_mass, oracle_scores, taglm_mass

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, what: str, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n} ({what}): {detail}")
        assert ok, detail

    return emit


def P(rng, *shape, s=1.0):
    return Parameter(rng.normal(0.0, s, shape))


# --- 1. gradient correctness -------------------------------------------------

def _grad_cases():
    """(name, loss_fn, params) for randomized small instances of every differentiable piece."""
    cases = []
    for seed in range(8):
        rng = np.random.default_rng(seed)
        B, i, o = rng.integers(1, 4), rng.integers(1, 5), rng.integers(1, 5)
        x, W, b = P(rng, B, i), P(rng, o, i), P(rng, o)
        cases.append(("affine", lambda x=x, W=W, b=b: total(mul(tanh(affine(x, W, b)), 1.3)), [x, W, b]))
    for seed in range(8):
        rng = np.random.default_rng(100 + seed)
        n_in, d, B, T = rng.integers(1, 4), rng.integers(1, 5), rng.integers(1, 3), rng.integers(1, 4)
        p = LSTMParams.create(n_in, d, rng)
        p.b.value[:] = rng.normal(size=p.b.shape)
        xs = [P(rng, B, n_in) for _ in range(T)]
        masks = [rng.integers(0, 2, B) | (t == 0) for t in range(T)]
        h0, c0 = P(rng, B, d, s=0.5), P(rng, B, d, s=0.5)

        def lstm_loss(p=p, xs=xs, masks=masks, h0=h0, c0=c0):
            h, c = h0, c0
            for x, m in zip(xs, masks):
                h, c = lstm_step(h, c, x, p, mask=m)
            return total(mul(h, c))

        cases.append(("lstm", lstm_loss, list(p.parameters().values()) + xs + [h0, c0]))
    for seed in range(8):
        rng = np.random.default_rng(200 + seed)
        n_in, d, B, T = rng.integers(1, 4), rng.integers(1, 5), rng.integers(1, 3), rng.integers(1, 4)
        p = GRUParams.create(n_in, d, rng)
        p.b_x.value[:] = rng.normal(size=p.b_x.shape)
        p.b_h.value[:] = rng.normal(size=p.b_h.shape)
        xs = [P(rng, B, n_in) for _ in range(T)]
        masks = [rng.integers(0, 2, B) | (t == 0) for t in range(T)]
        h0 = P(rng, B, d, s=0.5)

        def gru_loss(p=p, xs=xs, masks=masks, h0=h0):
            h = h0
            for x, m in zip(xs, masks):
                h = gru_step(h, x, p, mask=m)
            return total(mul(h, h))

        cases.append(("gru", gru_loss, list(p.parameters().values()) + xs + [h0]))
    for seed in range(8):
        rng = np.random.default_rng(300 + seed)
        B, T, dq, dk = rng.integers(1, 3), rng.integers(1, 5), rng.integers(1, 4), rng.integers(1, 4)
        q, K, A = P(rng, B, dq), P(rng, B, T, dk), P(rng, dq, dk)
        mask = rng.integers(0, 2, (B, T)).astype(bool)
        mask[:, 0] = True
        cases.append(("attention", lambda q=q, K=K, A=A, mask=mask:
                      total(mul(tanh(bilinear_attention(q, K, A, mask)[0]), 0.7)), [q, K, A]))
    for seed in range(6):
        rng = np.random.default_rng(400 + seed)
        B, V = rng.integers(1, 4), rng.integers(2, 6)
        z = P(rng, B, V)
        tgt = rng.integers(0, V, B)
        w = rng.uniform(0.1, 2.0, B)
        cases.append(("cross-entropy", lambda z=z, tgt=tgt, w=w: softmax_cross_entropy(z, tgt, w), [z]))
    tags = [tag("N"), tag("V", tns="pst"), tag("V", tns="prs")]
    for seed in range(4):
        rng = np.random.default_rng(500 + seed)
        feats = {s for m in tags for s in m.features()}
        cfg = TagLMConfig(embed_dim=3, hidden=3, layers=1 + seed % 2, dropout=0.0)
        m = TagLMModel(Vocab(feats, reserved=(UNK_FEATURE,)), tags, cfg, rng)
        seqs = [m.encode([tags[k] for k in rng.integers(0, 3, rng.integers(0, 4))]) for _ in range(3)]
        w = rng.uniform(0.5, 2.0, 3)
        cases.append(("taglm-sequence", lambda m=m, seqs=seqs, w=w: m.batch_loss(seqs, w), m.parameters()))
    for seed in range(4):
        rng = np.random.default_rng(600 + seed)
        m = LemmaGenModel("abc", ("N", "V"), LemmaGenConfig(char_dim=2, pos_dim=2, hidden=3), rng)
        lemmata = ["".join(rng.choice(list("abc"), rng.integers(0, 4))) for _ in range(3)]
        pos, w = rng.integers(0, 2, 3), rng.uniform(0.5, 2.0, 3)
        cases.append(("lemmagen-sequence", lambda m=m, l=lemmata, p=pos, w=w: m.batch_loss(l, p, w), m.parameters()))
    for seed in range(4):
        rng = np.random.default_rng(700 + seed)
        keys = (BOW, EOW, UNK, "c:a", "c:b", "p:N", "p:V", "f:tns=pst")
        cfg = InflectorConfig(embed_dim=3, hidden=2, dropout=0.0, cell=("gru", "lstm")[seed % 2])
        m = InflectorModel(keys, ["a", "b"], cfg, rng)
        ex = [("".join(rng.choice(["a", "b"], rng.integers(0, 3))), "".join(rng.choice(["a", "b"], rng.integers(0, 3))),
               [tag("N"), tag("V", tns="pst")][k]) for k in range(2)]
        w = rng.uniform(0.5, 2.0, 2)
        cases.append(("inflector-sequence", lambda m=m, ex=ex, w=w: m.batch_loss(ex, w), m.parameters()))
    return cases


def _crf_grad_cases():
    N, V = tag("N", num="pl"), tag("V", tns="pst")
    data = [(["dogs", "ran"], ["dog", "ran"], [N, V]), (["cat", "sat", "xs"], ["cat", "sat", "x"], [N, V, N])]
    out = []
    for seed in range(4):
        rng = np.random.default_rng(800 + seed)
        model = build_crf(data)
        model.set_theta(rng.normal(0.0, 0.5, model.n_params))
        sents = [data[seed % 2]]
        b = model.prepare([s[0] for s in sents])
        gold = np.array([model.label_index[(model.tag_index[m], model.tree_index[extract_edit_tree(f, l)])]
                         for f, l, m in zip(*sents[0])])
        w = np.array([rng.uniform(0.5, 2.0)])
        theta = model.get_theta()
        _, grad = model.objective(b, gold, w, 0.3)
        num = np.zeros_like(theta)
        h = 1e-5
        for k in range(theta.size):
            up, down = theta.copy(), theta.copy()
            up[k] += h
            down[k] -= h
            model.set_theta(up)
            fu = model.objective(b, gold, w, 0.3)[0]
            model.set_theta(down)
            fd = model.objective(b, gold, w, 0.3)[0]
            num[k] = (fu - fd) / (2 * h)
        model.set_theta(theta)
        out.append(relative_error(grad, num))
    return out


def test_criterion_1_gradients(report):
    errors, slowest, kinds = [], 0.0, set()
    for name, fn, params in _grad_cases():
        t0 = time.perf_counter()
        errors.append(check(fn, params))
        slowest = max(slowest, time.perf_counter() - t0)
        kinds.add(name)
    t0 = time.perf_counter()
    crf = _crf_grad_cases()
    slowest = max(slowest, (time.perf_counter() - t0) / len(crf))
    errors += crf
    ok = len(errors) >= 50 and max(errors) < 1e-5 and slowest <= 1.0
    report(1, ok, "gradient correctness",
           f"{len(errors)} cases over {len(kinds) + 1} operation kinds, max relative error {max(errors):.2e}, "
           f"slowest check {slowest:.2f}s")


# --- 2. exact inference --------------------------------------------------------

POOL = [("dogs", "dog"), ("cats", "cat"), ("ran", "ran"), ("sat", "sat"), ("walked", "walk"), ("hogs", "hog"),
        ("bus", "bus"), ("abs", "ab"), ("ed", "ed")]
TAGS = [tag("N"), tag("V"), tag("ADJ")]


def random_instance(seed):
    """A CRF with at most 5 labels and a random weight vector, plus a 1-4 token input."""
    rng = np.random.default_rng(seed)
    while True:
        data = []
        for _ in range(rng.integers(1, 4)):
            n = rng.integers(1, 4)
            pick = [POOL[k] for k in rng.integers(0, len(POOL), n)]
            data.append(([f for f, _ in pick], [l for _, l in pick], [TAGS[k] for k in rng.integers(0, 3, n)]))
        model = build_crf(data)
        if len(model.labels) <= 5:
            break
    model.set_theta(rng.normal(0.0, 1.0, model.n_params))
    forms = [POOL[k][0] for k in rng.integers(0, len(POOL), rng.integers(1, 5))]
    return model, forms


def close(a, b, rel=1e-10):
    return abs(a - b) <= rel * max(1.0, abs(b))


def test_criterion_2_exact_inference(report):
    t0 = time.perf_counter()
    worst = 0.0
    failures = []
    n_instances = 60
    for seed in range(n_instances):
        model, forms = random_instance(seed)
        table = oracle_scores(model, forms)
        scores = np.array([s for _, s in table])
        logZ = logsumexp(scores)
        got = model.log_partition(forms)
        worst = max(worst, abs(got - logZ) / max(1.0, abs(logZ)))
        if not close(got, logZ):
            failures.append((seed, "logZ"))
        # marginals: per position, per label
        tag_marg, per_pos = model.marginals(forms)
        for i in range(len(forms)):
            want = {}
            for (seq, s) in table:
                want[seq[i]] = want.get(seq[i], 0.0) + math.exp(s - logZ)
            for lab, p in want.items():
                worst = max(worst, abs(per_pos[i].get(lab, 0.0) - p))
                if not close(per_pos[i].get(lab, 0.0), p):
                    failures.append((seed, "marginal"))
            for t, m in enumerate(model.tags):
                p = sum(v for (mm, _), v in want.items() if mm == m)
                if not close(tag_marg[i, t], p):
                    failures.append((seed, "tag marginal"))
        ids, best = model.viterbi(forms)
        # exact ties between sequences occur when observations carry no weight; any maximizer is correct
        by_seq = dict(table)
        chosen = tuple(model.label(j) for j in ids)
        if not close(best, scores.max()) or chosen not in by_seq or not close(by_seq[chosen], scores.max()):
            failures.append((seed, "viterbi"))
    # sampler frequencies on two instances with several sequences each
    n = 100_000
    sampled = 0
    outside = 0
    for seed in (3, 11):
        model, forms = random_instance(seed)
        forms = forms[:2]
        table = oracle_scores(model, forms)
        logZ = logsumexp([s for _, s in table])
        draws = model.sample_labels([forms] * n, np.random.default_rng(seed))
        counts = {}
        for d in draws:
            key = tuple(model.label(j) for j in d)
            counts[key] = counts.get(key, 0) + 1
        if not set(counts) <= {seq for seq, _ in table}:
            failures.append((seed, "sampler support"))
        for seq, s in table:
            p = math.exp(s - logZ)
            sampled += 1
            if abs(counts.get(seq, 0) - n * p) > 3 * math.sqrt(n * p * (1 - p)):
                outside += 1
                failures.append((seed, "sampler frequency"))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    report(2, ok, "exact inference",
           f"{n_instances} random instances (<=4 tokens, <=5 labels), worst deviation {worst:.1e}; "
           f"sampler {sampled - outside}/{sampled} sequences within 3 sigma at 1e5 draws; {elapsed:.1f}s"
           + (f"; failures {failures[:5]}" if failures else ""))


# --- 3. normalization ----------------------------------------------------------

def test_criterion_3_normalization(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    step_err = 0.0
    tags = [tag("N"), tag("V", tns="pst"), tag("ADV")]
    feats = {s for m in tags for s in m.features()}
    for seed in range(5):
        lm = TagLMModel(Vocab(feats, reserved=(UNK_FEATURE,)), tags,
                        TagLMConfig(embed_dim=4, hidden=4, layers=2), np.random.default_rng(seed))
        seq = [tags[k] for k in rng.integers(0, 3, rng.integers(0, 6))]
        step_err = max(step_err, np.abs(lm.step_distributions(seq).sum(axis=1) - 1).max())
        lg = LemmaGenModel("abcd", ("N", "V"), LemmaGenConfig(hidden=5), np.random.default_rng(seed))
        lemma = "".join(rng.choice(list("abcd"), rng.integers(0, 6)))
        step_err = max(step_err, np.abs(lg.step_distributions(lemma, "N").sum(axis=1) - 1).max())
        keys = (BOW, EOW, UNK, "c:a", "c:b", "p:N", "p:V")
        inf = InflectorModel(keys, ["a", "b"], InflectorConfig(embed_dim=4, hidden=3), np.random.default_rng(seed))
        dists, alphas = inf.trace("abba"[:seed], "ab", tag("N"))
        step_err = max(step_err, np.abs(dists.sum(axis=1) - 1).max(), np.abs(alphas.sum(axis=1) - 1).max())

    a, b = tag("N"), tag("V")
    lm = train_taglm([[a], [b], [a, b], [b, a], [a, a]] * 8,
                     TagLMConfig(embed_dim=8, hidden=8, batch_size=4, epochs=40, lr=5.0, dropout=0.0,
                                 valid_fraction=0.0), np.random.default_rng(0))
    masses = {"tag LM": taglm_mass(lm, 20)}
    lg = train_lemmagen([("ab", "N"), ("a", "N"), ("ba", "V"), ("b", "V")] * 5,
                        LemmaGenConfig(batch_size=64, epochs=150), np.random.default_rng(0))
    pruned_total = 0.0
    for pos in ("N", "V"):
        mass, pruned = lemmagen_mass(lg, pos, 20)
        masses[f"lemma generator/{pos}"] = mass
        pruned_total += pruned
    data = [(l + "a", l, tag("N")) for l in ["a", "b", "ab", "ba"]] + [(l, l, tag("V")) for l in ["a", "b", "ab"]]
    inf = train_inflector(data * 3, InflectorConfig(embed_dim=24, hidden=24, batch_size=10, epochs=120),
                          np.random.default_rng(0))
    for lemma, m in (("ab", tag("N")), ("b", tag("V"))):
        masses[f"inflector/{lemma}"] = sum(math.exp(inf.logprob("".join(s), lemma, m))
                                           for n in range(7) for s in itertools.product("ab", repeat=n))
    worst_mass = max(abs(v - 1) for v in masses.values())
    elapsed = time.perf_counter() - t0
    ok = step_err < 1e-9 and worst_mass < 1e-6 and pruned_total < 1e-9 and elapsed < 60
    report(3, ok, "normalization",
           f"max per-step deviation {step_err:.1e}; enumerated mass deviation {worst_mass:.1e} over "
           f"{len(masses)} distributions; {elapsed:.1f}s")


# --- 4. overfit oracles ----------------------------------------------------------

def test_criterion_4_overfit(report):
    t0 = time.perf_counter()
    data = sorted(make_language(0).types())[:50]
    inf = train_inflector(data, InflectorConfig(), np.random.default_rng(0))
    hits = sum(inf.decode(l, m).form == f for f, l, m in data)
    lm = train_taglm([[tag("N", num="pl"), tag("V", tns="pst")]] * 40,
                     TagLMConfig(embed_dim=8, hidden=8, batch_size=4), np.random.default_rng(0))
    lg = train_lemmagen([("talk", "V")], LemmaGenConfig(), np.random.default_rng(0))
    elapsed = time.perf_counter() - t0
    ok = hits == 50 and lm.final_train_loss < 0.01 and lg.final_train_loss < 0.01 and elapsed < 300
    report(4, ok, "overfit oracles",
           f"inflector {hits}/50 after {InflectorConfig().epochs} AdaDelta epochs; tag LM loss "
           f"{lm.final_train_loss:.2e}; lemma generator loss {lg.final_train_loss:.2e}; {elapsed:.0f}s")


# --- 5. semi-supervised gain ---------------------------------------------------------

def test_criterion_5_semisupervised_gain(report, tmp_path):
    t0 = time.perf_counter()
    rows = []
    for seed in (0, 1, 2):
        accs = {}
        for mode in ("nn", "svae"):
            cfg = desk_config(seed, mode)
            cfg.output_dir = str(tmp_path / f"{mode}-{seed}")
            data = load_data(cfg)
            train(cfg, data)
            accs[mode] = evaluate(cfg, cfg.output_dir, data).accuracy
        rows.append(accs)
    nn = float(np.mean([r["nn"] for r in rows]))
    svae = float(np.mean([r["svae"] for r in rows]))
    elapsed = time.perf_counter() - t0
    ok = svae - nn >= 0.05 and elapsed < 900
    per_seed = ", ".join(f"{r['nn']:.2f}->{r['svae']:.2f}" for r in rows)
    report(5, ok, "semi-supervised gain",
           f"mean accuracy NN {nn:.3f}, SVAE {svae:.3f} (+{100 * (svae - nn):.1f} points; per seed {per_seed}) "
           f"on 100 held-out types, 200 labeled + 2000 unlabeled tokens; {elapsed:.0f}s")


# --- 6. algorithm fidelity -------------------------------------------------------------

def test_criterion_6_collapsed_pipeline(report, tmp_path):
    t0 = time.perf_counter()
    files = {}
    for mode in ("nn", "svae"):
        cfg = desk_config(3, mode)
        ws = cfg.wakesleep
        ws.iterations, ws.gamma_sleep, ws.gamma_wake, ws.sleep_samples = 1, 0.0, 0.0, 0
        cfg.output_dir = str(tmp_path / mode)
        train(cfg)
        # parameter payloads only: the header metadata records the (different) mode
        files[mode] = {n: dumps_params(load_params(Path(cfg.output_dir) / f"{n}.params")[0])
                       for n in ("inflector", "taglm", "lemmagen")}
    same = files["nn"] == files["svae"]
    elapsed = time.perf_counter() - t0
    ok = same and elapsed < 120
    report(6, ok, "collapsed wake-sleep equals supervised training",
           f"inflector/tag LM/lemma generator parameters byte-identical: {same}; "
           f"{elapsed:.0f}s")


# --- 7. data protocol ----------------------------------------------------------------

def independent_lexicon(path):
    """Dedup of (form, lemma, tag string) read straight from the columns."""
    seen = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if "-" in cols[0] or "." in cols[0]:
            continue
        feats = [] if cols[5] == "_" else sorted(cols[5].split("|"))
        seen.add((cols[1], cols[2], ";".join([cols[3]] + feats)))
    return seen


def test_criterion_7_data_protocol(report):
    t0 = time.perf_counter()
    path = FIXTURES / "tenk.conllu"
    sents = read_conllu(path)
    total_tokens = sum(len(s) for s in sents)
    prefix = np.cumsum([len(s) for s in sents])
    problems = []
    for n in (500, 1000, 5000):
        c = split_tokens(sents, n)
        k = len(c.labeled)
        # brute force: the smallest k with prefix tokens >= n
        want = next(j + 1 for j in range(len(sents)) if prefix[j] >= n)
        if k != want or list(c.labeled) != sents[:k] or [tuple(s.forms) for s in sents[k:]] != list(c.unlabeled):
            problems.append(n)
    lex = {(f, l, str(m)) for f, l, m in compile_type_lexicon(sents).entries}
    oracle = independent_lexicon(path)
    elapsed = time.perf_counter() - t0
    ok = total_tokens >= 10_000 and not problems and lex == oracle and elapsed < 10
    report(7, ok, "data protocol",
           f"{total_tokens}-token fixture, budgets 500/1000/5000 minimal whole-sentence prefixes "
           f"({'ok' if not problems else problems}); lexicon {len(lex)} types, matches oracle: {lex == oracle}; "
           f"{elapsed:.1f}s")


# --- 8. determinism --------------------------------------------------------------------

def _small(seed, mode, out):
    cfg = desk_config(seed, mode)
    cfg.synthetic.unlabeled_tokens = 300
    ws = cfg.wakesleep
    ws.taglm = TagLMConfig(embed_dim=8, hidden=8, layers=1, epochs=3, lr=1.0)
    ws.lemmagen = LemmaGenConfig(hidden=8, epochs=20)
    ws.inflector = InflectorConfig(embed_dim=16, hidden=16, epochs=5)
    ws.crf = CRFConfig(steps=50)
    cfg.output_dir = str(out)
    return cfg


def test_criterion_8_determinism(report, tmp_path):
    mismatched = []
    compared = 0
    for mode in ("nn", "svae"):
        snaps = []
        for run in ("a", "b"):
            cfg = _small(5, mode, tmp_path / f"{mode}-{run}")
            train(cfg)
            evaluate(cfg, cfg.output_dir)
            d = Path(cfg.output_dir)
            snap = {p.name: p.read_bytes() for p in d.iterdir() if p.name not in ("run.log", "config.json")}
            snap["config.json"] = json.dumps({k: v for k, v in json.loads((d / "config.json").read_text()).items()
                                              if k != "output_dir"}, sort_keys=True).encode()
            snap["run.log"] = "\n".join(line.rsplit(" seconds=", 1)[0]
                                        for line in (d / "run.log").read_text().splitlines()).encode()
            snaps.append(snap)
        compared += len(snaps[0])
        mismatched += [f"{mode}/{k}" for k in snaps[0] if snaps[0][k] != snaps[1].get(k)]
    ok = not mismatched
    report(8, ok, "determinism",
           f"{compared} artifacts (models, eval report, decode dump, resolved config, run log without wall time) "
           f"compared across repeated NN and SVAE runs; mismatches: {mismatched or 'none'}")
