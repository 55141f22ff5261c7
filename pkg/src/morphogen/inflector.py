"""Attention-based encoder-decoder mapping (lemma, tag) to an inflected form.

The source is the linearized tag followed by the lemma characters, wrapped in
word-boundary markers. A bidirectional recurrent encoder feeds a recurrent
decoder with bilinear ("general") attention and input feeding; the attentional
state ``tanh(W_c [context; state])`` drives the output softmax.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, RejectedInput
from .morphdata import MorphTag
from .numcore import (
    GRUParams,
    LSTMParams,
    Parameter,
    Tape,
    adadelta_step,
    affine,
    bilinear_attention,
    concat,
    dropout,
    embedding,
    glorot,
    gru_step,
    log_softmax,
    lstm_step,
    reshape,
    scale,
    softmax,
    softmax_cross_entropy,
    stack,
    take,
    tanh,
    Tensor,
)
from .training import ParamModel, aggregate, minibatches, pad

BOW, EOW, UNK = "<w>", "</w>", "<unk>"


def linearize_input(lemma: str, m: MorphTag) -> list[str]:
    """``<w> POS attr=val ... l e m m a </w>``."""
    return [BOW, m.pos, *m.slot.tokens(), *lemma, EOW]


def _source_keys(lemma: str, m: MorphTag) -> list[str]:
    # namespaced so a POS "V" and a character "V" get different rows
    return [BOW, "p:" + m.pos, *("f:" + t for t in m.slot.tokens()), *("c:" + ch for ch in lemma), EOW]


@dataclass
class InflectorConfig:
    embed_dim: int = 200
    hidden: int = 100
    cell: str = "gru"
    dropout: float = 0.5
    epochs: int = 250
    batch_size: int = 20
    rho: float = 0.95
    eps: float = 1e-6
    lr: float = 1.0
    clip: float | None = 5.0
    beam_width: int = 4
    extra_len: int = 30

    def validate(self):
        if self.cell not in ("gru", "lstm"):
            raise ConfigError(f"inflector cell must be 'gru' or 'lstm', got {self.cell!r}")
        if self.epochs < 0 or self.batch_size < 1 or self.beam_width < 1:
            raise ConfigError("inflector: epochs >= 0, batch_size >= 1 and beam_width >= 1 required")
        if not 0 <= self.dropout < 1:
            raise ConfigError("inflector: dropout must lie in [0, 1)")


@dataclass
class Decoded:
    form: str
    logprob: float
    truncated: bool = False


class _State:
    """Decoder state for a batch: recurrent state(s) plus the fed-back attentional vector."""

    __slots__ = ("h", "c", "feed")

    def __init__(self, h, c, feed):
        self.h, self.c, self.feed = h, c, feed


class InflectorModel(ParamModel):
    def __init__(self, source_symbols, target_chars, config: InflectorConfig, rng: np.random.Generator):
        self.config = config
        self.source_symbols = tuple(source_symbols)  # reserved first
        self.src_index = {s: i for i, s in enumerate(self.source_symbols)}
        self.target_chars = tuple(target_chars)
        self.out_index = {c: i + 1 for i, c in enumerate(self.target_chars)}  # 0 is EOS
        e, H = config.embed_dim, config.hidden
        D = H
        Cell = GRUParams if config.cell == "gru" else LSTMParams
        self.enc_f = Cell.create(e, H, rng, "enc_f.")
        self.enc_b = Cell.create(e, H, rng, "enc_b.")
        self.dec = Cell.create(e + D, D, rng, "dec.")
        self.params = {
            "embed": Parameter(glorot(rng, len(self.source_symbols), e), "embed"),
            "bridge.W": Parameter(glorot(rng, D, 2 * H), "bridge.W"),
            "bridge.b": Parameter(np.zeros(D), "bridge.b"),
            "attn.A": Parameter(glorot(rng, D, 2 * H), "attn.A"),
            "comb.W": Parameter(glorot(rng, D, 2 * H + D), "comb.W"),
            "comb.b": Parameter(np.zeros(D), "comb.b"),
            "out.W": Parameter(glorot(rng, len(self.target_chars) + 1, D), "out.W"),
            "out.b": Parameter(np.zeros(len(self.target_chars) + 1), "out.b"),
        }
        for prefix, cell in (("enc_f", self.enc_f), ("enc_b", self.enc_b), ("dec", self.dec)):
            for k, p in cell.parameters().items():
                self.params[f"{prefix}.{k}"] = p
        self.history: list[dict] = []

    # --- symbols -------------------------------------------------------------

    @property
    def output_size(self) -> int:
        return len(self.target_chars) + 1

    def source_ids(self, lemma: str, m: MorphTag) -> list[int]:
        unk = self.src_index[UNK]
        return [self.src_index.get(k, unk) for k in _source_keys(lemma, m)]

    def char_input_id(self, ch: str) -> int:
        return self.src_index.get("c:" + ch, self.src_index[UNK])

    def target_ids(self, form: str) -> list[int] | None:
        try:
            return [self.out_index[ch] for ch in form] + [0]
        except KeyError:
            return None

    # --- network -------------------------------------------------------------

    def _cell(self, cell, h, c, x, mask=None):
        if self.config.cell == "gru":
            return gru_step(h, x, cell, mask=mask), None
        return lstm_step(h, c, x, cell, mask=mask)

    def encode(self, src: list[list[int]], training=False, rng=None):
        """Run both encoder directions; returns (states (B, T, 2H), mask (B, T), initial decoder state)."""
        ids, mask = pad(src)
        B, T = ids.shape
        H = self.config.hidden
        x = dropout(embedding(self.params["embed"], ids), self.config.dropout, training, rng)
        xs = [take(x, t, axis=1) for t in range(T)]
        zero = np.zeros((B, H))
        hf, cf = zero, (zero if self.config.cell == "lstm" else None)
        fwd = []
        for t in range(T):
            hf, cf = self._cell(self.enc_f, hf, cf, xs[t], mask[:, t])
            fwd.append(hf)
        hb, cb = zero, (zero if self.config.cell == "lstm" else None)
        bwd = [None] * T
        for t in reversed(range(T)):
            hb, cb = self._cell(self.enc_b, hb, cb, xs[t], mask[:, t])
            bwd[t] = hb
        states = stack([concat([f, b]) for f, b in zip(fwd, bwd)], axis=1)
        s0 = tanh(affine(concat([hf, hb]), self.params["bridge.W"], self.params["bridge.b"]))
        c0 = np.zeros((B, H)) if self.config.cell == "lstm" else None
        return states, mask, _State(s0, c0, np.zeros((B, H)))

    def decode_step(self, state: _State, prev_ids, enc, enc_mask, training=False, rng=None):
        """Advance the decoder one symbol; returns (new state, attentional vector, attention weights)."""
        x = dropout(embedding(self.params["embed"], prev_ids), self.config.dropout, training, rng)
        h, c = self._cell(self.dec, state.h, state.c, concat([x, state.feed]))
        ctx, alpha = bilinear_attention(h, enc, self.params["attn.A"], enc_mask)
        att = tanh(affine(concat([ctx, h]), self.params["comb.W"], self.params["comb.b"]))
        att = dropout(att, self.config.dropout, training, rng)
        return _State(h, c, att), att, alpha

    def _out_logits(self, att: np.ndarray) -> np.ndarray:
        return att @ self.params["out.W"].value.T + self.params["out.b"].value

    def batch_loss(self, examples, weights, training=False, rng=None):
        """Summed weighted NLL of ``examples`` = [(form, lemma, tag)] under teacher forcing."""
        src = [self.source_ids(l, m) for _, l, m in examples]
        tgts = [self.target_ids(f) for f, _, _ in examples]
        enc, enc_mask, state = self.encode(src, training, rng)
        B = len(examples)
        L = max(len(t) for t in tgts)
        bow = self.src_index[BOW]
        prev = np.full(B, bow)
        atts = []
        for t in range(L):
            state, att, _ = self.decode_step(state, prev, enc, enc_mask, training, rng)
            atts.append(att)
            prev = np.array([self.char_input_id(f[t]) if t < len(f) else bow for f, _, _ in examples])
        D = self.config.hidden
        flat = reshape(stack(atts, axis=1), (B * L, D))
        logits = affine(flat, self.params["out.W"], self.params["out.b"])
        targets = np.zeros((B, L), dtype=np.int64)
        w = np.zeros((B, L))
        for i, tg in enumerate(tgts):
            targets[i, :len(tg)] = tg
            w[i, :len(tg)] = weights[i]
        return softmax_cross_entropy(logits, targets.reshape(-1), w.reshape(-1))

    # --- scoring -------------------------------------------------------------

    def trace(self, form: str, lemma: str, m: MorphTag):
        """Per-step output distributions and attention weights while scoring ``form``."""
        enc, enc_mask, state = self.encode([self.source_ids(lemma, m)])
        prev = np.array([self.src_index[BOW]])
        dists, alphas = [], []
        for t in range(len(form) + 1):
            state, att, alpha = self.decode_step(state, prev, enc, enc_mask)
            dists.append(softmax(self._out_logits(att.value[0])))
            alphas.append(alpha[0])
            if t < len(form):
                prev = np.array([self.char_input_id(form[t])])
        return np.stack(dists), np.stack(alphas)

    def step_logprobs(self, form: str, lemma: str, m: MorphTag) -> np.ndarray:
        """log p of each character of ``form`` and of the final EOS."""
        tgt = self.target_ids(form)
        if tgt is None:
            return np.array([-math.inf])
        dists, _ = self.trace(form, lemma, m)
        return np.log(dists[np.arange(len(tgt)), tgt])

    def logprob(self, form: str, lemma: str, m: MorphTag) -> float:
        return float(self.step_logprobs(form, lemma, m).sum())

    # --- decoding ------------------------------------------------------------

    def _expand(self, enc, enc_mask, state: _State, rows):
        rows = np.asarray(rows)
        pick = lambda t: None if t is None else Tensor(t.value[rows])
        return pick(enc), enc_mask[rows], _State(pick(state.h), pick(state.c), pick(state.feed))

    def greedy(self, lemma: str, m: MorphTag) -> Decoded:
        return self.greedy_batch([(lemma, m)])[0]

    def greedy_batch(self, items) -> list[Decoded]:
        src = [self.source_ids(l, m) for l, m in items]
        enc, enc_mask, state = self.encode(src)
        B = len(items)
        caps = np.array([len(l) + self.config.extra_len for l, _ in items])
        out = [[] for _ in range(B)]
        score = np.zeros(B)
        done = np.zeros(B, dtype=bool)
        cut = np.zeros(B, dtype=bool)
        prev = np.full(B, self.src_index[BOW])
        for t in range(int(caps.max()) + 1):
            state, att, _ = self.decode_step(state, prev, enc, enc_mask)
            lp = log_softmax(self._out_logits(att.value))
            k = lp.argmax(axis=1)
            for i in range(B):
                if done[i]:
                    continue
                if t >= caps[i] and k[i] != 0:
                    done[i] = cut[i] = True
                    continue
                score[i] += lp[i, k[i]]
                if k[i] == 0:
                    done[i] = True
                else:
                    out[i].append(self.target_chars[k[i] - 1])
            if done.all():
                break
            prev = np.array([self.char_input_id(self.target_chars[j - 1]) if j > 0 else self.src_index[BOW]
                             for j in k])
        return [Decoded("".join(o), float(s), bool(c)) for o, s, c in zip(out, score, cut)]

    def beam(self, lemma: str, m: MorphTag, width: int | None = None) -> Decoded:
        """Beam search over total log probability; never returns worse than greedy."""
        width = width or self.config.beam_width
        cap = len(lemma) + self.config.extra_len
        enc0, mask0, state0 = self.encode([self.source_ids(lemma, m)])
        hyps = [((), 0.0)]
        enc, enc_mask, state = enc0, mask0, state0
        finished: list[tuple[tuple[int, ...], float]] = []
        V = self.output_size
        for t in range(cap + 1):
            prev = np.array([self.char_input_id(self.target_chars[h[-1] - 1]) if h else self.src_index[BOW]
                             for h, _ in hyps])
            state, att, _ = self.decode_step(state, prev, enc, enc_mask)
            lp = log_softmax(self._out_logits(att.value))
            total = np.array([s for _, s in hyps])[:, None] + lp
            if t == cap:  # only EOS may follow a full-length hypothesis
                total[:, 1:] = -np.inf
            order = np.argsort(-total.reshape(-1), kind="stable")
            new_hyps, new_rows = [], []
            for flat in order[:width]:
                h_i, sym = divmod(int(flat), V)
                sc = float(total[h_i, sym])
                if not np.isfinite(sc):
                    continue
                if sym == 0:
                    finished.append((hyps[h_i][0], sc))
                else:
                    new_hyps.append((hyps[h_i][0] + (sym,), sc))
                    new_rows.append(h_i)
            if finished and (not new_hyps or max(s for _, s in finished) >= max(s for _, s in new_hyps)):
                break
            if not new_hyps:
                break
            hyps = new_hyps
            enc, enc_mask, state = self._expand(enc, enc_mask, state, new_rows)
        g = self.greedy(lemma, m)
        if finished:
            best_syms, best = max(finished, key=lambda x: x[1])
            form = "".join(self.target_chars[s - 1] for s in best_syms)
            if g.truncated or best >= g.logprob:
                return Decoded(form, best, False)
        return g

    def decode(self, lemma: str, m: MorphTag, mode: str = "beam", width: int | None = None) -> Decoded:
        if mode == "greedy":
            return self.greedy(lemma, m)
        if mode == "beam":
            return self.beam(lemma, m, width)
        raise RejectedInput(f"unknown decoding mode {mode!r}")

    def sample(self, lemma: str, m: MorphTag, rng: np.random.Generator, temperature: float = 1.0) -> Decoded:
        cap = len(lemma) + self.config.extra_len
        enc, enc_mask, state = self.encode([self.source_ids(lemma, m)])
        prev = np.array([self.src_index[BOW]])
        out, score = [], 0.0
        for _ in range(cap + 1):
            state, att, _ = self.decode_step(state, prev, enc, enc_mask)
            lp = log_softmax(self._out_logits(att.value[0]) / temperature)
            k = int(rng.choice(len(lp), p=np.exp(lp)))
            if k == 0:
                return Decoded("".join(out), score + float(lp[0]))
            if len(out) >= cap:
                return Decoded("".join(out), score, True)
            score += float(lp[k])
            out.append(self.target_chars[k - 1])
            prev = np.array([self.char_input_id(self.target_chars[k - 1])])
        return Decoded("".join(out), score, True)

    # --- persistence ---------------------------------------------------------

    def sidecar(self) -> dict:
        return {"kind": "inflector", "config": asdict(self.config),
                "source_symbols": list(self.source_symbols), "target_chars": list(self.target_chars)}

    def save(self, directory, name: str = "inflector", meta: dict | None = None) -> None:
        d = Path(directory)
        self.save_params(d / f"{name}.params", {"kind": "inflector", **(meta or {})})
        (d / f"{name}.json").write_text(json.dumps(self.sidecar(), indent=1, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, directory, name: str = "inflector") -> "InflectorModel":
        d = Path(directory)
        side = json.loads((d / f"{name}.json").read_text(encoding="utf-8"))
        model = cls.__new__(cls)
        cls.__init__(model, side["source_symbols"], side["target_chars"],
                     InflectorConfig(**side["config"]), np.random.default_rng(0))
        model.read_params(d / f"{name}.params")
        return model


def train_inflector(triples, config: InflectorConfig | None = None, rng: np.random.Generator | None = None,
                    weights=None) -> InflectorModel:
    """Fit the inflector with AdaDelta on weighted character cross entropy.

    ``triples`` are (form, lemma, tag); identical triples are merged by summing
    weights, and zero-weight triples are dropped before the vocabularies are built.
    """
    config = config or InflectorConfig()
    config.validate()
    rng = rng if rng is not None else np.random.default_rng(0)
    merged = aggregate(list(triples), weights)
    if not merged:
        raise ConfigError("inflector needs at least one training triple with positive weight")
    keys = {k for (f, l, m), _ in merged for k in _source_keys(l, m)}
    keys |= {"c:" + ch for (f, _, _), _ in merged for ch in f}
    source = (BOW, EOW, UNK, *sorted(keys - {BOW, EOW, UNK}))
    target = sorted({ch for (f, _, _), _ in merged for ch in f})
    model = InflectorModel(source, target, config, rng)

    examples = [t for t, _ in merged]
    w = np.array([x for _, x in merged])
    n = np.array([len(f) + 1 for f, _, _ in examples])
    mean_w = float((w * n).sum() / n.sum())
    params = model.parameters()
    for epoch in range(config.epochs):
        running = 0.0
        for idx in minibatches(len(examples), config.batch_size, rng):
            with Tape() as tape:
                loss = model.batch_loss([examples[i] for i in idx], w[idx], True, rng)
                obj = scale(loss, 1.0 / (mean_w * float(n[idx].sum())))
            tape.backward(obj)
            running += loss.item()
            adadelta_step(params, config.rho, config.eps, config.lr, config.clip)
        model.history.append({"epoch": epoch + 1, "train_loss": running / float((w * n).sum())})
    return model
