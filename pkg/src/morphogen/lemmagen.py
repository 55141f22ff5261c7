"""Character-level LSTM language model over lemmata, conditioned on the POS tag.

At every step the LSTM input is the previous character's embedding
concatenated with the POS embedding. The output distribution ranges over the
training alphabet plus end-of-word; characters never seen in training are
read as UNK on the input side and are impossible on the output side.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .morphdata import MorphTag
from .numcore import (
    LSTMParams,
    Parameter,
    Tape,
    add,
    affine,
    clip_and_step_sgd,
    concat,
    embedding,
    glorot,
    log_softmax,
    lstm_step,
    reshape,
    scale,
    softmax,
    softmax_cross_entropy,
    stack,
    zero_grads,
)
from .training import ParamModel, aggregate, minibatches

BOS, UNK, EOS = "<w>", "<unk>", "</w>"
UNK_POS = "<unk-pos>"


@dataclass
class LemmaGenConfig:
    char_dim: int = 5
    pos_dim: int = 5
    hidden: int = 50
    epochs: int = 500
    lr: float = 4.0
    weight_decay: float = 1e-6
    clip: float = 1.0
    batch_size: int = 20000
    temperature: float = 0.75
    max_len: int = 40
    unk_pos_rate: float = 0.001

    def validate(self):
        if self.lr < 0 or self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("lemmagen: lr/epochs must be >= 0 and batch_size >= 1")
        if self.temperature <= 0:
            raise ConfigError("lemmagen: temperature must be positive")


@dataclass
class LemmaSample:
    lemma: str
    truncated: bool


class LemmaGenModel(ParamModel):
    def __init__(self, chars, pos_tags, config: LemmaGenConfig, rng: np.random.Generator):
        self.config = config
        self.chars = tuple(chars)
        self.pos_tags = (UNK_POS, *[p for p in pos_tags if p != UNK_POS])
        # input ids: 0 BOS, 1 UNK, 2.. chars; output ids: 0 EOS, 1.. chars
        self.in_index = {c: i + 2 for i, c in enumerate(self.chars)}
        self.out_index = {c: i + 1 for i, c in enumerate(self.chars)}
        self.pos_index = {p: i for i, p in enumerate(self.pos_tags)}
        c = config
        self.cell = LSTMParams.create(c.char_dim + c.pos_dim, c.hidden, rng, "lstm.")
        self.params = {
            "char_embed": Parameter(glorot(rng, len(self.chars) + 2, c.char_dim), "char_embed"),
            "pos_embed": Parameter(glorot(rng, len(self.pos_tags), c.pos_dim), "pos_embed"),
            "out.W": Parameter(glorot(rng, len(self.chars) + 1, c.hidden), "out.W"),
            "out.b": Parameter(np.zeros(len(self.chars) + 1), "out.b"),
            "h0": Parameter(np.zeros(c.hidden), "h0"),
            "c0": Parameter(np.zeros(c.hidden), "c0"),
        }
        for k, p in self.cell.parameters().items():
            self.params[f"lstm.{k}"] = p
        self.history: list[dict] = []

    @property
    def output_size(self) -> int:
        return len(self.chars) + 1

    def pos_id(self, pos) -> int:
        if isinstance(pos, MorphTag):
            pos = pos.pos
        return self.pos_index.get(pos, 0)

    def input_ids(self, lemma: str) -> list[int]:
        return [0] + [self.in_index.get(ch, 1) for ch in lemma]

    def target_ids(self, lemma: str) -> list[int] | None:
        try:
            return [self.out_index[ch] for ch in lemma] + [0]
        except KeyError:
            return None

    def _start(self, batch: int):
        z = np.zeros((batch, self.config.hidden))
        return add(z, self.params["h0"]), add(z, self.params["c0"])

    def _step(self, h, c, char_ids, pos_ids, mask=None):
        x = concat([embedding(self.params["char_embed"], char_ids),
                    embedding(self.params["pos_embed"], pos_ids)], axis=-1)
        return lstm_step(h, c, x, self.cell, mask=mask)

    def _logits(self, h: np.ndarray) -> np.ndarray:
        return h @ self.params["out.W"].value.T + self.params["out.b"].value

    def batch_loss(self, lemmata: list[str], pos_ids: np.ndarray, weights: np.ndarray):
        B = len(lemmata)
        ins = [self.input_ids(l) for l in lemmata]
        tgts = [self.target_ids(l) for l in lemmata]
        L = max(len(s) for s in ins)
        h, c = self._start(B)
        tops = []
        for t in range(L):
            ids = np.array([s[t] if t < len(s) else 0 for s in ins])
            mask = np.array([t < len(s) for s in ins])
            h, c = self._step(h, c, ids, pos_ids, mask)
            tops.append(h)
        flat = reshape(stack(tops, axis=1), (B * L, self.config.hidden))
        logits = affine(flat, self.params["out.W"], self.params["out.b"])
        targets = np.zeros((B, L), dtype=np.int64)
        w = np.zeros((B, L))
        for i, s in enumerate(tgts):
            targets[i, :len(s)] = s
            w[i, :len(s)] = weights[i]
        return softmax_cross_entropy(logits, targets.reshape(-1), w.reshape(-1))

    # --- scoring and sampling -----------------------------------------------

    def step_distributions(self, lemma: str, pos) -> np.ndarray:
        """Output distributions before each character and before EOS: (len + 1, |Σ| + 1)."""
        h, c = self._start(1)
        p = np.array([self.pos_id(pos)])
        rows = []
        for i in self.input_ids(lemma):
            h, c = self._step(h, c, np.array([i]), p)
            rows.append(softmax(self._logits(h.value[0])))
        return np.stack(rows)

    def logprob(self, lemma: str, pos) -> float:
        tgt = self.target_ids(lemma)
        if tgt is None:
            return -math.inf
        h, c = self._start(1)
        p = np.array([self.pos_id(pos)])
        total = 0.0
        for i, o in zip(self.input_ids(lemma), tgt):
            h, c = self._step(h, c, np.array([i]), p)
            total += float(log_softmax(self._logits(h.value[0]))[o])
        return total

    def sample(self, pos, rng: np.random.Generator, temperature: float | None = None,
               max_len: int | None = None) -> LemmaSample:
        temperature = self.config.temperature if temperature is None else temperature
        if temperature <= 0:
            raise ConfigError("temperature must be positive")
        cap = self.config.max_len if max_len is None else max_len
        h, c = self._start(1)
        p = np.array([self.pos_id(pos)])
        prev, out = 0, []
        while True:
            h, c = self._step(h, c, np.array([prev]), p)
            probs = softmax(self._logits(h.value[0]) / temperature)
            k = int(rng.choice(len(probs), p=probs))
            if k == 0:
                return LemmaSample("".join(out), False)
            if len(out) >= cap:
                return LemmaSample("".join(out), True)
            ch = self.chars[k - 1]
            out.append(ch)
            prev = self.in_index[ch]

    def mean_loss(self, pairs, weights) -> float:
        lemmata = [l for l, _ in pairs]
        pos = np.array([p for _, p in pairs])
        weights = np.asarray(weights, dtype=float)
        n = np.array([len(l) + 1 for l in lemmata])
        return self.batch_loss(lemmata, pos, weights).item() / float((weights * n).sum())

    # --- persistence ---------------------------------------------------------

    def sidecar(self) -> dict:
        return {"kind": "lemmagen", "config": asdict(self.config), "chars": list(self.chars),
                "pos_tags": list(self.pos_tags)}

    def save(self, directory, name: str = "lemmagen", meta: dict | None = None) -> None:
        d = Path(directory)
        self.save_params(d / f"{name}.params", {"kind": "lemmagen", **(meta or {})})
        (d / f"{name}.json").write_text(json.dumps(self.sidecar(), indent=1, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, directory, name: str = "lemmagen") -> "LemmaGenModel":
        d = Path(directory)
        side = json.loads((d / f"{name}.json").read_text(encoding="utf-8"))
        model = cls(side["chars"], side["pos_tags"], LemmaGenConfig(**side["config"]), np.random.default_rng(0))
        model.read_params(d / f"{name}.params")
        return model


def train_lemmagen(pairs, config: LemmaGenConfig | None = None, rng: np.random.Generator | None = None,
                   weights=None) -> LemmaGenModel:
    """Fit the lemma generator on (lemma, POS) pairs, one per token.

    Duplicate pairs are merged into summed weights. A ``unk_pos_rate`` share of
    every pair's weight is also spent on the UNK-POS row so unseen POS tags get a
    trained embedding.
    """
    config = config or LemmaGenConfig()
    config.validate()
    rng = rng if rng is not None else np.random.default_rng(0)
    pairs = [(l, p.pos if isinstance(p, MorphTag) else p) for l, p in pairs]
    merged = aggregate(pairs, weights)
    if not merged:
        raise ConfigError("lemma generator needs at least one (lemma, POS) pair with positive weight")
    chars = sorted({ch for (l, _), _ in merged for ch in l})
    pos_tags = sorted({p for (_, p), _ in merged})
    model = LemmaGenModel(chars, pos_tags, config, rng)

    examples = [(l, model.pos_id(p), w * (1 - config.unk_pos_rate)) for (l, p), w in merged]
    if config.unk_pos_rate > 0:
        examples += [(l, 0, w * config.unk_pos_rate) for (l, _), w in merged]
    lemmata = [l for l, _, _ in examples]
    pos = np.array([p for _, p, _ in examples])
    w = np.array([x for _, _, x in examples])
    n = np.array([len(l) + 1 for l in lemmata])
    mean_w = float((w * n).sum() / n.sum())

    params = model.parameters()
    for epoch in range(config.epochs):
        running = 0.0
        for idx in minibatches(len(lemmata), config.batch_size, rng):
            with Tape() as tape:
                loss = model.batch_loss([lemmata[i] for i in idx], pos[idx], w[idx])
                obj = scale(loss, 1.0 / (mean_w * float(n[idx].sum())))
            tape.backward(obj)
            running += loss.item()
            if config.lr > 0:
                clip_and_step_sgd(params, config.lr, config.clip, config.weight_decay)
            else:
                zero_grads(params)
        model.history.append({"epoch": epoch + 1, "train_loss": running / float((w * n).sum())})
    model.final_train_loss = model.batch_loss(lemmata, pos, w).item() / float((w * n).sum())
    return model
